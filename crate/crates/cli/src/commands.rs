use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ifes::banach::{constants_for, solve_product_continuous, stability_check};
use ifes::classes::{check_banach_hypotheses, check_tarski_hypotheses, in_g_class, HypothesisReport};
use ifes::conjugacy::{log_conjugate_spec, reflect_spec};
use ifes::expr::parse;
use ifes::tarski::{solve_both, solve_max, solve_min, uniqueness_comparable, TarskiError};
use ifes::{BanachConfig64, ClassParams64, EvalMode, Grid, ProductSpec, TarskiConfig64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::report::{BanachSummary, Resolution, RunReport, StabilityCase, VerifyReport};
use crate::specfile::{mode_name, LoadError, Method, SpecFile};

pub const REFINE: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(_) => 3,
            _ => 4,
        }
    }
}

fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

/// Command-line values that take precedence over the `[solver]` section.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub method: Option<Method>,
    pub grid: Option<usize>,
    pub levels: Option<usize>,
    pub mode: Option<EvalMode>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Settings {
    pub method: Method,
    pub grid: usize,
    pub levels: usize,
    pub mode: EvalMode,
    pub tol: f64,
    pub max_iter: usize,
}

impl Settings {
    pub fn resolve(file: &SpecFile, o: &Overrides) -> Self {
        let s = &file.solver;
        let method = o.method.or(s.method).unwrap_or(if file.classes.is_some() && file.spec.interval.lo() > 0.0 {
            Method::Banach
        } else {
            Method::TarskiBoth
        });
        let banach = method == Method::Banach;
        let grid = o.grid.or(s.grid).unwrap_or(if banach { 1024 } else { 512 });
        let levels = o.levels.or(s.levels).unwrap_or(grid);
        Settings {
            method,
            grid,
            levels,
            mode: o.mode.or(s.mode).unwrap_or(if banach { EvalMode::PiecewiseLinear } else { EvalMode::StepUsc }),
            tol: o.tol.or(s.tol).unwrap_or(if banach { 1e-10 } else { 1e-2 }),
            max_iter: o.max_iter.or(s.max_iter).unwrap_or(if banach { 50_000 } else { (grid + 1) * levels + 1 }),
        }
    }

    fn resolution(&self) -> Resolution {
        Resolution {
            grid: self.grid,
            levels: self.method.is_tarski().then_some(self.levels),
            mode: mode_name(self.mode),
            tol: self.tol,
            max_iter: self.max_iter,
            refine: REFINE,
        }
    }

    fn banach(&self, classes: &ClassParams64) -> BanachConfig64 {
        let mut cfg = BanachConfig64::new(self.grid, self.tol, self.max_iter, classes.clone());
        cfg.refine = REFINE;
        cfg
    }

    fn tarski(&self) -> TarskiConfig64 {
        let mut cfg = TarskiConfig64::new(self.grid, self.levels, self.mode);
        cfg.tol = self.tol;
        cfg.max_sweeps = Some(self.max_iter);
        cfg.refine = REFINE;
        cfg
    }
}

pub fn hypotheses_for(file: &SpecFile, method: Method) -> Result<HypothesisReport, CliError> {
    match method {
        Method::Banach => {
            let classes = file.classes.as_ref().ok_or_else(|| CliError::Usage("method banach needs a [classes] section".into()))?;
            Ok(check_banach_hypotheses(&file.spec, classes))
        }
        _ => Ok(check_tarski_hypotheses(&file.spec)),
    }
}

fn write_grid(g: &Grid, out: &Path, name: &str, report: &mut RunReport) -> Result<(), CliError> {
    let path = out.join(name);
    let f = File::create(&path).map_err(io(path.display().to_string()))?;
    g.write_csv(BufWriter::new(f)).map_err(|e| CliError::Io { context: path.display().to_string(), source: std::io::Error::other(e) })?;
    report.files.push(name.to_string());
    Ok(())
}

pub fn write_report(report: &RunReport, out: &Path) -> Result<(), CliError> {
    let path = out.join("report.json");
    report.write(&path).map_err(io(path.display().to_string()))
}

fn prepare_out(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(io(out.display().to_string()))
}

/// Solves with the resolved method and fills `report`; the exit code is
/// stored in `report.exit_code`.
pub fn solve_into(file: &SpecFile, settings: &Settings, out: &Path, report: &mut RunReport) -> Result<(), CliError> {
    let start = Instant::now();
    prepare_out(out)?;
    report.method = Some(settings.method);
    report.resolution = Some(settings.resolution());
    let hyp = hypotheses_for(file, settings.method)?;
    let passed = hyp.all_passed();
    report.hypotheses = Some(hyp);
    if let (Method::Banach, Some(classes)) = (settings.method, &file.classes) {
        report.constants = constants_for(&file.spec.exponents, classes).ok();
    }
    if !passed {
        report.exit_code = 2;
    } else if settings.method == Method::Banach {
        let classes = file.classes.as_ref().expect("checked by hypotheses_for");
        let sol = solve_product_continuous(&file.spec, &settings.banach(classes)).map_err(|e| CliError::Solver(e.to_string()))?;
        write_grid(&sol.function, out, "solution.csv", report)?;
        report.banach = Some(BanachSummary::from(&sol.report));
        report.exit_code = if sol.report.converged { 0 } else { 3 };
    } else {
        let cfg = settings.tarski();
        let result = match settings.method {
            Method::TarskiMin => solve_min(&file.spec, &cfg),
            Method::TarskiMax => solve_max(&file.spec, &cfg),
            _ => solve_both(&file.spec, &cfg),
        };
        let result = match result {
            Ok(r) => r,
            Err(TarskiError::Hypotheses(h)) => {
                report.hypotheses = Some(h);
                report.exit_code = 2;
                report.wall_clock_s = start.elapsed().as_secs_f64();
                return write_report(report, out);
            }
            Err(e) => return Err(CliError::Solver(e.to_string())),
        };
        if let Some(g) = result.g_min() {
            write_grid(g, out, "solution_min.csv", report)?;
        }
        if let Some(g) = result.g_max() {
            write_grid(g, out, "solution_max.csv", report)?;
        }
        if settings.mode == EvalMode::PiecewiseLinear {
            report.notes.push("piecewise-linear mode: results are residual-only, no bracket certificate".into());
        }
        let certified = result.certified() || settings.mode == EvalMode::PiecewiseLinear;
        report.tarski = Some(result);
        report.exit_code = if certified { 0 } else { 3 };
    }
    report.wall_clock_s = start.elapsed().as_secs_f64();
    write_report(report, out)
}

pub fn solve(spec_path: &Path, overrides: &Overrides, out: &Path, seed: u64) -> Result<RunReport, CliError> {
    let file = SpecFile::load(spec_path)?;
    let settings = Settings::resolve(&file, overrides);
    let mut report = RunReport::new("solve", seed);
    report.spec = Some(spec_path.display().to_string());
    solve_into(&file, &settings, out, &mut report)?;
    Ok(report)
}

/// Hypothesis report for the resolved method, with the existence constants
/// when the Banach route applies.
pub fn check(spec_path: &Path, method: Option<Method>) -> Result<(Method, HypothesisReport, RunReport), CliError> {
    let file = SpecFile::load(spec_path)?;
    let settings = Settings::resolve(&file, &Overrides { method, ..Overrides::default() });
    let hyp = hypotheses_for(&file, settings.method)?;
    let mut report = RunReport::new("check", 0);
    report.spec = Some(spec_path.display().to_string());
    report.method = Some(settings.method);
    if let (Method::Banach, Some(classes)) = (settings.method, &file.classes) {
        report.constants = constants_for(&file.spec.exponents, classes).ok();
    }
    report.exit_code = if hyp.all_passed() { 0 } else { 2 };
    report.hypotheses = Some(hyp.clone());
    Ok((settings.method, hyp, report))
}

/// Recomputes residual, monotonicity and class membership of a solution
/// table without any solver state.
pub fn verify(spec_path: &Path, solution: &Path, mode: Option<EvalMode>, out: Option<&Path>) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let file = SpecFile::load(spec_path)?;
    let settings = Settings::resolve(&file, &Overrides { mode, ..Overrides::default() });
    let f = File::open(solution).map_err(io(solution.display().to_string()))?;
    let g = Grid::read_csv(f, settings.mode, None).map_err(|e| CliError::Usage(format!("{}: {e}", solution.display())))?;
    let spec = &file.spec;
    let (c, d) = (spec.interval.lo(), spec.interval.hi());
    let tol = 1e-12 * c.abs().max(d.abs()).max(1.0);
    if (g.domain().lo() - c).abs() > tol || (g.domain().hi() - d).abs() > tol {
        return Err(CliError::Usage(format!(
            "grid mismatch: solution covers [{}, {}], spec interval is [{c}, {d}]",
            g.domain().lo(),
            g.domain().hi()
        )));
    }
    let g = Grid::new(spec.interval, g.shared_nodes(), g.values().to_vec(), g.mode(), None)
        .map_err(|e| CliError::Usage(format!("{}: {e}", solution.display())))?;
    let residual = spec.residual(&g, REFINE).map_err(|e| CliError::Solver(e.to_string()))?;
    let min_value = g.values().iter().copied().fold(f64::INFINITY, f64::min);
    let class_verdict = match &file.classes {
        Some(cl) if c > 0.0 => in_g_class(&g, &spec.interval, cl.delta, cl.m).ok(),
        _ => None,
    };
    let mut report = RunReport::new("verify", 0);
    report.spec = Some(spec_path.display().to_string());
    report.verify = Some(VerifyReport {
        nodes: g.len(),
        residual,
        monotone: g.is_monotone(),
        self_map: g.values().iter().all(|&v| c <= v && v <= d),
        min_value,
        above_floor: min_value >= spec.floor,
        class_verdict,
    });
    report.wall_clock_s = start.elapsed().as_secs_f64();
    if let Some(out) = out {
        prepare_out(out)?;
        write_report(&report, out)?;
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConjugateKind {
    Log,
    Reflect,
}

/// The log-conjugate sum form, or the reflected product form as a loadable
/// `.ifes` file.
pub fn conjugate(spec_path: &Path, kind: ConjugateKind) -> Result<String, CliError> {
    let file = SpecFile::load(spec_path)?;
    match kind {
        ConjugateKind::Log => {
            let sum = log_conjugate_spec(&file.spec).map_err(|e| CliError::Usage(e.to_string()))?;
            let mut out = String::from("# sum form: sum_k lambda.k Upsilon.k(f^k(phi.k(x))) = F(x)\n[sum]\n");
            out += &format!("n = {}\n", sum.n());
            let w: Vec<String> = sum.weights.iter().map(|x| format!("{x:?}")).collect();
            out += &format!("lambda = [{}]\n", w.join(", "));
            out += &format!("interval = [{:?}, {:?}]\n", sum.interval.lo(), sum.interval.hi());
            out += &format!("F = \"{}\"\n", sum.rhs);
            for (k, e) in sum.term_maps.iter().enumerate() {
                out += &format!("Upsilon.{} = \"{e}\"\n", k + 1);
            }
            for (k, e) in sum.arg_maps.iter().enumerate() {
                out += &format!("phi.{} = \"{e}\"\n", k + 1);
            }
            Ok(out)
        }
        ConjugateKind::Reflect => {
            let r = reflect_spec(&file.spec).map_err(|e| CliError::Usage(e.to_string()))?;
            let mut out = String::new();
            out += &format!("# solutions correspond: {}\n", r.solutions_correspond);
            for n in &r.notes {
                out += &format!("# {n}\n");
            }
            let reflected = SpecFile { spec: r.spec, classes: None, solver: Default::default() };
            out += &reflected.render();
            Ok(out)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScanParam {
    Lambda(usize),
    Delta,
    M,
}

impl ScanParam {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "delta" => Ok(ScanParam::Delta),
            "M" => Ok(ScanParam::M),
            _ => s
                .strip_prefix("lambda.")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(ScanParam::Lambda)
                .ok_or_else(|| CliError::Usage(format!("unknown scan parameter `{s}` (lambda.k, delta, M)"))),
        }
    }
}

/// Drops the last digit or two of accumulated error, so that `0.5:0.95:10`
/// yields `0.65` rather than `0.6499999999999999`.
fn round_sig(v: f64) -> f64 {
    format!("{v:.14e}").parse().expect("formatted float")
}

/// `lo:hi:steps`, `steps` samples from `lo` to `hi` inclusive.
pub fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("malformed range `{s}`, expected lo:hi:steps"));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, steps] = parts[..] else { return Err(bad()) };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let steps: usize = steps.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(bad());
    }
    Ok(match steps {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n).map(|i| round_sig(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect(),
    })
}

/// Spec and class parameters with one parameter replaced. Setting `λ_k`
/// rescales the other exponents so that their sum is kept.
fn current(file: &SpecFile, param: &ScanParam) -> f64 {
    match param {
        ScanParam::Lambda(k) => file.spec.exponents.get(k - 1).copied().unwrap_or(0.0),
        ScanParam::Delta => file.spec.floor,
        ScanParam::M => file.classes.as_ref().map_or(1.0, |c| c.m),
    }
}

fn vary(file: &SpecFile, param: &ScanParam, v: f64) -> Result<(ProductSpec, Option<ClassParams64>), CliError> {
    let mut spec = file.spec.clone();
    let mut classes = file.classes.clone();
    match param {
        ScanParam::Lambda(k) => {
            let n = spec.n();
            if *k > n {
                return Err(CliError::Usage(format!("lambda.{k} out of range, n = {n}")));
            }
            let total = spec.exponent_sum();
            let old = spec.exponents[k - 1];
            let rest = total - old;
            for (i, lam) in spec.exponents.iter_mut().enumerate() {
                if i == k - 1 {
                    *lam = v;
                } else if rest != 0.0 {
                    *lam *= (total - v) / rest;
                } else if n > 1 {
                    return Err(CliError::Usage("other exponents sum to zero; cannot rescale".into()));
                }
            }
        }
        ScanParam::Delta => spec.floor = v,
        ScanParam::M => match classes.as_mut() {
            Some(c) => c.m = v,
            None => return Err(CliError::Usage("scanning M needs a [classes] section".into())),
        },
    }
    Ok((spec, classes))
}

#[derive(Clone, Debug)]
pub struct ScanTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ScanTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in memory");
        for r in &self.rows {
            w.write_record(r).expect("in memory");
        }
        String::from_utf8(w.into_inner().expect("in memory")).expect("utf8")
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

pub fn scan_file(file: &SpecFile, param_name: &str, range: &str) -> Result<ScanTable, CliError> {
    let param = ScanParam::parse(param_name)?;
    let values = parse_range(range)?;
    vary(file, &param, current(file, &param))?;
    let base_banach: Vec<String> = file
        .classes
        .as_ref()
        .map(|c| check_banach_hypotheses(&file.spec, c).items.iter().map(|i| i.name.clone()).collect())
        .unwrap_or_default();
    let base_tarski: Vec<String> = check_tarski_hypotheses(&file.spec).items.iter().map(|i| i.name.clone()).collect();
    let mut header = vec![param_name.to_string()];
    if file.classes.is_some() {
        header.extend(["K0", "K1", "K"].map(String::from));
    }
    header.extend(base_banach.iter().map(|n| format!("banach: {n}")));
    header.extend(base_tarski.iter().map(|n| format!("tarski: {n}")));

    let rows = values
        .par_iter()
        .map(|&v| {
            let (spec, classes) = vary(file, &param, v)?;
            let mut row = vec![fmt_num(v)];
            let flag = |rep: &HypothesisReport, name: &str| match rep.get(name) {
                Some(i) => if i.passed { "1" } else { "0" }.to_string(),
                None => String::new(),
            };
            if let Some(c) = &classes {
                match constants_for(&spec.exponents, c) {
                    Ok(k) => row.extend([k.k0, k.k1, k.k].map(fmt_num)),
                    Err(_) => row.extend(std::iter::repeat_n(String::new(), 3)),
                }
                let rep = check_banach_hypotheses(&spec, c);
                row.extend(base_banach.iter().map(|n| flag(&rep, n)));
            }
            let rep = check_tarski_hypotheses(&spec);
            row.extend(base_tarski.iter().map(|n| flag(&rep, n)));
            Ok(row)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(ScanTable { header, rows })
}

pub fn scan(spec_path: &Path, param: &str, range: &str, out: &Path) -> Result<(ScanTable, PathBuf), CliError> {
    let file = SpecFile::load(spec_path)?;
    let table = scan_file(&file, param, range)?;
    prepare_out(out)?;
    let path = out.join("scan.csv");
    std::fs::write(&path, table.to_csv()).map_err(io(path.display().to_string()))?;
    Ok((table, path))
}

pub const EXAMPLES: [&str; 3] = ["exmp1", "e1", "ex2"];

pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "exmp1" => Some(include_str!("../examples/exmp1.ifes")),
        "e1" => Some(include_str!("../examples/e1.ifes")),
        "ex2" => Some(include_str!("../examples/ex2.ifes")),
        _ => None,
    }
}

pub fn load_bundled(name: &str) -> Result<SpecFile, CliError> {
    let text = bundled(name).ok_or_else(|| CliError::Usage(format!("unknown example `{name}` ({})", EXAMPLES.join(", "))))?;
    SpecFile::parse(text).map_err(|errors| LoadError::Spec { path: format!("<bundled {name}>"), errors }.into())
}

const STABILITY_GRID: usize = 256;
const STABILITY_SIZES: [f64; 3] = [1e-3, 1e-4, 1e-5];

/// Random bump in log coordinates, vanishing at both ends of `[c, d]` and
/// small enough in slope to keep `G₁` inside the class of `G`.
fn random_bump(rng: &mut ChaCha8Rng, c: f64, d: f64) -> String {
    let a: f64 = rng.gen_range(0.2..1.0);
    let b: f64 = rng.gen_range(-0.5..0.5);
    let k: u32 = rng.gen_range(1..4);
    let t = format!("((log(x)-{:?})/{:?})", c.ln(), d.ln() - c.ln());
    format!("{a:?}*{t}*(1-{t})+{b:?}*sin({k}*pi*{t})/{k}")
}

fn stability_cases(file: &SpecFile, settings: &Settings, g: &Grid, seed: u64) -> Result<Vec<StabilityCase>, CliError> {
    let classes = file.classes.as_ref().expect("banach example");
    let constants = constants_for(&file.spec.exponents, classes).map_err(|e| CliError::Solver(e.to_string()))?;
    let (c, d) = (file.spec.interval.lo(), file.spec.interval.hi());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(f64, String)> = STABILITY_SIZES.iter().map(|&s| (s, random_bump(&mut rng, c, d))).collect();
    let mut coarse = settings.clone();
    coarse.grid = settings.grid.min(STABILITY_GRID);
    let base = if coarse.grid == settings.grid {
        g.clone()
    } else {
        solve_product_continuous(&file.spec, &coarse.banach(classes)).map_err(|e| CliError::Solver(e.to_string()))?.function
    };
    bumps
        .into_par_iter()
        .map(|(size, bump)| {
            let mut perturbed = file.spec.clone();
            let src = format!("({})*(1+{size:?}*({bump}))", file.spec.rhs);
            perturbed.rhs = parse(&src).map_err(|e| CliError::Solver(e.to_string()))?;
            let g1 = solve_product_continuous(&perturbed, &coarse.banach(classes)).map_err(|e| CliError::Solver(e.to_string()))?;
            let report = stability_check(&file.spec, &perturbed, &base, &g1.function, &constants, REFINE, 1e-6)
                .map_err(|e| CliError::Solver(e.to_string()))?;
            Ok(StabilityCase { size, perturbation: bump, report })
        })
        .collect()
}

/// Runs a bundled example with the method its theorem calls for.
pub fn example(name: &str, overrides: &Overrides, out: &Path, seed: u64) -> Result<RunReport, CliError> {
    let file = load_bundled(name)?;
    let settings = Settings::resolve(&file, overrides);
    let mut report = RunReport::new("example", seed);
    report.spec = Some(format!("examples/{name}.ifes"));
    report.claim = Some(
        match name {
            "exmp1" => "unique continuous solution g in G([1,e]; 1/5, 4), depending continuously on G",
            "e1" => "a solution exists in G_op^usc([0,1]; delta) with delta = 1/5",
            _ => "a solution exists in G_op([0,1]; delta) with delta = 1/10 although G is discontinuous",
        }
        .to_string(),
    );
    solve_into(&file, &settings, out, &mut report)?;
    if report.exit_code != 0 {
        return Ok(report);
    }
    let start = Instant::now();
    if let Some(summary) = &report.banach {
        let verdict = if summary.class_verdict.member { "inside" } else { "outside" };
        report.notes.push(format!("solution is {verdict} the class G(J; delta, M) on all node pairs"));
        let g = Grid::read_csv(File::open(out.join("solution.csv")).map_err(io("solution.csv"))?, EvalMode::PiecewiseLinear, None)
            .map_err(|e| CliError::Solver(e.to_string()))?;
        report.stability = stability_cases(&file, &settings, &g, seed)?;
        if report.stability.iter().any(|c| !c.report.holds) {
            report.notes.push("stability bound violated for at least one perturbation".into());
        }
    }
    if let Some(t) = &report.tarski {
        if let (Some(lo), Some(hi)) = (t.g_min(), t.g_max()) {
            report.uniqueness = uniqueness_comparable(&file.spec, lo, hi, settings.tol, settings.tol, REFINE).ok();
        }
        if t.min.iter().chain(&t.max).all(|p| p.monotone) {
            report.notes.push("solutions are monotone, hence measurable and L^p integrable on J for 1 <= p < inf".into());
        }
    }
    report.wall_clock_s += start.elapsed().as_secs_f64();
    write_report(&report, out)?;
    Ok(report)
}
