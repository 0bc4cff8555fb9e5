//! Desk-scale acceptance run. Prints one line per criterion and exits
//! nonzero if any of them fails.

use std::f64::consts::E;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use ifes::banach::{constants_for, solve_sum, BanachConfig};
use ifes::classes::{derived_constants, in_f_class, in_g_class, ClassParams};
use ifes::conjugacy::*;
use ifes::expr::parse;
use ifes::lattice::*;
use ifes::tarski::{apply_t_raw, build_t, fixed_point_defect, residual, PathResult};
use ifes::{EvalMode, Expr, Grid, Interval, ProductSpec};
use ifes_cli::commands::{self, load_bundled, scan_file};
use ifes_cli::{Overrides, RunReport};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const SEED: u64 = 20240601;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn exact_constants() -> Outcome {
    let q = Ratio::<i64>::new;
    let class = ClassParams { delta: q(1, 5), m: q(4, 1), l: vec![q(1, 1), q(0, 1)], big_l: vec![q(1, 1), q(2, 1)] };
    let c = derived_constants(&[q(4, 5), q(1, 5)], &class).map_err(err)?;
    ensure(c.k0 == q(4, 5) && c.k1 == q(12, 5) && c.k == q(2, 5), || format!("K0 = {}, K1 = {}, K = {}", c.k0, c.k1, c.k))?;
    Ok(format!("K0 = {}, K1 = {}, K = {}", c.k0, c.k1, c.k))
}

fn run_example(name: &str, overrides: &Overrides, dir: &Path) -> Result<(RunReport, f64), String> {
    let start = Instant::now();
    let report = commands::example(name, overrides, dir, SEED).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    ensure(report.exit_code == 0, || format!("{name} exited with {}", report.exit_code))?;
    Ok((report, secs))
}

fn continuous_solve(exmp1: &RunReport, secs: f64) -> Outcome {
    let b = exmp1.banach.as_ref().ok_or("no solver summary")?;
    let res = b.residual.sup;
    ensure(b.converged && b.clamp_count == 0, || format!("converged = {}, clamps = {}", b.converged, b.clamp_count))?;
    ensure(res <= 1e-5, || format!("residual {res:.3e}"))?;
    ensure(b.class_verdict.member, || "solution outside G(J; 1/5, 4)".into())?;
    ensure(secs <= 10.0, || format!("took {secs:.1} s"))?;

    let dir = tempfile::tempdir().map_err(err)?;
    let spec_path = dir.path().join("exmp1.ifes");
    std::fs::write(&spec_path, commands::bundled("exmp1").unwrap()).map_err(err)?;
    let out = dir.path().join("fine");
    commands::solve(&spec_path, &Overrides::default(), &out, SEED).map_err(err)?;
    let checked = commands::verify(&spec_path, &out.join("solution.csv"), None, None).map_err(err)?;
    let v = checked.verify.ok_or("no verify section")?;
    ensure(v.nodes == 1025 && v.monotone && v.self_map, || format!("verify: {} nodes, monotone {}", v.nodes, v.monotone))?;
    ensure(v.class_verdict.as_ref().is_some_and(|c| c.member), || "verify rejects class membership".into())?;
    ensure((v.residual.sup - res).abs() <= 1e-12 + 1e-9 * res, || format!("verify residual {:.6e} vs solver {res:.6e}", v.residual.sup))?;

    let coarse = commands::solve(&spec_path, &Overrides { grid: Some(512), ..Overrides::default() }, &dir.path().join("coarse"), SEED)
        .map_err(err)?;
    let coarse_res = coarse.banach.ok_or("no coarse summary")?.residual.sup;
    let ratio = coarse_res / res;
    ensure(ratio >= 3.0, || format!("doubling ratio {ratio:.2}"))?;
    Ok(format!(
        "m=1024: {} iterations, residual {res:.3e} (verify {:.3e}), in class, {secs:.1} s; m=512 -> 1024 ratio {ratio:.2}",
        b.iterations, v.residual.sup
    ))
}

fn stability(exmp1: &RunReport) -> Outcome {
    ensure(exmp1.stability.len() == 3, || format!("{} perturbations", exmp1.stability.len()))?;
    let mut parts = Vec::new();
    for c in &exmp1.stability {
        let r = &c.report;
        ensure((r.factor - 2.5 * E).abs() < 1e-12, || format!("factor {}", r.factor))?;
        ensure(r.holds && r.solution_distance <= r.factor * r.data_distance + 1e-6, || {
            format!("size {:.0e}: {:.3e} > {:.4} * {:.3e}", c.size, r.solution_distance, r.factor, r.data_distance)
        })?;
        parts.push(format!("{:.0e}: {:.2e} <= {:.2e}", c.size, r.solution_distance, r.factor * r.data_distance));
    }
    Ok(format!("d/(cK) = {:.4}; {}", 2.5 * E, parts.join(", ")))
}

fn paths(report: &RunReport) -> Result<[&PathResult<f64>; 2], String> {
    let t = report.tarski.as_ref().ok_or("no order-theoretic result")?;
    Ok([t.min.as_ref().ok_or("no min path")?, t.max.as_ref().ok_or("no max path")?])
}

fn order_solve(name: &str, need_monotone: bool) -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(err)?;
    let (coarse, _) = run_example(name, &Overrides::default(), &dir.path().join("512"))?;
    let t = coarse.tarski.as_ref().ok_or("no order-theoretic result")?;
    let bound = (t.grid + 1) * t.levels;
    ensure(t.grid == 512 && t.levels == 512 && t.mode == EvalMode::StepUsc, || format!("resolution {} x {}", t.grid, t.levels))?;
    ensure(t.certified() && t.ordered == Some(true), || "bracket not certified or not ordered".into())?;
    let fine_overrides = Overrides { grid: Some(1024), levels: Some(1024), ..Overrides::default() };
    let (fine, _) = run_example(name, &fine_overrides, &dir.path().join("1024"))?;
    let mut parts = Vec::new();
    for (c, f) in paths(&coarse)?.into_iter().zip(paths(&fine)?) {
        ensure(c.sweeps <= bound, || format!("{} sweeps > {bound}", c.sweeps))?;
        ensure(c.residual.sup <= 5e-3, || format!("{} residual {:.3e}", c.path.name(), c.residual.sup))?;
        ensure(!need_monotone || (c.monotone && f.monotone), || format!("{} path not monotone", c.path.name()))?;
        let ratio = f.residual.sup / c.residual.sup;
        ensure((0.35..=0.65).contains(&ratio), || format!("{} halving ratio {ratio:.3}", c.path.name()))?;
        parts.push(format!("{} {} sweeps, residual {:.3e} -> {:.3e} (x{ratio:.2})", c.path.name(), c.sweeps, c.residual.sup, f.residual.sup));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs <= 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("certified, g_min <= g_max; {}; {secs:.2} s", parts.join("; ")))
}

/// Order-preserving self-map built in a linear extension of the pointwise
/// order: each image joins a random element with the images of earlier
/// elements below it.
fn random_monotone(lattice: &FiniteLattice<Vec<u8>>, rng: &mut impl Rng) -> Result<MonotoneMap, String> {
    let n = lattice.len();
    let mut image = vec![0usize; n];
    for x in 0..n {
        let fresh = if rng.gen_bool(0.4) { lattice.bottom() } else { rng.gen_range(0..n) };
        image[x] = (0..x).filter(|&y| lattice.leq(y, x)).fold(fresh, |acc, y| lattice.join(acc, image[y]));
    }
    MonotoneMap::verified(lattice, image).map_err(err)
}

fn lattice_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut cases = 0;
    for len in 1..=4 {
        for levels in 2..=4u8 {
            let lattice = FiniteLattice::monotone_vectors(len, levels).map_err(err)?;
            for _ in 0..12 {
                let map = random_monotone(&lattice, &mut rng)?;
                let fixed = fixed_point_set(&lattice, &map);
                let least = fixed.iter().copied().find(|&a| fixed.iter().all(|&b| lattice.leq(a, b)));
                let greatest = fixed.iter().copied().find(|&a| fixed.iter().all(|&b| lattice.leq(b, a)));
                let lo = knaster_tarski_min(&lattice, &map).map_err(err)?;
                let hi = knaster_tarski_max(&lattice, &map).map_err(err)?;
                let tag = format!("len {len}, levels {levels}, case {cases}");
                ensure(!fixed.is_empty(), || format!("{tag}: no fixed point"))?;
                ensure(Some(lo) == least && Some(hi) == greatest, || format!("{tag}: Kleene limits differ from brute force"))?;
                ensure(lo == inf_of_prefixed(&lattice, &map), || format!("{tag}: inf of prefixed points"))?;
                ensure(hi == sup_of_postfixed(&lattice, &map), || format!("{tag}: sup of postfixed points"))?;
                ensure(is_complete_lattice_in_induced_order(&lattice, &fixed).is_none(), || format!("{tag}: not complete"))?;
                ensure(is_complete_sublattice(&lattice, &fixed).is_none(), || format!("{tag}: not closed under join/meet"))?;
                cases += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(cases >= 100 && secs <= 30.0, || format!("{cases} maps in {secs:.1} s"))?;
    Ok(format!("{cases} maps, all agree with brute force, {secs:.2} s"))
}

fn no_fixed_point() -> Outcome {
    let (lattice, map) = order_reversing_counterexample();
    ensure(lattice.len() == 4 && lattice.verify().is_lattice(), || "base poset is not a 4-element lattice".into())?;
    ensure(is_order_preserving(&lattice, &map).is_some(), || "map preserves order".into())?;
    let fixed = fixed_point_set(&lattice, &map);
    ensure(fixed.is_empty(), || format!("{} fixed points", fixed.len()))?;
    Ok("order-reversing map on the diamond has no fixed point".into())
}

fn e1() -> Result<ProductSpec, String> {
    Ok(load_bundled("e1").map_err(err)?.spec)
}

fn random_step(spec: &ProductSpec, m: usize, rng: &mut impl Rng) -> Result<Grid, String> {
    let (lo, hi) = (spec.floor, spec.interval.hi());
    let mut v: Vec<f64> = (0..=m).map(|_| rng.gen_range(lo..=hi)).collect();
    v.sort_by(f64::total_cmp);
    Grid::new(spec.interval, Grid::uniform_nodes(&spec.interval, m), v, EvalMode::StepUsc, Some(lo)).map_err(err)
}

fn operator_laws() -> Outcome {
    let spec = e1()?;
    let op = build_t(&spec).map_err(err)?;
    let total = op.alphas.iter().sum::<f64>() + op.alpha;
    ensure(total == 1.0, || format!("sum of exponents {total}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pairs = 200;
    for case in 0..pairs {
        let g1 = random_step(&spec, rng.gen_range(1..40), &mut rng)?;
        let mut acc = f64::NEG_INFINITY;
        let raised = g1
            .values()
            .iter()
            .map(|&x| {
                acc = acc.max(if rng.gen_bool(0.5) { x } else { (x + rng.gen_range(0.0..0.3)).min(1.0) });
                acc
            })
            .collect();
        let g2 = g1.with_values(raised).map_err(err)?;
        let t1 = apply_t_raw(&op, &g1).map_err(err)?;
        let t2 = apply_t_raw(&op, &g2).map_err(err)?;
        for (&a, &b) in t1.iter().zip(&t2) {
            ensure((0.2..=1.0).contains(&a), || format!("pair {case}: Tg = {a} outside [0.2, 1]"))?;
            ensure(a <= b, || format!("pair {case}: Tg1 = {a} > Tg2 = {b}"))?;
        }
    }
    Ok(format!("{pairs} pairs: range, monotonicity, exponents sum to {total}"))
}

fn fixed_point_equivalence() -> Outcome {
    let spec = ProductSpec {
        interval: Interval::new(0.25, 1.0).map_err(err)?,
        exponents: vec![0.8, -0.3],
        rhs: parse("x^0.5").map_err(err)?,
        factor_maps: vec![Expr::Var, Expr::Var],
        arg_maps: vec![Expr::Var, Expr::Var],
        floor: 0.25,
    };
    let op = build_t(&spec).map_err(err)?;
    let id = Grid::from_fn(spec.interval, 48, EvalMode::StepUsc, |x| x).map_err(err)?;
    let id_defect = fixed_point_defect(&op, &id).map_err(err)?;
    let id_res = residual(&spec, &id, 1).map_err(err)?.sup;
    ensure(id_defect < 1e-15 && id_res < 1e-15, || format!("identity: defect {id_defect:e}, residual {id_res:e}"))?;
    let mut v = id.values().to_vec();
    v[20] = v[21];
    let bumped = id.with_values(v).map_err(err)?;
    let bumped_res = residual(&spec, &bumped, 1).map_err(err)?.sup;
    ensure(fixed_point_defect(&op, &bumped).map_err(err)? > 0.0 && bumped_res > 0.0, || "perturbed identity passes".into())?;

    let mut worst: f64 = 0.0;
    for name in ["e1", "ex2"] {
        let spec = load_bundled(name).map_err(err)?.spec;
        let res = ifes::tarski::solve_both(&spec, &ifes::TarskiConfig64::new(256, 256, EvalMode::StepUsc)).map_err(err)?;
        let level = (spec.interval.hi() - spec.floor) / 256.0;
        for p in paths_of(&res)? {
            ensure(p.fixed_point_defect <= level + 1e-12, || format!("{name}: defect {:e} above level {level:e}", p.fixed_point_defect))?;
            ensure(p.residual.sup <= 4.0 * level, || format!("{name}: residual {:e} above 4 levels", p.residual.sup))?;
            worst = worst.max(p.residual.sup / level);
        }
    }
    Ok(format!("identity residual {id_res:.1e}, perturbed {bumped_res:.3e}; solved residuals <= {worst:.2} levels"))
}

fn paths_of(res: &ifes::TarskiResult64) -> Result<[&PathResult<f64>; 2], String> {
    Ok([res.min.as_ref().ok_or("no min path")?, res.max.as_ref().ok_or("no max path")?])
}

fn class_facts() -> Outcome {
    let unit = Interval::new(0.0, 1.0).map_err(err)?;
    let j = Interval::new(1.0, E).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let candidates = 150;
    for case in 0..=candidates {
        let n = rng.gen_range(2..16);
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        v.sort_by(f64::total_cmp);
        v[0] = 0.0;
        v[n - 1] = 1.0;
        if case == candidates {
            v = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        }
        let f = Grid::new(unit, Grid::uniform_nodes(&unit, n - 1), v.clone(), EvalMode::PiecewiseLinear, None).map_err(err)?;
        let id_f = Grid::from_fn(unit, n - 1, EvalMode::PiecewiseLinear, |x| x).map_err(err)?;
        let is_id = f.sup_distance(&id_f).map_err(err)? < 1e-9;
        let nodes = Grid::uniform_nodes(&j, n - 1);
        let gv: Vec<f64> = v.iter().enumerate().map(|(i, t)| if i == n - 1 { E } else { 1.0 + t * (E - 1.0) }).collect();
        let g = Grid::new(j, nodes.clone(), gv, EvalMode::PiecewiseLinear, None).map_err(err)?;
        let id_g = Grid::identity(j, nodes, EvalMode::PiecewiseLinear).map_err(err)?;
        let slack = rng.gen_range(0.01..0.5);
        for (delta, m) in [(1.0, 1.0), (0.5, 1.0), (1.0, 3.0)] {
            ensure(in_f_class(&f, &unit, delta, m).member == is_id, || format!("case {case}: F({delta}, {m}) is not {{id}}"))?;
            ensure(in_f_class(&id_f, &unit, delta, m).member, || format!("F({delta}, {m}) rejects id"))?;
            let g_member = in_g_class(&g, &j, delta, m).map_err(err)?.member;
            ensure(g_member == is_id, || format!("case {case}: G({delta}, {m}) is not {{id}}"))?;
            ensure(in_g_class(&id_g, &j, delta, m).map_err(err)?.member, || format!("G({delta}, {m}) rejects id"))?;
        }
        for (delta, m) in [(0.5, 1.0 - slack), (1.0 + slack, 3.0)] {
            ensure(!in_f_class(&f, &unit, delta, m).member && !in_f_class(&id_f, &unit, delta, m).member, || {
                format!("case {case}: F({delta}, {m}) is not empty")
            })?;
            ensure(
                !in_g_class(&g, &j, delta, m).map_err(err)?.member && !in_g_class(&id_g, &j, delta, m).map_err(err)?.member,
                || format!("case {case}: G({delta}, {m}) is not empty"),
            )?;
        }
    }
    Ok(format!("{} candidates plus id: M = 1 or delta = 1 leaves {{id}}, M < 1 or delta > 1 leaves nothing", candidates))
}

fn conjugacy() -> Outcome {
    let exmp1 = load_bundled("exmp1").map_err(err)?;
    let spec = exmp1.spec;
    let sum = log_conjugate_spec(&spec).map_err(err)?;
    ensure(exp_conjugate_spec(&sum, spec.floor).map_err(err)? == spec, || "log/exp spec round trip".into())?;

    let j = spec.interval;
    let g = Grid::from_fn(j, 64, EvalMode::PiecewiseLinear, |x| x.ln().powi(2).exp()).map_err(err)?;
    let back = exp_conjugate_function(&log_conjugate_function(&g).map_err(err)?).map_err(err)?;
    let drift = back.values().iter().zip(g.values()).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
    ensure(drift <= 1e-14, || format!("log/exp function round trip drift {drift:e}"))?;

    let u = Interval::new(-1.0, 2.0).map_err(err)?;
    let f = Grid::from_fn(u, 30, EvalMode::StepUsc, |x| (x + 1.0) * (x + 1.0) / 3.0 - 1.0).map_err(err)?;
    ensure(reflect_function(&reflect_function(&f).map_err(err)?).map_err(err)? == f, || "reflect function round trip".into())?;
    let spec3 = ProductSpec {
        interval: Interval::new(1.0, 3.0).map_err(err)?,
        exponents: vec![2.0, -1.0, 2.0],
        rhs: parse("x^3/9").map_err(err)?,
        factor_maps: vec![parse("x").map_err(err)?, parse("x^3").map_err(err)?, parse("x/2").map_err(err)?],
        arg_maps: vec![Expr::Var, Expr::Var, Expr::Var],
        floor: 1.0,
    };
    let twice = reflect_spec(&reflect_spec(&spec3).map_err(err)?.spec).map_err(err)?.spec;
    ensure(
        twice.rhs == spec3.rhs && twice.factor_maps == spec3.factor_maps && twice.interval == spec3.interval,
        || "reflect spec round trip".into(),
    )?;

    let classes = exmp1.classes.ok_or("exmp1 has no class section")?;
    let f = solve_sum(&sum, &BanachConfig::new(256, 1e-10, 10_000, classes)).map_err(err)?.function;
    let g = exp_conjugate_function(&f).map_err(err)?;
    let prod_res = spec.residual(&g, 4).map_err(err)?.sup;
    let sum_res = sum.residual(&log_conjugate_function(&g).map_err(err)?, 4).map_err(err)?.sup;
    let c = spec.interval.lo();
    ensure(prod_res < 1e-4 && sum_res <= prod_res / c + 1e-9, || format!("sum residual {sum_res:e}, product residual {prod_res:e}"))?;
    Ok(format!("round trips exact; transported solution: sum residual {sum_res:.3e} <= product residual {prod_res:.3e} / c"))
}

fn region_scan() -> Outcome {
    let file = load_bundled("exmp1").map_err(err)?;
    let step = 0.01;
    let table = scan_file(&file, "lambda.1", "0.5:0.9:41").map_err(err)?;
    let k_col = table.column("K").ok_or("no K column")?;
    let parse_cell = |s: &str| s.parse::<f64>().map_err(err);
    let rows = table.rows.iter().map(|r| Ok((parse_cell(&r[0])?, parse_cell(&r[k_col])?))).collect::<Result<Vec<_>, String>>()?;
    let flips: Vec<_> = rows.windows(2).filter(|w| (w[0].1 > 0.0) != (w[1].1 > 0.0)).collect();
    ensure(flips.len() == 1, || format!("{} sign changes", flips.len()))?;
    let (a, b) = (flips[0][0].0, flips[0][1].0);
    let root = 2.0 / 3.0;
    ensure((a - root).abs() <= step + 1e-12 && (b - root).abs() <= step + 1e-12, || format!("K changes sign on [{a}, {b}]"))?;
    // exact root from the constants, as a cross-check on the table
    let class = file.classes.ok_or("exmp1 has no class section")?;
    let k_root = constants_for(&[root, 1.0 - root], &class).map_err(err)?.k;
    ensure(k_root.abs() < 1e-12, || format!("K(2/3) = {k_root:e}"))?;
    Ok(format!("K changes sign between lambda1 = {a} and {b}, root 2/3"))
}

fn main() -> ExitCode {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => {
            eprintln!("temp dir: {e}");
            return ExitCode::FAILURE;
        }
    };
    let exmp1 = run_example("exmp1", &Overrides::default(), dir.path());
    let from_exmp1 = |f: fn(&RunReport, f64) -> Outcome| match &exmp1 {
        Ok((r, secs)) => f(r, *secs),
        Err(e) => Err(e.clone()),
    };

    let results: Vec<Outcome> = vec![
        exact_constants(),
        from_exmp1(continuous_solve),
        from_exmp1(|r, _| stability(r)),
        order_solve("e1", false),
        order_solve("ex2", true),
        lattice_oracle(),
        no_fixed_point(),
        operator_laws(),
        fixed_point_equivalence(),
        class_facts(),
        conjugacy(),
        region_scan(),
    ];
    let mut failed = 0;
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok(detail) => println!("criterion {:>2}: PASS  {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
