//! Reader and writer for `.ifes` equation files.
//!
//! ```text
//! file     = { line } ;
//! line     = blank | comment | section | entry ;
//! comment  = "#" , { any } ;
//! section  = "[" , ( "equation" | "classes" | "solver" ) , "]" ;
//! entry    = key , "=" , value , [ comment ] ;
//! value    = string | list | bare ;
//! string   = '"' , { any - '"' } , '"' ;          (an expression in x)
//! list     = "[" , [ bare , { "," , bare } ] , "]" ;
//! bare     = constant expression or word, e.g. 0.2, 1/5, e, usc ;
//! ```
//!
//! `[equation]` keys: `n`, `lambda`, `interval`, `delta`, `G`, `Xi.k`, `psi.k`
//! (k = 1..n). `[classes]` keys: `delta`, `M`, `l`, `L`. `[solver]` keys:
//! `method`, `grid`, `levels`, `mode`, `tol`, `max_iter`. Only `[equation]` is
//! required.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ifes::classes::ClassParams;
use ifes::expr::parse;
use ifes::{EvalMode, Expr, Interval, ProductSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Banach,
    TarskiMin,
    TarskiMax,
    TarskiBoth,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Banach => "banach",
            Method::TarskiMin => "tarski-min",
            Method::TarskiMax => "tarski-max",
            Method::TarskiBoth => "tarski-both",
        }
    }

    pub fn is_tarski(self) -> bool {
        self != Method::Banach
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "banach" => Ok(Method::Banach),
            "tarski-min" => Ok(Method::TarskiMin),
            "tarski-max" => Ok(Method::TarskiMax),
            "tarski-both" => Ok(Method::TarskiBoth),
            _ => Err(format!("unknown method `{s}` (banach, tarski-min, tarski-max, tarski-both)")),
        }
    }
}

pub fn parse_mode(s: &str) -> Result<EvalMode, String> {
    match s {
        "pl" => Ok(EvalMode::PiecewiseLinear),
        "usc" => Ok(EvalMode::StepUsc),
        "lsc" => Ok(EvalMode::StepLsc),
        _ => Err(format!("unknown mode `{s}` (pl, usc, lsc)")),
    }
}

pub fn mode_name(mode: EvalMode) -> &'static str {
    match mode {
        EvalMode::PiecewiseLinear => "pl",
        EvalMode::StepUsc => "usc",
        EvalMode::StepLsc => "lsc",
    }
}

/// Solver settings; every field may be overridden from the command line.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct SolverSection {
    pub method: Option<Method>,
    pub grid: Option<usize>,
    pub levels: Option<usize>,
    pub mode: Option<EvalMode>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpecFile {
    pub spec: ProductSpec,
    pub classes: Option<ClassParams<f64>>,
    pub solver: SolverSection,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// All problems found in a file, in line order.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct SpecErrors(pub Vec<Issue>);

impl fmt::Display for SpecErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum Value {
    Str(String),
    List(Vec<String>),
    Bare(String),
}

#[derive(Clone, Debug)]
struct Entry {
    line: usize,
    value: Value,
}

const SECTIONS: [&str; 3] = ["equation", "classes", "solver"];

struct Reader {
    sections: BTreeMap<&'static str, BTreeMap<String, Entry>>,
    seen: Vec<&'static str>,
    issues: Vec<Issue>,
}

impl Reader {
    fn issue(&mut self, line: Option<usize>, message: impl Into<String>) {
        self.issues.push(Issue { line, message: message.into() });
    }

    fn scan(&mut self, text: &str) {
        let mut current: Option<&'static str> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                match SECTIONS.iter().find(|s| **s == name.trim()) {
                    Some(s) if self.seen.contains(s) => self.issue(Some(line), format!("section [{s}] repeated")),
                    Some(s) => {
                        self.seen.push(s);
                        current = Some(s);
                    }
                    None => self.issue(Some(line), format!("unknown section [{}]", name.trim())),
                }
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                self.issue(Some(line), "expected `key = value`");
                continue;
            };
            let key = key.trim().to_string();
            let Some(section) = current else {
                self.issue(Some(line), format!("`{key}` appears before any section"));
                continue;
            };
            let value = match split_value(value.trim()) {
                Ok(v) => v,
                Err(e) => {
                    self.issue(Some(line), format!("{key}: {e}"));
                    continue;
                }
            };
            let table = self.sections.entry(section).or_default();
            if let Some(prev) = table.get(&key) {
                let msg = format!("`{key}` repeated (first on line {})", prev.line);
                self.issue(Some(line), msg);
                continue;
            }
            table.insert(key, Entry { line, value });
        }
    }

    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        self.sections.get_mut(section).and_then(|t| t.remove(key))
    }

    fn required(&mut self, section: &str, key: &str) -> Option<Entry> {
        let e = self.take(section, key);
        if e.is_none() {
            self.issue(None, format!("[{section}] missing key `{key}`"));
        }
        e
    }

    fn number(&mut self, key: &str, entry: &Entry) -> Option<f64> {
        let text = match &entry.value {
            Value::Bare(s) => s.clone(),
            _ => {
                self.issue(Some(entry.line), format!("{key}: expected a number"));
                return None;
            }
        };
        self.constant(key, entry.line, &text)
    }

    fn constant(&mut self, key: &str, line: usize, text: &str) -> Option<f64> {
        match constant_value(text) {
            Ok(v) => Some(v),
            Err(e) => {
                self.issue(Some(line), format!("{key}: {e}"));
                None
            }
        }
    }

    fn count(&mut self, key: &str, entry: &Entry) -> Option<usize> {
        let v = self.number(key, entry)?;
        if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
            Some(v as usize)
        } else {
            self.issue(Some(entry.line), format!("{key}: expected a non-negative integer, got {v}"));
            None
        }
    }

    fn list(&mut self, key: &str, entry: &Entry) -> Option<Vec<f64>> {
        let Value::List(items) = &entry.value else {
            self.issue(Some(entry.line), format!("{key}: expected a list `[a, b, ...]`"));
            return None;
        };
        let items = items.clone();
        let vals: Vec<Option<f64>> = items.iter().map(|s| self.constant(key, entry.line, s)).collect();
        vals.into_iter().collect()
    }

    fn expr(&mut self, key: &str, entry: &Entry) -> Option<Expr> {
        let Value::Str(src) = &entry.value else {
            self.issue(Some(entry.line), format!("{key}: expressions must be in double quotes"));
            return None;
        };
        match parse(src) {
            Ok(e) => Some(e),
            Err(e) => {
                self.issue(Some(entry.line), format!("{key}: {e}"));
                None
            }
        }
    }

    fn word(&mut self, key: &str, entry: &Entry) -> Option<String> {
        match &entry.value {
            Value::Bare(s) | Value::Str(s) => Some(s.clone()),
            Value::List(_) => {
                self.issue(Some(entry.line), format!("{key}: expected a word"));
                None
            }
        }
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn split_value(v: &str) -> Result<Value, String> {
    if let Some(rest) = v.strip_prefix('"') {
        return match rest.strip_suffix('"') {
            Some(inner) if !inner.contains('"') => Ok(Value::Str(inner.to_string())),
            _ => Err("unterminated or malformed string".into()),
        };
    }
    if let Some(rest) = v.strip_prefix('[') {
        let inner = rest.strip_suffix(']').ok_or("unterminated list")?;
        if inner.trim().is_empty() {
            return Ok(Value::List(Vec::new()));
        }
        let items: Vec<String> = inner.split(',').map(|s| s.trim().to_string()).collect();
        if items.iter().any(|s| s.is_empty()) {
            return Err("empty list item".into());
        }
        return Ok(Value::List(items));
    }
    if v.is_empty() {
        return Err("missing value".into());
    }
    Ok(Value::Bare(v.to_string()))
}

/// Evaluates a constant expression such as `0.2`, `1/5` or `e`.
pub fn constant_value(text: &str) -> Result<f64, String> {
    let e = parse(text).map_err(|e| format!("`{text}`: {e}"))?;
    if !e.is_constant() {
        return Err(format!("`{text}` is not a constant"));
    }
    let v = e.eval(0.0f64).map_err(|e| format!("`{text}`: {e}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{text}` is not finite"))
    }
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self, SpecErrors> {
        let mut r = Reader { sections: BTreeMap::new(), seen: Vec::new(), issues: Vec::new() };
        r.scan(text);
        if !r.seen.contains(&"equation") {
            r.issue(None, "missing section [equation]");
            return Err(SpecErrors(r.issues));
        }

        let n = r.required("equation", "n").and_then(|e| r.count("n", &e));
        if n == Some(0) {
            r.issue(None, "n must be at least 1");
        }
        let lambda = r.required("equation", "lambda").and_then(|e| {
            let v = r.list("lambda", &e)?;
            if let Some(n) = n.filter(|&n| n != v.len()) {
                r.issue(Some(e.line), format!("lambda has {} entries, n = {n}", v.len()));
            }
            Some(v)
        });
        let interval = r.required("equation", "interval").and_then(|e| {
            let v = r.list("interval", &e)?;
            match v[..] {
                [lo, hi] if lo < hi => Some(Interval::new(lo, hi).expect("ordered")),
                [_, _] => {
                    r.issue(Some(e.line), "interval: need lo < hi");
                    None
                }
                _ => {
                    r.issue(Some(e.line), "interval: expected `[lo, hi]`");
                    None
                }
            }
        });
        let floor = r.take("equation", "delta").and_then(|e| r.number("delta", &e));
        let rhs = r.required("equation", "G").and_then(|e| r.expr("G", &e));
        let mut xi = Vec::new();
        let mut psi = Vec::new();
        for k in 1..=n.unwrap_or(0) {
            for (name, out) in [("Xi", &mut xi), ("psi", &mut psi)] {
                let key = format!("{name}.{k}");
                out.push(r.required("equation", &key).and_then(|e| r.expr(&key, &e)));
            }
        }

        let classes = if r.seen.contains(&"classes") {
            let delta = r.required("classes", "delta").and_then(|e| r.number("delta", &e));
            let m = r.required("classes", "M").and_then(|e| r.number("M", &e));
            let l = r.required("classes", "l").and_then(|e| r.list("l", &e));
            let big_l = r.required("classes", "L").and_then(|e| r.list("L", &e));
            for (key, v) in [("l", &l), ("L", &big_l)] {
                if let (Some(v), Some(n)) = (v, n) {
                    if v.len() != n {
                        r.issue(None, format!("[classes] {key} has {} entries, n = {n}", v.len()));
                    }
                }
            }
            match (delta, m, l, big_l) {
                (Some(delta), Some(m), Some(l), Some(big_l)) => Some(ClassParams { delta, m, l, big_l }),
                _ => None,
            }
        } else {
            None
        };

        let mut solver = SolverSection::default();
        if let Some(e) = r.take("solver", "method") {
            if let Some(w) = r.word("method", &e) {
                match w.parse() {
                    Ok(m) => solver.method = Some(m),
                    Err(msg) => r.issue(Some(e.line), msg),
                }
            }
        }
        if let Some(e) = r.take("solver", "mode") {
            if let Some(w) = r.word("mode", &e) {
                match parse_mode(&w) {
                    Ok(m) => solver.mode = Some(m),
                    Err(msg) => r.issue(Some(e.line), msg),
                }
            }
        }
        solver.grid = r.take("solver", "grid").and_then(|e| r.count("grid", &e));
        solver.levels = r.take("solver", "levels").and_then(|e| r.count("levels", &e));
        solver.tol = r.take("solver", "tol").and_then(|e| r.number("tol", &e));
        solver.max_iter = r.take("solver", "max_iter").and_then(|e| r.count("max_iter", &e));

        let leftovers: Vec<(String, String, usize)> = r
            .sections
            .iter()
            .flat_map(|(s, t)| t.iter().map(move |(k, e)| (s.to_string(), k.clone(), e.line)))
            .collect();
        for (s, k, line) in leftovers {
            r.issue(Some(line), format!("unknown key `{k}` in [{s}]"));
        }

        let built = match (n, lambda, interval, rhs) {
            (Some(_), Some(exponents), Some(interval), Some(rhs)) if r.issues.is_empty() => {
                let factor_maps: Vec<Expr> = xi.into_iter().map(|e| e.expect("checked")).collect();
                let arg_maps: Vec<Expr> = psi.into_iter().map(|e| e.expect("checked")).collect();
                let spec = ProductSpec { interval, exponents, rhs, factor_maps, arg_maps, floor: floor.unwrap_or(interval.lo()) };
                if let Err(e) = spec.validate() {
                    r.issue(None, e.to_string());
                }
                Some(spec)
            }
            _ => None,
        };
        if let (Some(Method::Banach), None) = (solver.method, &classes) {
            r.issue(None, "method banach needs a [classes] section (delta, M, l, L)");
        }
        if let (Some(m), Some(spec)) = (solver.method, &built) {
            if m == Method::Banach && spec.interval.lo() <= 0.0 {
                r.issue(None, "method banach needs an interval inside (0, inf)");
            }
            if m.is_tarski() && floor.is_none() {
                r.issue(None, format!("method {} needs `delta` in [equation]", m.name()));
            }
        }
        r.issues.sort_by_key(|i| i.line.unwrap_or(usize::MAX));
        match built {
            Some(spec) if r.issues.is_empty() => Ok(SpecFile { spec, classes, solver }),
            _ => Err(SpecErrors(r.issues)),
        }
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text).map_err(|errors| LoadError::Spec { path: path.display().to_string(), errors })
    }

    /// Renders the file back in `.ifes` syntax; `parse(render(s)) == s`.
    pub fn render(&self) -> String {
        let s = &self.spec;
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let mut out = String::from("[equation]\n");
        out += &format!("n = {}\n", s.n());
        out += &format!("lambda = [{}]\n", list(&s.exponents));
        out += &format!("interval = [{:?}, {:?}]\n", s.interval.lo(), s.interval.hi());
        out += &format!("delta = {:?}\n", s.floor);
        out += &format!("G = \"{}\"\n", s.rhs);
        for k in 0..s.n() {
            out += &format!("Xi.{} = \"{}\"\n", k + 1, s.factor_maps[k]);
        }
        for k in 0..s.n() {
            out += &format!("psi.{} = \"{}\"\n", k + 1, s.arg_maps[k]);
        }
        if let Some(c) = &self.classes {
            out += "\n[classes]\n";
            out += &format!("delta = {:?}\nM = {:?}\nl = [{}]\nL = [{}]\n", c.delta, c.m, list(&c.l), list(&c.big_l));
        }
        let v = &self.solver;
        if *v != SolverSection::default() {
            out += "\n[solver]\n";
            if let Some(m) = v.method {
                out += &format!("method = {}\n", m.name());
            }
            if let Some(g) = v.grid {
                out += &format!("grid = {g}\n");
            }
            if let Some(p) = v.levels {
                out += &format!("levels = {p}\n");
            }
            if let Some(m) = v.mode {
                out += &format!("mode = {}\n", mode_name(m));
            }
            if let Some(t) = v.tol {
                out += &format!("tol = {t:?}\n");
            }
            if let Some(n) = v.max_iter {
                out += &format!("max_iter = {n}\n");
            }
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:\n{errors}")]
    Spec { path: String, errors: SpecErrors },
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[equation]\nn = 1\nlambda = [1]\ninterval = [0, 1]\nG = \"x\"\nXi.1 = \"x\"\npsi.1 = \"x\"\n";

    #[test]
    fn minimal_file() {
        let f = SpecFile::parse(MINIMAL).unwrap();
        assert_eq!(f.spec.n(), 1);
        assert_eq!(f.spec.floor, 0.0);
        assert!(f.classes.is_none());
        assert_eq!(f.solver, SolverSection::default());
    }

    #[test]
    fn constants_and_comments() {
        let text = "# header\n[equation]\nn = 1 # one term\nlambda = [1/2]\ninterval = [1, e]\ndelta = 1\nG = \"x^0.5\" # trailing\nXi.1 = \"x\"\npsi.1 = \"x\"\n";
        let f = SpecFile::parse(text).unwrap();
        assert_eq!(f.spec.exponents, vec![0.5]);
        assert_eq!(f.spec.interval.hi(), std::f64::consts::E);
    }

    #[test]
    fn missing_key_is_named() {
        let text = MINIMAL.replace("Xi.1 = \"x\"\n", "");
        let err = SpecFile::parse(&text).unwrap_err();
        assert!(err.to_string().contains("missing key `Xi.1`"), "{err}");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = MINIMAL.replace("G = \"x\"", "G = \"x +\"").replace("n = 1", "n = 1\nbogus = 3");
        let err = SpecFile::parse(&text).unwrap_err();
        let lines: Vec<Option<usize>> = err.0.iter().map(|i| i.line).collect();
        assert_eq!(lines, vec![Some(3), Some(6)], "{err}");
    }

    #[test]
    fn unquoted_expression_rejected() {
        let err = SpecFile::parse(&MINIMAL.replace("G = \"x\"", "G = x")).unwrap_err();
        assert!(err.to_string().contains("double quotes"));
    }

    #[test]
    fn banach_without_classes_rejected() {
        let text = format!("{MINIMAL}[solver]\nmethod = banach\n");
        let err = SpecFile::parse(&text).unwrap_err();
        assert!(err.to_string().contains("[classes]"), "{err}");
    }

    #[test]
    fn render_round_trips() {
        let text = format!("{MINIMAL}[classes]\ndelta = 0.5\nM = 2\nl = [1]\nL = [1]\n[solver]\nmethod = tarski-both\ngrid = 8\nmode = lsc\ntol = 1e-3\n");
        let text = text.replace("interval = [0, 1]", "interval = [0, 1]\ndelta = 0.25");
        let f = SpecFile::parse(&text).unwrap();
        assert_eq!(SpecFile::parse(&f.render()).unwrap(), f);
    }
}
