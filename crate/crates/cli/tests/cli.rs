use std::path::{Path, PathBuf};
use std::process::Command;

use ifes_cli::commands::{self, bundled, load_bundled, parse_range, scan_file, ConjugateKind};
use ifes_cli::specfile::SpecFile;
use ifes_cli::Overrides;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ifes"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

const IDENTITY: &str = "[equation]\nn = 2\nlambda = [0.8, -0.3]\ninterval = [0.25, 1]\ndelta = 0.25\nG = \"x^0.5\"\nXi.1 = \"x\"\nXi.2 = \"x\"\npsi.1 = \"x\"\npsi.2 = \"x\"\n";

#[test]
fn bundled_specs_load() {
    let exmp1 = load_bundled("exmp1").unwrap();
    assert_eq!(exmp1.spec.interval.lo(), 1.0);
    assert_eq!(exmp1.spec.interval.hi(), std::f64::consts::E);
    assert_eq!(exmp1.spec.exponents, vec![0.8, 0.2]);
    assert!(exmp1.classes.is_some());

    let e1 = load_bundled("e1").unwrap();
    assert_eq!(e1.spec.exponents, vec![0.8, -0.3]);
    assert_eq!(e1.spec.floor, 0.2);
    assert_eq!(e1.spec.arg_maps[1], ifes::expr::parse("x^3").unwrap());

    let ex2 = load_bundled("ex2").unwrap();
    assert_eq!(ex2.spec.floor, 0.1);
    assert!(load_bundled("nope").is_err());
}

#[test]
fn bundled_specs_render_round_trip() {
    for name in commands::EXAMPLES {
        let f = load_bundled(name).unwrap();
        assert_eq!(SpecFile::parse(&f.render()).unwrap(), f, "{name}");
    }
}

#[test]
fn missing_key_exits_with_parse_code() {
    let dir = TempDir::new().unwrap();
    let text = bundled("e1").unwrap().replace("Xi.2 = \"(x^4+1)/3\"\n", "");
    let spec = write(dir.path(), "bad.ifes", &text);
    let (code, _, err) = run(&["check", "--spec", spec.to_str().unwrap()]);
    assert_eq!(code, 4);
    assert!(err.contains("missing key `Xi.2`"), "{err}");
}

#[test]
fn missing_file_exits_with_io_code() {
    let (code, _, _) = run(&["check", "--spec", "/nonexistent/spec.ifes"]);
    assert_eq!(code, 4);
    let (code, _, _) = run(&["solve", "--no-such-flag"]);
    assert_eq!(code, 4);
}

#[test]
fn check_exit_codes() {
    let dir = TempDir::new().unwrap();
    let good = write(dir.path(), "e1.ifes", bundled("e1").unwrap());
    let (code, out, _) = run(&["check", "--spec", good.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("G(c)^(1/lambda) = 0.25 vs delta = 0.2"), "{out}");

    let bad = write(dir.path(), "e1_bad.ifes", &bundled("e1").unwrap().replace("delta = 0.2", "delta = 0.3"));
    let (code, out, _) = run(&["check", "--spec", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(out.contains("[FAIL] G(c) >= delta^lambda"), "{out}");

    let exmp1 = write(dir.path(), "exmp1.ifes", bundled("exmp1").unwrap());
    let (code, out, _) = run(&["check", "--spec", exmp1.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("K = 0.4"), "{out}");
}

#[test]
fn solve_hypothesis_failure_and_non_convergence() {
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.ifes", &bundled("e1").unwrap().replace("delta = 0.2", "delta = 0.3"));
    let out = dir.path().join("bad");
    let (code, _, _) = run(&["solve", "--spec", bad.to_str().unwrap(), "--grid", "16", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(out.join("report.json").exists());

    let exmp1 = write(dir.path(), "exmp1.ifes", bundled("exmp1").unwrap());
    let out = dir.path().join("slow");
    let (code, _, _) =
        run(&["solve", "--spec", exmp1.to_str().unwrap(), "--grid", "64", "--max-iter", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 3);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["banach"]["converged"], false);
    assert_eq!(report["exit_code"], 3);
}

#[test]
fn solve_is_deterministic_and_verifiable() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "e1.ifes", bundled("e1").unwrap());
    let spec_s = spec.to_str().unwrap();
    let mut tables = Vec::new();
    for run_dir in ["a", "b"] {
        let out = dir.path().join(run_dir);
        let (code, stdout, err) = run(&["solve", "--spec", spec_s, "--grid", "64", "--levels", "64", "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{stdout}{err}");
        tables.push((std::fs::read(out.join("solution_min.csv")).unwrap(), std::fs::read(out.join("solution_max.csv")).unwrap()));
    }
    assert_eq!(tables[0], tables[1]);

    let out = dir.path().join("a");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let claimed = report["tarski"]["min"]["residual"]["sup"].as_f64().unwrap();
    let v = commands::verify(&spec, &out.join("solution_min.csv"), None, None).unwrap();
    let v = v.verify.unwrap();
    assert_eq!(v.residual.sup, claimed);
    assert!(v.monotone && v.self_map && v.above_floor);
}

#[test]
fn verify_identity_and_tampered_tables() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "id.ifes", IDENTITY);
    let mut csv = String::from("x,g\n");
    for i in 0..=48 {
        let x = 0.25 + 0.75 * i as f64 / 48.0;
        csv += &format!("{x:?},{x:?}\n");
    }
    let good = write(dir.path(), "id.csv", &csv);
    let (code, out, _) = run(&["verify", "--spec", spec.to_str().unwrap(), "--solution", good.to_str().unwrap(), "--mode", "pl"]);
    assert_eq!(code, 0);
    assert!(out.contains("monotone=true"), "{out}");
    let clean = commands::verify(&spec, &good, Some(ifes::EvalMode::PiecewiseLinear), None).unwrap().verify.unwrap();
    assert!(clean.residual.sup < 1e-14, "{:?}", clean.residual);

    let mut lines: Vec<String> = csv.lines().map(String::from).collect();
    let row = 20 + 1;
    let (x, g) = lines[row].split_once(',').map(|(a, b)| (a.to_string(), b.parse::<f64>().unwrap())).unwrap();
    lines[row] = format!("{x},{:?}", g + 0.1);
    let bad = write(dir.path(), "tampered.csv", &(lines.join("\n") + "\n"));
    let tampered = commands::verify(&spec, &bad, Some(ifes::EvalMode::PiecewiseLinear), None).unwrap().verify.unwrap();
    assert!(tampered.residual.sup > 0.01, "{:?}", tampered.residual);
    assert!(!tampered.monotone);
}

#[test]
fn verify_rejects_grid_mismatch() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "id.ifes", IDENTITY);
    let table = write(dir.path(), "short.csv", "x,g\n0.25,0.25\n0.5,0.5\n");
    let err = commands::verify(&spec, &table, None, None).unwrap_err();
    assert!(err.to_string().contains("grid mismatch"), "{err}");
}

#[test]
fn lambda_scan_finds_sign_change_of_k() {
    let file = load_bundled("exmp1").unwrap();
    let table = scan_file(&file, "lambda.1", "0.5:0.95:10").unwrap();
    assert_eq!(table.rows.len(), 10);
    let (p, k) = (table.column("lambda.1").unwrap(), table.column("K").unwrap());
    let vals: Vec<(f64, f64)> = table.rows.iter().map(|r| (r[p].parse().unwrap(), r[k].parse().unwrap())).collect();
    let flip = vals.windows(2).position(|w| w[0].1 < 0.0 && w[1].1 > 0.0).unwrap();
    assert!(vals[flip].0 <= 2.0 / 3.0 && 2.0 / 3.0 <= vals[flip + 1].0);
    assert_eq!(vals[3].0, 0.65);
    let flag = table.column("banach: K > 0").unwrap();
    assert_eq!(table.rows[flip][flag], "0");
    assert_eq!(table.rows[flip + 1][flag], "1");
}

#[test]
fn delta_scan_flips_endpoint_condition() {
    let file = load_bundled("e1").unwrap();
    let table = scan_file(&file, "delta", "0.05:0.95:19").unwrap();
    let col = table.column("tarski: G(c) >= delta^lambda").unwrap();
    let p = table.column("delta").unwrap();
    for r in &table.rows {
        let d: f64 = r[p].parse().unwrap();
        assert_eq!(r[col] == "1", d <= 0.25 + 1e-12, "delta = {d}");
    }
}

#[test]
fn scan_edge_cases() {
    let file = load_bundled("exmp1").unwrap();
    let empty = scan_file(&file, "M", "1:5:0").unwrap();
    assert!(empty.rows.is_empty());
    assert_eq!(empty.to_csv().lines().count(), 1);
    assert!(parse_range("1:2").is_err());
    assert!(parse_range("2:1:3").is_err());
    assert!(scan_file(&file, "lambda.3", "0:1:2").is_err());
    assert!(scan_file(&load_bundled("e1").unwrap(), "M", "1:2:2").is_err());

    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "exmp1.ifes", bundled("exmp1").unwrap());
    let (code, _, _) = run(&["scan", "--spec", spec.to_str().unwrap(), "--param", "M", "--range", "x:y:z", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 4);
    let (code, _, _) = run(&["scan", "--spec", spec.to_str().unwrap(), "--param", "M", "--range", "2:6:5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(dir.path().join("scan.csv")).unwrap().lines().count(), 6);
}

#[test]
fn conjugate_outputs() {
    let dir = TempDir::new().unwrap();
    let exmp1 = write(dir.path(), "exmp1.ifes", bundled("exmp1").unwrap());
    let text = commands::conjugate(&exmp1, ConjugateKind::Log).unwrap();
    assert!(text.contains("Upsilon.2 = \"x^2\""), "{text}");
    assert!(text.contains("interval = [0.0, 1.0]"), "{text}");

    let reflected = commands::conjugate(&exmp1, ConjugateKind::Reflect).unwrap();
    assert!(reflected.contains("solutions correspond: false"));
    let body: String = reflected.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let back = SpecFile::parse(&body).unwrap();
    assert_eq!(back.spec.interval.lo(), -std::f64::consts::E);

    let e1 = write(dir.path(), "e1.ifes", bundled("e1").unwrap());
    let (code, _, err) = run(&["conjugate", "--spec", e1.to_str().unwrap()]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn example_runs_small() {
    let dir = TempDir::new().unwrap();
    let overrides = Overrides { grid: Some(64), levels: Some(64), ..Overrides::default() };
    for name in ["e1", "ex2"] {
        let r = commands::example(name, &overrides, &dir.path().join(name), 1).unwrap();
        assert_eq!(r.exit_code, 0);
        assert!(r.claim.is_some());
        assert!(r.notes.iter().any(|n| n.contains("L^p")));
        assert!(r.tarski.as_ref().unwrap().certified());
    }
    let r = commands::example("exmp1", &Overrides { grid: Some(64), ..Overrides::default() }, &dir.path().join("exmp1"), 1).unwrap();
    assert_eq!(r.exit_code, 0);
    assert_eq!(r.stability.len(), 3);
    assert!(r.stability.iter().all(|c| c.report.holds));
}
