use ifes::banach::*;
use ifes::classes::check_banach_hypotheses;
use ifes::expr::parse;

mod common;

fn cfg(m: usize) -> BanachConfig<f64> {
    BanachConfig::new(m, 1e-10, 50_000, common::exmp1_class())
}

#[test]
fn exmp1_hypotheses_hold() {
    let report = check_banach_hypotheses(&common::exmp1(), &common::exmp1_class());
    assert!(report.all_passed(), "{report}");
}

#[test]
fn exmp1_converges_and_refines() {
    let spec = common::exmp1();
    let coarse = solve_product_continuous(&spec, &cfg(128)).unwrap();
    let fine = solve_product_continuous(&spec, &cfg(256)).unwrap();
    for sol in [&coarse, &fine] {
        assert!(sol.report.is_clean(), "{:?}", sol.report.class_verdict);
        assert_eq!(sol.function.values()[0], 1.0);
        assert!((sol.function.values()[sol.function.len() - 1] - common::E).abs() < 1e-12);
    }
    let (r0, r1) = (coarse.report.residual.sup, fine.report.residual.sup);
    assert!(r1 < 1e-4, "{r1}");
    assert!(r0 / r1 >= 3.0, "{r0} -> {r1}");
}

#[test]
fn exmp1_depends_continuously_on_rhs() {
    let spec = common::exmp1();
    let constants = constants_for(&spec.exponents, &common::exmp1_class()).unwrap();
    assert!((spec.interval.hi() / (spec.interval.lo() * constants.k) - 2.5 * common::E).abs() < 1e-12);
    let base = solve_product_continuous(&spec, &cfg(256)).unwrap().function;
    for (eps, bump) in [(1e-3, "log(x)*(1-log(x))"), (1e-4, "(log(x))^2*(1-log(x))"), (1e-5, "sin(pi*log(x))")] {
        let mut perturbed = spec.clone();
        perturbed.rhs = parse(&format!("sqrt(x)*exp(0.5*(log(x))^2)*(1+{eps}*{bump})")).unwrap();
        assert!(check_banach_hypotheses(&perturbed, &common::exmp1_class()).all_passed());
        let g1 = solve_product_continuous(&perturbed, &cfg(256)).unwrap();
        assert!(g1.report.is_clean());
        let rep = stability_check(&spec, &perturbed, &base, &g1.function, &constants, 4, 1e-6).unwrap();
        assert!(rep.holds, "{rep:?}");
        assert!(rep.solution_distance > 0.0 && rep.data_distance > 0.0);
    }
}
