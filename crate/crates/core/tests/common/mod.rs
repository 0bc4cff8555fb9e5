#![allow(dead_code)]

use ifes::classes::ClassParams;
use ifes::expr::parse;
use ifes::{Expr, ProductSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const E: f64 = std::f64::consts::E;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn exmp1() -> ProductSpec {
    ProductSpec {
        interval: ifes::Interval::new(1.0, E).unwrap(),
        exponents: vec![0.8, 0.2],
        rhs: parse("sqrt(x)*exp(0.5*(log(x))^2)").unwrap(),
        factor_maps: vec![Expr::Var, parse("exp((log(x))^2)").unwrap()],
        arg_maps: vec![Expr::Var, Expr::Var],
        floor: 1.0,
    }
}

pub fn exmp1_class() -> ClassParams<f64> {
    ClassParams { delta: 0.2, m: 4.0, l: vec![1.0, 0.0], big_l: vec![1.0, 2.0] }
}

pub fn e1() -> ProductSpec {
    ProductSpec {
        interval: ifes::Interval::new(0.0, 1.0).unwrap(),
        exponents: vec![0.8, -0.3],
        rhs: parse("(x^2+1)/2").unwrap(),
        factor_maps: vec![Expr::Var, parse("(x^4+1)/3").unwrap()],
        arg_maps: vec![Expr::Var, parse("x^3").unwrap()],
        floor: 0.2,
    }
}

pub fn ex2() -> ProductSpec {
    ProductSpec {
        interval: ifes::Interval::new(0.0, 1.0).unwrap(),
        exponents: vec![0.6, -0.1],
        rhs: parse("if(x < 0.5, (x^4+1)/3, (x^3+1)/2)").unwrap(),
        factor_maps: vec![Expr::Var, parse("(x^4+2)/7").unwrap()],
        arg_maps: vec![Expr::Var, parse("sin(pi*x/2)").unwrap()],
        floor: 0.1,
    }
}

/// `g^0.8 (g∘g)^-0.3 = x^0.5` on `[1/4, 1]`, solved by the identity.
pub fn identity_instance() -> ProductSpec {
    ProductSpec {
        interval: ifes::Interval::new(0.25, 1.0).unwrap(),
        exponents: vec![0.8, -0.3],
        rhs: parse("x^0.5").unwrap(),
        factor_maps: vec![Expr::Var, Expr::Var],
        arg_maps: vec![Expr::Var, Expr::Var],
        floor: 0.25,
    }
}
