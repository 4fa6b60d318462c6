//! Reference instances used throughout the test suites and examples.

use crate::expr::Expr;
use crate::model::MpscInstance;
use crate::prelude::*;

fn names2() -> Vec<String> {
    vec!["z1".to_string(), "z2".to_string()]
}

/// `min z1 + z2^2  s.t.  -z1 + z2 <= 0,  z1 * z2 = 0`.
///
/// The origin is M- but not S-stationary, yet S-stationary in every nonzero
/// critical direction.
pub fn ladder_example() -> MpscInstance {
    let z = Expr::var;
    MpscInstance::new(2, z(0) + Expr::powi(z(1), 2), vec![-z(0) + z(1)], vec![], vec![(z(0), z(1))])
        .and_then(|i| i.with_names(names2()))
        .expect("fixture is well formed")
}

/// Switching pair `G = -z1`, `H = z1 - z1^2 z2^2` with objective `z1^2 + z2^2`.
///
/// At the origin CPLD fails for the tightened problem while every branch
/// problem satisfies LICQ.
pub fn switching_counterexample() -> MpscInstance {
    let z = Expr::var;
    let h = z(0) - Expr::powi(z(0), 2) * Expr::powi(z(1), 2);
    MpscInstance::new(2, Expr::powi(z(0), 2) + Expr::powi(z(1), 2), vec![], vec![], vec![(-z(0), h)])
        .and_then(|i| i.with_names(names2()))
        .expect("fixture is well formed")
}
