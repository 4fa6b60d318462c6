//! Tangent and normal cones of the switching set `{(a, b) : a b = 0}` and of
//! the product set `R_-^p x {0}^q x (switching set)^m`.
//!
//! Every cone the theory produces is one of nine labelled sets, so cones are
//! plain tags with exact membership and polar tables.

use crate::analysis::{ActivePattern, DirectionalPattern};
use crate::kernel::{Sign, SignPattern};
use crate::num::{abs, dot};
use crate::prelude::*;
use core::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FactorCone {
    /// `{0}` in the ambient dimension.
    ZeroPoint,
    /// `R x {0}`.
    LineA,
    /// `{0} x R`.
    LineB,
    /// `(R x {0}) ∪ ({0} x R)`.
    SwitchUnion,
    FullPlane,
    RealLine,
    HalfLineNonPos,
    HalfLineNonNeg,
    EmptyCone,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConeError {
    /// The pair is not (within tolerance) in the switching set.
    NotInSet { a: [f64; 2] },
    /// The direction is not tangent at the given pair.
    NotInTangent { a: [f64; 2], d: [f64; 2] },
}

impl fmt::Display for ConeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConeError::NotInSet { a } => write!(f, "({}, {}) is not in the switching set", a[0], a[1]),
            ConeError::NotInTangent { a, d } => {
                write!(f, "direction ({}, {}) is not tangent at ({}, {})", d[0], d[1], a[0], a[1])
            }
        }
    }
}

impl core::error::Error for ConeError {}

impl fmt::Display for FactorCone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactorCone::ZeroPoint => "{0}",
            FactorCone::LineA => "R x {0}",
            FactorCone::LineB => "{0} x R",
            FactorCone::SwitchUnion => "Omega_SC",
            FactorCone::FullPlane => "R^2",
            FactorCone::RealLine => "R",
            FactorCone::HalfLineNonPos => "R_-",
            FactorCone::HalfLineNonNeg => "R_+",
            FactorCone::EmptyCone => "empty",
        })
    }
}

impl FactorCone {
    pub fn name(self) -> &'static str {
        match self {
            FactorCone::ZeroPoint => "ZeroPoint",
            FactorCone::LineA => "LineA",
            FactorCone::LineB => "LineB",
            FactorCone::SwitchUnion => "SwitchUnion",
            FactorCone::FullPlane => "FullPlane",
            FactorCone::RealLine => "RealLine",
            FactorCone::HalfLineNonPos => "HalfLineNonPos",
            FactorCone::HalfLineNonNeg => "HalfLineNonNeg",
            FactorCone::EmptyCone => "EmptyCone",
        }
    }

    /// Exact membership.
    pub fn contains(self, v: &[f64]) -> bool {
        self.contains_tol(v, 0.0)
    }

    /// Membership with every zero test relaxed to `|x| <= tol`.
    pub fn contains_tol(self, v: &[f64], tol: f64) -> bool {
        let z = |x: f64| abs(x) <= tol;
        match (self, v) {
            (FactorCone::EmptyCone, _) => false,
            (FactorCone::ZeroPoint, _) => v.iter().all(|x| z(*x)),
            (FactorCone::RealLine, [_]) | (FactorCone::FullPlane, [_, _]) => true,
            (FactorCone::HalfLineNonPos, [x]) => *x <= tol,
            (FactorCone::HalfLineNonNeg, [x]) => *x >= -tol,
            (FactorCone::LineA, [_, b]) => z(*b),
            (FactorCone::LineB, [a, _]) => z(*a),
            (FactorCone::SwitchUnion, [a, b]) => z(*a) || z(*b),
            _ => false,
        }
    }

    /// Polar cone `{x : x . y <= 0 for all y in C}` in `R^dim`.
    pub fn polar(self, dim: usize) -> FactorCone {
        let whole = if dim == 1 { FactorCone::RealLine } else { FactorCone::FullPlane };
        match self {
            FactorCone::ZeroPoint | FactorCone::EmptyCone => whole,
            FactorCone::LineA => FactorCone::LineB,
            FactorCone::LineB => FactorCone::LineA,
            FactorCone::SwitchUnion | FactorCone::FullPlane | FactorCone::RealLine => FactorCone::ZeroPoint,
            FactorCone::HalfLineNonPos => FactorCone::HalfLineNonNeg,
            FactorCone::HalfLineNonNeg => FactorCone::HalfLineNonPos,
        }
    }

    pub fn is_convex(self) -> bool {
        self != FactorCone::SwitchUnion
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Position {
    /// `a1 = 0 != a2`.
    OnB,
    /// `a1 != 0 = a2`.
    OnA,
    Origin,
}

fn position(a: [f64; 2], tol: f64) -> Result<Position, ConeError> {
    match (abs(a[0]) <= tol, abs(a[1]) <= tol) {
        (true, true) => Ok(Position::Origin),
        (true, false) => Ok(Position::OnB),
        (false, true) => Ok(Position::OnA),
        (false, false) => Err(ConeError::NotInSet { a }),
    }
}

pub fn tangent_switch(a: [f64; 2], tol: f64) -> Result<FactorCone, ConeError> {
    Ok(match position(a, tol)? {
        Position::OnB => FactorCone::LineB,
        Position::OnA => FactorCone::LineA,
        Position::Origin => FactorCone::SwitchUnion,
    })
}

pub fn regular_normal_switch(a: [f64; 2], tol: f64) -> Result<FactorCone, ConeError> {
    Ok(match position(a, tol)? {
        Position::OnB => FactorCone::LineA,
        Position::OnA => FactorCone::LineB,
        Position::Origin => FactorCone::ZeroPoint,
    })
}

pub fn limiting_normal_switch(a: [f64; 2], tol: f64) -> Result<FactorCone, ConeError> {
    Ok(match position(a, tol)? {
        Position::OnB => FactorCone::LineA,
        Position::OnA => FactorCone::LineB,
        Position::Origin => FactorCone::SwitchUnion,
    })
}

/// Shared by the two direction-dependent tables; `None` when `d` is not tangent.
fn directional_row(pos: Position, d: [f64; 2], tol: f64, at_zero: FactorCone) -> Option<FactorCone> {
    let zero = |x: f64| abs(x) <= tol;
    match (pos, zero(d[0]), zero(d[1])) {
        (Position::OnB, true, _) => Some(FactorCone::LineA),
        (Position::OnA, _, true) => Some(FactorCone::LineB),
        (Position::Origin, true, true) => Some(at_zero),
        (Position::Origin, true, false) => Some(FactorCone::LineA),
        (Position::Origin, false, true) => Some(FactorCone::LineB),
        _ => None,
    }
}

/// Limiting normal cone at `a` in direction `d` (empty when `d` is not tangent).
pub fn directional_normal_switch(a: [f64; 2], d: [f64; 2], tol: f64) -> Result<FactorCone, ConeError> {
    Ok(directional_row(position(a, tol)?, d, tol, FactorCone::SwitchUnion).unwrap_or(FactorCone::EmptyCone))
}

/// Regular normal cone of the tangent cone `T(a)` at `d`.
pub fn regular_normal_of_tangent_switch(a: [f64; 2], d: [f64; 2], tol: f64) -> Result<FactorCone, ConeError> {
    directional_row(position(a, tol)?, d, tol, FactorCone::ZeroPoint).ok_or(ConeError::NotInTangent { a, d })
}

/// One factor per inequality, equality and switching pair (in that order).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductCone {
    pub p: usize,
    pub q: usize,
    pub m: usize,
    pub factors: Vec<FactorCone>,
}

impl ProductCone {
    /// Ambient dimension `p + q + 2m`.
    pub fn dim(&self) -> usize {
        self.p + self.q + 2 * self.m
    }

    pub fn ineq(&self, i: usize) -> FactorCone {
        self.factors[i]
    }

    pub fn eq(&self, j: usize) -> FactorCone {
        self.factors[self.p + j]
    }

    pub fn switch(&self, i: usize) -> FactorCone {
        self.factors[self.p + self.q + i]
    }

    pub fn is_empty(&self) -> bool {
        self.factors.contains(&FactorCone::EmptyCone)
    }

    /// Membership of a vector laid out as `(g, h, G, H)`.
    pub fn contains_tol(&self, v: &[f64], tol: f64) -> bool {
        let (p, q, m) = (self.p, self.q, self.m);
        v.len() == self.dim()
            && (0..p + q).all(|k| self.factors[k].contains_tol(&v[k..k + 1], tol))
            && (0..m).all(|i| self.switch(i).contains_tol(&[v[p + q + i], v[p + q + m + i]], tol))
    }

    /// Replaces every switching factor equal to `from` by `to`.
    pub fn replace_switch(mut self, from: FactorCone, to: FactorCone) -> Self {
        let s = self.p + self.q;
        for f in &mut self.factors[s..] {
            if *f == from {
                *f = to;
            }
        }
        self
    }

    /// Multiplier sign pattern whose admissible set is this cone
    /// (`None` if the cone is empty).
    pub fn sign_pattern(&self) -> Option<SignPattern> {
        if self.is_empty() {
            return None;
        }
        let (p, q, m) = (self.p, self.q, self.m);
        let scalar = |c: FactorCone| match c {
            FactorCone::HalfLineNonNeg => Sign::NonNeg,
            FactorCone::RealLine => Sign::Free,
            _ => Sign::Zero,
        };
        let mut signs: Vec<Sign> = self.factors[..p + q].iter().map(|c| scalar(*c)).collect();
        signs.resize(p + q + 2 * m, Sign::Zero);
        let mut pairs = Vec::new();
        for i in 0..m {
            let (g, h) = match self.switch(i) {
                FactorCone::LineA => (Sign::Free, Sign::Zero),
                FactorCone::LineB => (Sign::Zero, Sign::Free),
                FactorCone::FullPlane => (Sign::Free, Sign::Free),
                FactorCone::SwitchUnion => {
                    pairs.push((p + q + i, p + q + m + i));
                    (Sign::Free, Sign::Free)
                }
                _ => (Sign::Zero, Sign::Zero),
            };
            signs[p + q + i] = g;
            signs[p + q + m + i] = h;
        }
        let mut pat = SignPattern::new(signs);
        for (a, b) in pairs {
            pat.add_pair(a, b).expect("switch coordinates are distinct");
        }
        Some(pat)
    }
}

fn switch_value(pat: &ActivePattern, i: usize) -> [f64; 2] {
    [pat.values[pat.big_g_coord(i)], pat.values[pat.big_h_coord(i)]]
}

fn product(pat: &ActivePattern, ineq: impl Fn(usize) -> FactorCone, eq: FactorCone, sw: impl Fn(usize) -> Result<FactorCone, ConeError>) -> Result<ProductCone, ConeError> {
    let mut factors: Vec<FactorCone> = (0..pat.p).map(ineq).collect();
    factors.extend(core::iter::repeat_n(eq, pat.q));
    for i in 0..pat.m {
        factors.push(sw(i)?);
    }
    Ok(ProductCone { p: pat.p, q: pat.q, m: pat.m, factors })
}

/// Tangent cone of the product set at the constraint values of `pat`.
pub fn product_tangent(pat: &ActivePattern) -> Result<ProductCone, ConeError> {
    let active = |i: usize| pat.active_ineq.contains(&i);
    product(
        pat,
        |i| if active(i) { FactorCone::HalfLineNonPos } else { FactorCone::RealLine },
        FactorCone::ZeroPoint,
        |i| tangent_switch(switch_value(pat, i), pat.tol_act),
    )
}

/// Regular normal cone of the product set.
pub fn product_regular_normal(pat: &ActivePattern) -> Result<ProductCone, ConeError> {
    let active = |i: usize| pat.active_ineq.contains(&i);
    product(
        pat,
        |i| if active(i) { FactorCone::HalfLineNonNeg } else { FactorCone::ZeroPoint },
        FactorCone::RealLine,
        |i| regular_normal_switch(switch_value(pat, i), pat.tol_act),
    )
}

/// Limiting normal cone of the product set.
pub fn product_limiting_normal(pat: &ActivePattern) -> Result<ProductCone, ConeError> {
    let active = |i: usize| pat.active_ineq.contains(&i);
    product(
        pat,
        |i| if active(i) { FactorCone::HalfLineNonNeg } else { FactorCone::ZeroPoint },
        FactorCone::RealLine,
        |i| limiting_normal_switch(switch_value(pat, i), pat.tol_act),
    )
}

/// Directional limiting normal cone of the product set in the image direction
/// `grad P(z*) d`, applied factor by factor.
pub fn product_directional_normal(dp: &DirectionalPattern) -> Result<ProductCone, ConeError> {
    let pat = &dp.base;
    let slope = |k: usize| dot(&pat.gradients.column(k), &dp.direction);
    let tol = dp.tol_dir;
    product(
        pat,
        |i| {
            if !pat.active_ineq.contains(&i) {
                FactorCone::ZeroPoint
            } else if abs(slope(pat.g_coord(i))) <= tol {
                FactorCone::HalfLineNonNeg
            } else if slope(pat.g_coord(i)) < 0.0 {
                FactorCone::ZeroPoint
            } else {
                FactorCone::EmptyCone
            }
        },
        FactorCone::RealLine,
        |i| {
            let a = switch_value(pat, i);
            let d = [slope(pat.big_g_coord(i)), slope(pat.big_h_coord(i))];
            Ok(directional_row(position(a, pat.tol_act)?, d, tol, FactorCone::SwitchUnion).unwrap_or(FactorCone::EmptyCone))
        },
    )
    .map(|mut c| {
        // equality factors: {0} has normal R, but only along tangent directions
        for j in 0..pat.q {
            if abs(slope(pat.h_coord(j))) > tol {
                c.factors[pat.p + j] = FactorCone::EmptyCone;
            }
        }
        c
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::ladder_example;
    use FactorCone::*;

    #[test]
    fn lemma_tables() {
        let t = 1e-12;
        assert_eq!(tangent_switch([1.0, 0.0], t), Ok(LineA));
        assert_eq!(tangent_switch([0.0, 0.0], t), Ok(SwitchUnion));
        assert_eq!(tangent_switch([0.0, 2.0], t), Ok(LineB));
        assert!(tangent_switch([0.5, 0.5], t).is_err());
        assert_eq!(regular_normal_switch([0.0, 0.0], t), Ok(ZeroPoint));
        assert_eq!(limiting_normal_switch([0.0, 0.0], t), Ok(SwitchUnion));
        assert_eq!(limiting_normal_switch([0.0, 3.0], t), Ok(LineA));
        assert_eq!(directional_normal_switch([0.0, 0.0], [1.0, 0.0], t), Ok(LineB));
        assert_eq!(directional_normal_switch([0.0, 0.0], [0.0, 0.0], t), Ok(SwitchUnion));
        assert_eq!(directional_normal_switch([0.0, 0.0], [1.0, 1.0], t), Ok(EmptyCone));
        assert_eq!(regular_normal_of_tangent_switch([0.0, 0.0], [0.0, -1.0], t), Ok(LineA));
        assert_eq!(regular_normal_of_tangent_switch([0.0, 0.0], [0.0, 0.0], t), Ok(ZeroPoint));
        assert_eq!(regular_normal_of_tangent_switch([2.0, 0.0], [1.0, 0.0], t), Ok(LineB));
        assert!(regular_normal_of_tangent_switch([2.0, 0.0], [1.0, 1.0], t).is_err());
    }

    #[test]
    fn membership_and_polars() {
        assert!(SwitchUnion.contains(&[0.0, -5.0]));
        assert!(!SwitchUnion.contains(&[1.0, -5.0]));
        assert_eq!(SwitchUnion.polar(2), ZeroPoint);
        assert_eq!(SwitchUnion.polar(2).polar(2), FullPlane);
        assert_eq!(HalfLineNonPos.polar(1), HalfLineNonNeg);
        assert_eq!(RealLine.polar(1), ZeroPoint);
        assert_eq!(ZeroPoint.polar(1), RealLine);
        for (c, d) in [(ZeroPoint, 1), (ZeroPoint, 2), (LineA, 2), (LineB, 2), (FullPlane, 2), (RealLine, 1), (HalfLineNonPos, 1), (HalfLineNonNeg, 1)] {
            assert_eq!(c.polar(d).polar(d), c, "{c:?}");
        }
    }

    #[test]
    fn directional_at_zero_is_limiting() {
        for a in [[0.0, 0.0], [0.0, 1.0], [-2.0, 0.0]] {
            assert_eq!(directional_normal_switch(a, [0.0, 0.0], 0.0), limiting_normal_switch(a, 0.0));
        }
    }

    #[test]
    fn product_cones_for_example() {
        let pat = ActivePattern::compute(&ladder_example(), &[0.0, 0.0], 1e-8).unwrap();
        let t = product_tangent(&pat).unwrap();
        assert_eq!(t.factors, vec![HalfLineNonPos, SwitchUnion]);
        let dp = DirectionalPattern::new(&pat, &[0.0, -1.0], 1e-8).unwrap();
        let n = product_directional_normal(&dp).unwrap();
        assert_eq!(n.factors, vec![ZeroPoint, LineA]);
        let sp = n.sign_pattern().unwrap();
        assert_eq!(sp.signs(), &[Sign::Zero, Sign::Free, Sign::Zero]);
        let off = ActivePattern::compute(&ladder_example(), &[1.0, 0.0], 1e-8).unwrap();
        assert_eq!(product_limiting_normal(&off).unwrap().ineq(0), ZeroPoint);
    }

    #[test]
    fn non_tangent_direction_gives_empty_product() {
        let pat = ActivePattern::compute(&ladder_example(), &[0.0, 0.0], 1e-8).unwrap();
        let dp = DirectionalPattern::new(&pat, &[1.0, 1.0], 1e-8).unwrap();
        let n = product_directional_normal(&dp).unwrap();
        assert!(n.is_empty() && n.sign_pattern().is_none());
    }
}
