mod support;

use mpsc_core::cones::{
    directional_normal_switch, limiting_normal_switch, regular_normal_of_tangent_switch, regular_normal_switch, tangent_switch,
    ConeError, FactorCone,
};
use mpsc_core::cones::FactorCone::*;
use mpsc_core::sampling::stream;
use support::{directional_normal_oracle, probe, regular_normal_oracle};

const TOL: f64 = 1e-12;

#[test]
fn tangent_and_normal_rows() {
    let rows: [([f64; 2], FactorCone, FactorCone, FactorCone); 3] = [
        ([0.0, 2.0], LineB, LineA, LineA),
        ([0.0, 0.0], SwitchUnion, ZeroPoint, SwitchUnion),
        ([-1.5, 0.0], LineA, LineB, LineB),
    ];
    for (a, t, rn, ln) in rows {
        assert_eq!(tangent_switch(a, TOL), Ok(t), "{a:?}");
        assert_eq!(regular_normal_switch(a, TOL), Ok(rn), "{a:?}");
        assert_eq!(limiting_normal_switch(a, TOL), Ok(ln), "{a:?}");
    }
    assert!(matches!(tangent_switch([0.5, 0.5], TOL), Err(ConeError::NotInSet { .. })));
}

#[test]
fn directional_rows() {
    let rows: [([f64; 2], [f64; 2], FactorCone, FactorCone); 5] = [
        ([0.0, 3.0], [0.0, -1.0], LineA, LineA),
        ([2.0, 0.0], [1.0, 0.0], LineB, LineB),
        ([0.0, 0.0], [0.0, -1.0], LineA, LineA),
        ([0.0, 0.0], [1.0, 0.0], LineB, LineB),
        ([0.0, 0.0], [0.0, 0.0], ZeroPoint, SwitchUnion),
    ];
    for (a, d, rnt, dn) in rows {
        assert_eq!(regular_normal_of_tangent_switch(a, d, TOL), Ok(rnt), "{a:?} {d:?}");
        assert_eq!(directional_normal_switch(a, d, TOL), Ok(dn), "{a:?} {d:?}");
    }
    assert_eq!(directional_normal_switch([0.0, 0.0], [1.0, 1.0], TOL), Ok(EmptyCone));
    assert_eq!(directional_normal_switch([0.0, 1.0], [1.0, 0.0], TOL), Ok(EmptyCone));
    assert!(matches!(regular_normal_of_tangent_switch([0.0, 0.0], [1.0, 1.0], TOL), Err(ConeError::NotInTangent { .. })));
}

#[test]
fn directional_normal_matches_definition_on_grid() {
    let points = [[0.0, 0.0], [1.0, 0.0], [-2.0, 0.0], [0.0, 0.5], [0.0, -3.0]];
    let dirs = [-1.0, 0.0, 1.0];
    let mut s = stream(11, 0);
    let mut disagreements = 0;
    let mut probes = 0;
    for a in points {
        for d1 in dirs {
            for d2 in dirs {
                let d = [d1, d2];
                let cone = directional_normal_switch(a, d, TOL).unwrap();
                for _ in 0..250 {
                    let z = probe(&mut s);
                    probes += 1;
                    if cone.contains(&z) != directional_normal_oracle(a, d, z) {
                        disagreements += 1;
                    }
                }
            }
        }
    }
    assert!(probes >= 10_000);
    assert_eq!(disagreements, 0);
}

#[test]
fn regular_normal_matches_definition() {
    let mut s = stream(12, 0);
    for a in [[0.0, 0.0], [1.0, 0.0], [0.0, -1.0]] {
        let cone = regular_normal_switch(a, TOL).unwrap();
        for _ in 0..500 {
            let z = probe(&mut s);
            assert_eq!(cone.contains(&z), regular_normal_oracle(a, z), "{a:?} {z:?}");
        }
    }
}

#[test]
fn zero_direction_gives_limiting_normal() {
    for a in [[0.0, 0.0], [4.0, 0.0], [0.0, -0.25]] {
        assert_eq!(directional_normal_switch(a, [0.0, 0.0], TOL), limiting_normal_switch(a, TOL));
    }
}

#[test]
fn polar_involution() {
    for c in [ZeroPoint, LineA, LineB, FullPlane] {
        assert_eq!(c.polar(2).polar(2), c);
    }
    for c in [ZeroPoint, RealLine, HalfLineNonPos, HalfLineNonNeg] {
        assert_eq!(c.polar(1).polar(1), c);
    }
    assert_eq!(SwitchUnion.polar(2), ZeroPoint);
    assert_eq!(SwitchUnion.polar(2).polar(2), FullPlane);
    assert_eq!(HalfLineNonPos.polar(1), HalfLineNonNeg);
}

#[test]
fn switch_union_polar_by_sampling() {
    // only the origin has nonpositive inner product with both axes
    let mut s = stream(13, 0);
    let axes = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
    for _ in 0..1000 {
        let v = s.unit_vector(2);
        assert!(axes.iter().any(|y| v[0] * y[0] + v[1] * y[1] > 0.0));
    }
}
