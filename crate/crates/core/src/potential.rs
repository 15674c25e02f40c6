//! The double sine-Gordon substrate family
//!
//! ```text
//! V(φ; a) = 1 − (1 − a)·cos(2πφ) − a·cos(4πφ),   a ∈ [0, 1]
//! ```
//!
//! together with its first three φ-derivatives and the critical points of one
//! period. `a = 0` is the ordinary sine-Gordon potential, `a = 1` is
//! sine-Gordon with doubled argument.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Family parameter at which the curvature at φ = ½ vanishes.
pub const CRITICAL_A: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("family parameter a = {0} is outside [0, 1]")]
    FamilyParameter(f64),
    #[error("elastic coupling g = {0} must be positive and finite")]
    Coupling(f64),
    #[error("chain needs at least 3 sites, got {0}")]
    TooFewSites(usize),
    #[error("degenerate curvature at phi = {location} for a = {a}: the critical point is flat")]
    DegenerateCurvature { location: f64, a: f64 },
}

/// Complete model configuration: chain size, elastic coupling and family
/// parameter.
///
/// `n_sites` counts lattice points, so a chain indexed `0..=N` has
/// `n_sites = N + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    n_sites: usize,
    g: f64,
    a: f64,
}

impl ModelParams {
    pub fn new(n_sites: usize, g: f64, a: f64) -> Result<Self, PotentialError> {
        if n_sites < 3 {
            return Err(PotentialError::TooFewSites(n_sites));
        }
        if !(g.is_finite() && g > 0.0) {
            return Err(PotentialError::Coupling(g));
        }
        check_family(a)?;
        Ok(ModelParams { n_sites, g, a })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Index of the last site, `N`.
    pub fn last_site(&self) -> usize {
        self.n_sites - 1
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn a(&self) -> f64 {
        self.a
    }
}

fn check_family(a: f64) -> Result<(), PotentialError> {
    if (0.0..=1.0).contains(&a) {
        Ok(())
    } else {
        Err(PotentialError::FamilyParameter(a))
    }
}

/// V(φ; a). Evaluated as `2(1−a)sin²(πφ) + 2a·sin²(2πφ)`, which is the same
/// function written so that it is non-negative in floating point and keeps
/// full relative accuracy near the minima.
pub fn potential_value(phi: f64, a: f64) -> Result<f64, PotentialError> {
    check_family(a)?;
    Ok(value_unchecked(phi, a))
}

/// dV/dφ.
pub fn potential_d1(phi: f64, a: f64) -> Result<f64, PotentialError> {
    check_family(a)?;
    Ok(d1_unchecked(phi, a))
}

/// d²V/dφ².
pub fn potential_d2(phi: f64, a: f64) -> Result<f64, PotentialError> {
    check_family(a)?;
    Ok(d2_unchecked(phi, a))
}

/// d³V/dφ³.
pub fn potential_d3(phi: f64, a: f64) -> Result<f64, PotentialError> {
    check_family(a)?;
    Ok(d3_unchecked(phi, a))
}

// Hot-loop variants for callers that already validated `a` through
// `ModelParams`.

#[inline]
pub(crate) fn value_unchecked(phi: f64, a: f64) -> f64 {
    let s1 = (PI * phi).sin();
    let s2 = (2.0 * PI * phi).sin();
    2.0 * (1.0 - a) * s1 * s1 + 2.0 * a * s2 * s2
}

#[inline]
pub(crate) fn d1_unchecked(phi: f64, a: f64) -> f64 {
    2.0 * PI * (1.0 - a) * (2.0 * PI * phi).sin() + 4.0 * PI * a * (4.0 * PI * phi).sin()
}

#[inline]
pub(crate) fn d2_unchecked(phi: f64, a: f64) -> f64 {
    4.0 * PI * PI * ((1.0 - a) * (2.0 * PI * phi).cos() + 4.0 * a * (4.0 * PI * phi).cos())
}

#[inline]
pub(crate) fn d3_unchecked(phi: f64, a: f64) -> f64 {
    -8.0 * PI * PI * PI * ((1.0 - a) * (2.0 * PI * phi).sin() + 8.0 * a * (4.0 * PI * phi).sin())
}

/// Curvature at the absolute minima φ = j.
pub fn minimum_curvature(a: f64) -> f64 {
    4.0 * (1.0 + 3.0 * a) * PI * PI
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalKind {
    AbsoluteMinimum,
    RelativeMinimum,
    Maximum,
}

impl fmt::Display for CriticalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CriticalKind::AbsoluteMinimum => "absolute-minimum",
            CriticalKind::RelativeMinimum => "relative-minimum",
            CriticalKind::Maximum => "maximum",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: f64,
    pub kind: CriticalKind,
    pub curvature: f64,
}

/// Critical points of V(·; a) in the period `[0, 1)`, sorted by location.
///
/// φ = 0 is always the absolute minimum. φ = ½ is a maximum for `a < 1/5`,
/// a relative minimum for `1/5 < a < 1` and a second absolute minimum at
/// `a = 1`. For `a > 1/5` the pair φ± = ±arctan√((3a+1)/(5a−1))/π (mod 1)
/// are maxima.
pub fn critical_points(a: f64) -> Result<Vec<CriticalPoint>, PotentialError> {
    check_family(a)?;
    let half_curvature = d2_unchecked(0.5, a);
    if a == CRITICAL_A {
        return Err(PotentialError::DegenerateCurvature { location: 0.5, a });
    }

    let mut points = vec![CriticalPoint {
        location: 0.0,
        kind: CriticalKind::AbsoluteMinimum,
        curvature: d2_unchecked(0.0, a),
    }];

    let half_kind = if a == 1.0 {
        CriticalKind::AbsoluteMinimum
    } else {
        classify(half_curvature, 0.5, a)?
    };
    points.push(CriticalPoint {
        location: 0.5,
        kind: half_kind,
        curvature: half_curvature,
    });

    if a > CRITICAL_A {
        let offset = ((3.0 * a + 1.0) / (5.0 * a - 1.0)).sqrt().atan() / PI;
        for location in [offset, 1.0 - offset] {
            let curvature = d2_unchecked(location, a);
            points.push(CriticalPoint {
                location,
                kind: classify(curvature, location, a)?,
                curvature,
            });
        }
    }

    points.sort_by(|p, q| p.location.total_cmp(&q.location));
    Ok(points)
}

fn classify(curvature: f64, location: f64, a: f64) -> Result<CriticalKind, PotentialError> {
    if curvature > 0.0 {
        Ok(CriticalKind::RelativeMinimum)
    } else if curvature < 0.0 {
        Ok(CriticalKind::Maximum)
    } else {
        Err(PotentialError::DegenerateCurvature { location, a })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn values_at_reference_points() {
        assert_eq!(potential_value(0.0, 0.6).unwrap(), 0.0);
        assert!((potential_value(0.5, 0.6).unwrap() - 0.8).abs() < 1e-14);
        assert!((potential_value(0.25, 0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((potential_value(0.5, 0.0).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_out_of_family() {
        assert_eq!(
            potential_value(0.1, 1.5),
            Err(PotentialError::FamilyParameter(1.5))
        );
        assert!(potential_d1(0.1, -0.1).is_err());
        assert!(potential_d2(0.1, f64::NAN).is_err());
        assert!(critical_points(2.0).is_err());
    }

    #[test]
    fn curvatures_at_critical_points() {
        for a in [0.0, 0.3, 0.6, 0.99] {
            assert_eq!(potential_d1(0.0, a).unwrap(), 0.0);
        }
        let at_min = potential_d2(0.0, 0.6).unwrap();
        assert!((at_min - 4.0 * 2.8 * PI * PI).abs() < 1e-12 * at_min);
        assert!((at_min - 110.54).abs() < 5e-3);
        let at_half = potential_d2(0.5, 0.6).unwrap();
        assert!((at_half - 4.0 * 2.0 * PI * PI).abs() < 1e-12 * at_half);
        assert!((at_half - 78.96).abs() < 5e-3);
        // curvature at the side maxima
        let a: f64 = 0.6;
        let x = ((3.0 * a + 1.0) / (5.0 * a - 1.0)).sqrt().atan() / PI;
        let expected = (1.0 - a * (2.0 + 15.0 * a)) / a * PI * PI;
        assert!((potential_d2(x, a).unwrap() - expected).abs() < 1e-10 * expected.abs());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-6;
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-1.0..2.0);
            let a: f64 = rng.gen_range(0.0..=1.0);
            let fd1 = central_difference(|p| value_unchecked(p, a), x, h);
            let fd2 = central_difference(|p| d1_unchecked(p, a), x, h);
            let fd3 = central_difference(|p| d2_unchecked(p, a), x, h);
            let scale = |v: f64, s: f64| v.abs().max(s);
            assert!((potential_d1(x, a).unwrap() - fd1).abs() <= 1e-8 * scale(fd1, 2.0 * PI));
            assert!((potential_d2(x, a).unwrap() - fd2).abs() <= 1e-8 * scale(fd2, 4.0 * PI * PI));
            assert!(
                (potential_d3(x, a).unwrap() - fd3).abs() <= 1e-8 * scale(fd3, 8.0 * PI * PI * PI)
            );
        }
    }

    #[test]
    fn sine_gordon_limit_has_two_critical_points() {
        let pts = critical_points(0.0).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].location, 0.0);
        assert_eq!(pts[0].kind, CriticalKind::AbsoluteMinimum);
        assert_eq!(pts[1].location, 0.5);
        assert_eq!(pts[1].kind, CriticalKind::Maximum);
    }

    fn bisect_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let mut flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if fm == 0.0 {
                return mid;
            }
            if (fm < 0.0) == (flo < 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn two_lump_family_has_four_critical_points() {
        let pts = critical_points(0.6).unwrap();
        let kinds: Vec<_> = pts.iter().map(|p| p.kind).collect();
        assert_eq!(
            kinds,
            vec![
                CriticalKind::AbsoluteMinimum,
                CriticalKind::Maximum,
                CriticalKind::RelativeMinimum,
                CriticalKind::Maximum
            ]
        );
        // independent location: sign change of V' bracketed by a grid scan
        let grid: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
        let roots: Vec<f64> = grid
            .windows(2)
            .filter(|w| d1_unchecked(w[0], 0.6).signum() != d1_unchecked(w[1], 0.6).signum())
            .map(|w| bisect_root(|p| d1_unchecked(p, 0.6), w[0], w[1]))
            .collect();
        assert_eq!(roots.len(), 3, "{roots:?}");
        assert!((pts[1].location - roots[0]).abs() < 1e-12);
        assert!((pts[3].location - roots[2]).abs() < 1e-12);
        assert!((pts[1].location - 0.2766).abs() < 1e-4);
        assert!((pts[3].location - 0.7234).abs() < 1e-4);
    }

    #[test]
    fn near_doubled_sine_gordon() {
        let pts = critical_points(0.99).unwrap();
        assert_eq!(pts.len(), 4);
        let half = pts.iter().find(|p| p.location == 0.5).unwrap();
        assert_eq!(half.kind, CriticalKind::RelativeMinimum);
        assert!((value_unchecked(0.5, 0.99) - 0.02).abs() < 1e-14);

        let pts = critical_points(1.0).unwrap();
        let minima = pts
            .iter()
            .filter(|p| p.kind == CriticalKind::AbsoluteMinimum)
            .count();
        assert_eq!(minima, 2);
        assert!((pts[1].location - 0.25).abs() < 1e-15);
    }

    #[test]
    fn transition_value_is_degenerate() {
        assert!(matches!(
            critical_points(0.2),
            Err(PotentialError::DegenerateCurvature { .. })
        ));
        assert!(critical_points(0.2 + 1e-9).is_ok());
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(501, 1e4, 0.6).is_ok());
        assert_eq!(
            ModelParams::new(2, 1.0, 0.0),
            Err(PotentialError::TooFewSites(2))
        );
        assert!(ModelParams::new(10, 0.0, 0.0).is_err());
        assert!(ModelParams::new(10, 1.0, 1.01).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn nonnegative_periodic_and_even(phi in -3.0f64..3.0, a in 0.0f64..=1.0) {
                let v = potential_value(phi, a).unwrap();
                prop_assert!(v >= 0.0);
                prop_assert!((potential_value(phi + 1.0, a).unwrap() - v).abs() < 1e-12);
                prop_assert!((potential_value(-phi, a).unwrap() - v).abs() < 1e-13);
            }

            #[test]
            fn critical_points_are_stationary(a in 0.0f64..1.0) {
                prop_assume!((a - CRITICAL_A).abs() > 1e-9);
                for p in critical_points(a).unwrap() {
                    prop_assert!(d1_unchecked(p.location, a).abs() < 1e-12);
                    prop_assert!((0.0..1.0).contains(&p.location));
                    match p.kind {
                        CriticalKind::Maximum => prop_assert!(p.curvature < 0.0),
                        _ => prop_assert!(p.curvature > 0.0),
                    }
                }
            }
        }
    }
}
