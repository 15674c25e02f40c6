//! Static configurations of the chain: the homogeneous vacuum and the unit
//! charge kink, plus their per-site energy distribution.
//!
//! Static solutions satisfy, at every interior site `0 < n < N`,
//!
//! ```text
//! F_n = −V′(φ_n) + g·(φ_{n+1} − 2φ_n + φ_{n−1}) = 0
//! ```
//!
//! with `φ_0 = 0` and `φ_N = 0` (vacuum) or `φ_N = 1` (kink).
//!
//! Kink displacements are stored as unevaluated sums `phi[n] + tail[n]`. At
//! g = 10⁶ the Laplacian term amplifies the rounding of a plain `f64` profile
//! to ~1e-10, so the Newton iteration carries the low-order part and the
//! residual is evaluated with error-free differences.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dd::{fast_two_sum, two_sum};
use crate::potential::{
    d1_unchecked, d2_unchecked, value_unchecked, ModelParams, PotentialError, CRITICAL_A,
};

/// Newton stopping tolerance on the sup-norm of the interior residual.
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;
/// Newton iterations allowed per continuation step.
pub const MAX_NEWTON_ITERATIONS: usize = 200;
/// Largest increment of `a` between warm-started solves.
pub const CONTINUATION_STEP: f64 = 0.1;
/// Kink solves refuse family parameters this close to 1/5.
pub const DEGENERATE_WINDOW: f64 = 1e-6;

const MAX_HALVINGS: u32 = 40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StaticsError {
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("Newton iteration did not converge at a = {a} after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        a: f64,
        iterations: usize,
        residual: f64,
    },
    #[error("singular Jacobian at site {site} during Newton step (a = {a})")]
    SingularJacobian { a: f64, site: usize },
    #[error("energy profile has no lump above the threshold")]
    FlatProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Vacuum,
    Kink,
}

impl Sector {
    pub fn name(self) -> &'static str {
        match self {
            Sector::Vacuum => "vacuum",
            Sector::Kink => "kink",
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfiguration {
    params: ModelParams,
    phi: Vec<f64>,
    tail: Vec<f64>,
    kind: Sector,
}

impl FieldConfiguration {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Displacements φ_0..φ_N rounded to `f64`.
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Low-order parts: the displacement of site n is `phi[n] + tail[n]`.
    pub fn tail(&self) -> &[f64] {
        &self.tail
    }

    pub fn kind(&self) -> Sector {
        self.kind
    }

    pub fn topological_charge(&self) -> f64 {
        let last = self.phi.len() - 1;
        ((self.phi[last] - self.phi[0]) + (self.tail[last] - self.tail[0])).abs()
    }

    /// Interior residuals; entry `i` belongs to site `i + 1`.
    pub fn residual(&self) -> Vec<f64> {
        residual(&self.phi, &self.tail, self.params.g(), self.params.a())
    }

    pub fn residual_norm(&self) -> f64 {
        sup_norm(&self.residual())
    }

    /// `φ_{n+1} − φ_n` including the low-order parts.
    pub fn bond_stretch(&self, n: usize) -> f64 {
        let (s, e) = two_sum(self.phi[n + 1], -self.phi[n]);
        s + (e + (self.tail[n + 1] - self.tail[n]))
    }
}

/// Homogeneous solution φ_n = 0 sitting in the absolute minimum.
pub fn vacuum_configuration(params: &ModelParams) -> FieldConfiguration {
    let n = params.n_sites();
    FieldConfiguration {
        params: *params,
        phi: vec![0.0; n],
        tail: vec![0.0; n],
        kind: Sector::Vacuum,
    }
}

/// Solves the static equations with kink boundary values φ_0 = 0, φ_N = 1.
///
/// Starts from a sine-Gordon-shaped symmetric profile centred at N/2. For
/// `a > 1/5` the solution is continued from `a = 1/5` in steps of at most
/// [`CONTINUATION_STEP`], since a direct solve near `a = 1` can land on the
/// wrong branch.
pub fn solve_kink(params: &ModelParams) -> Result<FieldConfiguration, StaticsError> {
    let a = params.a();
    if (a - CRITICAL_A).abs() < DEGENERATE_WINDOW {
        return Err(PotentialError::DegenerateCurvature { location: 0.5, a }.into());
    }
    let g = params.g();
    let last = params.last_site();
    let centre = last as f64 / 2.0;
    let width = g.sqrt() / (2.0 * PI);

    let mut phi: Vec<f64> = (0..=last)
        .map(|n| (2.0 / PI) * ((n as f64 - centre) / width).exp().atan())
        .collect();
    phi[0] = 0.0;
    phi[last] = 1.0;
    let mut tail = vec![0.0; phi.len()];

    for step_a in continuation_path(a) {
        newton(&mut phi, &mut tail, g, step_a)?;
    }

    Ok(FieldConfiguration {
        params: *params,
        phi,
        tail,
        kind: Sector::Kink,
    })
}

fn continuation_path(a: f64) -> Vec<f64> {
    if a <= CRITICAL_A {
        return vec![a];
    }
    let steps = ((a - CRITICAL_A) / CONTINUATION_STEP).ceil() as usize;
    let mut path: Vec<f64> = (0..steps)
        .map(|k| CRITICAL_A + (a - CRITICAL_A) * k as f64 / steps as f64)
        .collect();
    path.push(a);
    path
}

fn residual(phi: &[f64], tail: &[f64], g: f64, a: f64) -> Vec<f64> {
    let n = phi.len();
    let stretch = |k: usize| {
        let (s, e) = two_sum(phi[k + 1], -phi[k]);
        (s, e + (tail[k + 1] - tail[k]))
    };
    let mut out = Vec::with_capacity(n - 2);
    let mut left = stretch(0);
    for k in 1..n - 1 {
        let right = stretch(k);
        let (s, e) = two_sum(right.0, -left.0);
        let lap_lo = e + (right.1 - left.1);
        let force = d1_unchecked(phi[k], a) + d2_unchecked(phi[k], a) * tail[k];
        out.push(g * s + (g * lap_lo - force));
        left = right;
    }
    out
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn newton(phi: &mut [f64], tail: &mut [f64], g: f64, a: f64) -> Result<(), StaticsError> {
    let mut f = residual(phi, tail, g, a);
    for _ in 0..MAX_NEWTON_ITERATIONS {
        if sup_norm(&f) <= RESIDUAL_TOLERANCE {
            return Ok(());
        }
        // Jacobian of F: diagonal −V″ − 2g, off-diagonals g.
        let diag: Vec<f64> = (1..phi.len() - 1)
            .map(|k| -d2_unchecked(phi[k], a) - 2.0 * g)
            .collect();
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let mut step = solve_tridiagonal(&diag, g, &rhs)
            .map_err(|site| StaticsError::SingularJacobian { a, site: site + 1 })?;
        antisymmetrize(&mut step);

        let base = l2_norm(&f);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let (tp, tt) = displaced(phi, tail, &step, scale);
            let trial_f = residual(&tp, &tt, g, a);
            if l2_norm(&trial_f) < base {
                accepted = Some((tp, tt, trial_f));
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some((tp, tt, _)) => {
                phi.copy_from_slice(&tp);
                tail.copy_from_slice(&tt);
                symmetrize(phi, tail);
                f = residual(phi, tail, g, a);
            }
            None => {
                return Err(StaticsError::NonConvergence {
                    a,
                    iterations: MAX_NEWTON_ITERATIONS,
                    residual: sup_norm(&f),
                })
            }
        }
    }
    if sup_norm(&f) <= RESIDUAL_TOLERANCE {
        Ok(())
    } else {
        Err(StaticsError::NonConvergence {
            a,
            iterations: MAX_NEWTON_ITERATIONS,
            residual: sup_norm(&f),
        })
    }
}

/// Keeps the odd part `δ_n = −δ_{N−n}` of an interior step, the tangent
/// space of symmetric kinks. The even part is rounding noise divided by the
/// near-zero translation eigenvalue and only derails the line search.
fn antisymmetrize(step: &mut [f64]) {
    let len = step.len();
    for i in 0..len.div_ceil(2) {
        let j = len - 1 - i;
        let odd = 0.5 * (step[i] - step[j]);
        step[i] = odd;
        step[j] = -odd;
    }
}

/// Projects onto `φ_n + φ_{N−n} = 1`. The Newton step preserves this
/// symmetry exactly; the projection removes rounding that would otherwise
/// drift along the soft translation mode when the kink is weakly pinned.
fn symmetrize(phi: &mut [f64], tail: &mut [f64]) {
    let last = phi.len() - 1;
    for n in 0..=last / 2 {
        let m = last - n;
        // mirror = 1 − φ_m, carried as (s1, e1 − tail_m)
        let (s1, e1) = two_sum(1.0, -phi[m]);
        let (s, e2) = two_sum(phi[n], s1);
        let lo = e2 + e1 + tail[n] - tail[m];
        let (hi, lo) = fast_two_sum(0.5 * s, 0.5 * lo);
        phi[n] = hi;
        tail[n] = lo;
        if m != n {
            let (s, e) = two_sum(1.0, -hi);
            let (h, l) = fast_two_sum(s, e - lo);
            phi[m] = h;
            tail[m] = l;
        }
    }
}

fn displaced(phi: &[f64], tail: &[f64], step: &[f64], scale: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = phi.to_vec();
    let mut t = tail.to_vec();
    for (k, d) in step.iter().enumerate() {
        let (s, e) = two_sum(phi[k + 1], scale * d);
        let (hi, lo) = fast_two_sum(s, e + tail[k + 1]);
        p[k + 1] = hi;
        t[k + 1] = lo;
    }
    (p, t)
}

/// Thomas algorithm for a tridiagonal system with constant off-diagonals.
/// Returns the offending row on a vanishing pivot.
fn solve_tridiagonal(diag: &[f64], off: f64, rhs: &[f64]) -> Result<Vec<f64>, usize> {
    let n = diag.len();
    let scale = diag.iter().fold(off.abs(), |m, d| m.max(d.abs()));
    let tiny = 1e-14 * scale;
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot.abs() <= tiny {
        return Err(0);
    }
    c[0] = off / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - off * c[i - 1];
        if pivot.abs() <= tiny {
            return Err(i);
        }
        c[i] = off / pivot;
        d[i] = (rhs[i] - off * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyProfile {
    pub per_site: Vec<f64>,
    pub total: f64,
}

/// 𝓔_n = V(φ_n) + ½g(φ_{n+1} − φ_n)² for n < N, and 𝓔_N = V(φ_N).
pub fn energy_profile(config: &FieldConfiguration) -> EnergyProfile {
    let params = config.params();
    let (g, a) = (params.g(), params.a());
    let phi = config.phi();
    let last = phi.len() - 1;
    let per_site: Vec<f64> = (0..=last)
        .map(|n| {
            let site = value_unchecked(phi[n], a);
            if n < last {
                let d = config.bond_stretch(n);
                site + 0.5 * g * d * d
            } else {
                site
            }
        })
        .collect();
    let mut acc = crate::dd::Accumulator::new();
    per_site.iter().for_each(|&e| acc.add(e));
    EnergyProfile {
        per_site,
        total: acc.value(),
    }
}

impl EnergyProfile {
    pub fn peak(&self) -> f64 {
        self.per_site.iter().copied().fold(0.0, f64::max)
    }

    /// First and last site whose energy exceeds `fraction` of the peak.
    pub fn support(&self, fraction: f64) -> Option<(usize, usize)> {
        let cut = fraction * self.peak();
        let first = self.per_site.iter().position(|&e| e > cut)?;
        let last = self.per_site.iter().rposition(|&e| e > cut)?;
        Some((first, last))
    }
}

/// Sites of strict local maxima of the energy distribution above
/// `threshold × max`, ascending.
pub fn lump_centers(profile: &EnergyProfile, threshold: f64) -> Result<Vec<usize>, StaticsError> {
    let e = &profile.per_site;
    let peak = profile.peak();
    if peak.is_nan() || peak <= 0.0 {
        return Err(StaticsError::FlatProfile);
    }
    let cut = threshold * peak;
    let centers: Vec<usize> = (1..e.len() - 1)
        .filter(|&n| e[n] > e[n - 1] && e[n] > e[n + 1] && e[n] > cut)
        .collect();
    if centers.is_empty() {
        Err(StaticsError::FlatProfile)
    } else {
        Ok(centers)
    }
}
