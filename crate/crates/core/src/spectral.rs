//! Small fluctuations around a static configuration.
//!
//! The fluctuation Hessian is the symmetric tridiagonal matrix
//!
//! ```text
//! B(n, m) = (Ω(n) + 2g)·δ_nm − g·δ_{n,m−1} − g·δ_{n,m+1},   Ω(n) = V″(φ_n)
//! ```
//!
//! on all N + 1 sites, with zero fluctuation assumed just outside the chain.
//! Its eigenpairs (ω_k², ψ_k) are the normal modes.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dd::{two_prod, two_sum, Accumulator};
use crate::potential::d2_unchecked;
use crate::statics::{FieldConfiguration, Sector};

/// Squared frequencies at or below this value are reported as soft modes.
/// Wide kinks in the strongly pinned regime have translation modes of order
/// 1e-14, positive but below the resolution of the curvature itself; they are
/// kept, and only ω² ≤ 0 is rejected.
pub const SOFT_MODE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("unstable expansion point: mode {mode} has omega^2 = {omega_sq:.3e}")]
    Instability { mode: usize, omega_sq: f64 },
    #[error("tridiagonal QL iteration failed to converge for eigenvalue {index}")]
    NoConvergence { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianMatrix {
    curvature: Vec<f64>,
    coupling: f64,
    sector: Option<Sector>,
}

impl HessianMatrix {
    /// Hessian from on-site curvatures Ω(n) and the elastic coupling g.
    pub fn new(curvature: Vec<f64>, coupling: f64) -> Self {
        assert!(!curvature.is_empty(), "Hessian needs at least one site");
        HessianMatrix {
            curvature,
            coupling,
            sector: None,
        }
    }

    pub fn with_sector(mut self, sector: Sector) -> Self {
        self.sector = Some(sector);
        self
    }

    pub fn sector(&self) -> Option<Sector> {
        self.sector
    }

    pub fn dimension(&self) -> usize {
        self.curvature.len()
    }

    /// Ω(n) = V″(φ_n).
    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.curvature
            .iter()
            .map(|w| w + 2.0 * self.coupling)
            .collect()
    }

    /// Value on both adjacent bands.
    pub fn off_diagonal(&self) -> f64 {
        -self.coupling
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dimension();
        let diag = self.diagonal();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if i.abs_diff(j) == 1 {
                -self.coupling
            } else {
                0.0
            }
        })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dimension();
        let g = self.coupling;
        (0..n)
            .map(|i| {
                let left = if i > 0 { v[i - 1] } else { 0.0 };
                let right = if i + 1 < n { v[i + 1] } else { 0.0 };
                (self.curvature[i] + 2.0 * g) * v[i] - g * (left + right)
            })
            .collect()
    }

    /// Max-row-sum norm.
    pub fn norm_inf(&self) -> f64 {
        let n = self.dimension();
        let g = self.coupling.abs();
        (0..n)
            .map(|i| {
                let neighbours = (i > 0) as u8 + (i + 1 < n) as u8;
                (self.curvature[i] + 2.0 * self.coupling).abs() + g * neighbours as f64
            })
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// ψᵀBψ / ψᵀψ with compensated accumulation. The diagonal is never
    /// rounded to `Ω + 2g`; the coupling enters through the Dirichlet form
    /// g·(ψ_0² + Σ(ψ_{n+1} − ψ_n)² + ψ_N²).
    pub fn rayleigh_quotient(&self, psi: &[f64]) -> f64 {
        let n = psi.len();
        let mut onsite = Accumulator::new();
        let mut gradient = Accumulator::new();
        let mut norm = Accumulator::new();
        for (&x, &c) in psi.iter().zip(&self.curvature) {
            let (sq, sq_err) = two_prod(x, x);
            norm.add(sq);
            norm.add(sq_err);
            onsite.add_prod(c, sq);
            onsite.add(c * sq_err);
        }
        gradient.add_prod(psi[0], psi[0]);
        gradient.add_prod(psi[n - 1], psi[n - 1]);
        for w in psi.windows(2) {
            let (s, e) = two_sum(w[1], -w[0]);
            gradient.add_prod(s, s);
            gradient.add(2.0 * s * e + e * e);
        }
        let (ghi, glo) = gradient.parts();
        onsite.add_prod(self.coupling, ghi);
        onsite.add(self.coupling * glo);
        onsite.value() / norm.value()
    }
}

pub fn build_hessian(config: &FieldConfiguration) -> HessianMatrix {
    let a = config.params().a();
    let curvature = config.phi().iter().map(|&p| d2_unchecked(p, a)).collect();
    HessianMatrix::new(curvature, config.params().g()).with_sector(config.kind())
}

/// Normal modes sorted by ascending frequency. Column k of `modes` is ψ_k,
/// with the first non-negligible component positive.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalModes {
    omega_sq: Vec<f64>,
    omega: Vec<f64>,
    modes: DMatrix<f64>,
    sector: Option<Sector>,
}

impl NormalModes {
    pub fn omega_sq(&self) -> &[f64] {
        &self.omega_sq
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn sector(&self) -> Option<Sector> {
        self.sector
    }

    pub fn mode(&self, k: usize) -> DVector<f64> {
        self.modes.column(k).into_owned()
    }

    /// Indices of modes with ω² ≤ [`SOFT_MODE_THRESHOLD`].
    pub fn soft_modes(&self) -> Vec<usize> {
        self.omega_sq
            .iter()
            .take_while(|&&w2| w2 <= SOFT_MODE_THRESHOLD)
            .enumerate()
            .map(|(k, _)| k)
            .collect()
    }
}

/// Full eigendecomposition of the Hessian.
///
/// Eigenvalues from the QL sweep carry an absolute error of order
/// ε·‖B‖; each one is then replaced by the compensated Rayleigh quotient of
/// its eigenvector, which resolves near-zero translation modes.
pub fn eigendecompose(hessian: &HessianMatrix) -> Result<NormalModes, SpectralError> {
    let n = hessian.dimension();
    let mut diag = hessian.diagonal();
    let mut off = vec![hessian.off_diagonal(); n];
    off[n - 1] = 0.0;
    let mut vectors = DMatrix::<f64>::identity(n, n);
    tql2(&mut diag, &mut off, &mut vectors)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));

    let mut modes = DMatrix::<f64>::zeros(n, n);
    let mut omega_sq = Vec::with_capacity(n);
    for (k, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = vectors.column(src).iter().copied().collect();
        let flip = col
            .iter()
            .find(|x| x.abs() > 1e-12)
            .is_some_and(|x| *x < 0.0);
        if flip {
            col.iter_mut().for_each(|x| *x = -*x);
        }
        omega_sq.push(hessian.rayleigh_quotient(&col));
        modes.set_column(k, &DVector::from_vec(col));
    }

    // refinement can reorder nearly degenerate pairs by a few ulps
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| omega_sq[i].total_cmp(&omega_sq[j]));
    if order.iter().enumerate().any(|(k, &i)| k != i) {
        let sorted_sq: Vec<f64> = order.iter().map(|&i| omega_sq[i]).collect();
        let sorted_modes = DMatrix::from_fn(n, n, |r, c| modes[(r, order[c])]);
        omega_sq = sorted_sq;
        modes = sorted_modes;
    }

    if let Some((mode, &w2)) = omega_sq
        .iter()
        .enumerate()
        .find(|(_, &w2)| w2.is_nan() || w2 <= 0.0)
    {
        return Err(SpectralError::Instability { mode, omega_sq: w2 });
    }
    let omega = omega_sq.iter().map(|w2| w2.sqrt()).collect();
    Ok(NormalModes {
        omega_sq,
        omega,
        modes,
        sector: hessian.sector(),
    })
}

/// Ground-state energy of the quadratic Hamiltonian, ½Σω_k.
pub fn zero_point_energy(modes: &NormalModes) -> f64 {
    let mut acc = Accumulator::new();
    modes.omega().iter().for_each(|&w| acc.add(w));
    0.5 * acc.value()
}

/// Implicit QL with Wilkinson-type shifts for a symmetric tridiagonal matrix
/// (EISPACK `tql2`). `off[i]` couples rows `i` and `i + 1`; `off[n-1]` must
/// be zero on entry. On exit `diag` holds the eigenvalues (unsorted) and
/// the columns of `z` the eigenvectors.
fn tql2(diag: &mut [f64], off: &mut [f64], z: &mut DMatrix<f64>) -> Result<(), SpectralError> {
    let n = diag.len();
    let eps = f64::EPSILON;
    let mut shift = 0.0;
    let mut tst1: f64 = 0.0;

    for l in 0..n {
        tst1 = tst1.max(diag[l].abs() + off[l].abs());
        let mut m = l;
        while m < n - 1 && off[m].abs() > eps * tst1 {
            m += 1;
        }

        if m > l {
            let mut iterations = 0;
            loop {
                iterations += 1;
                if iterations > 60 {
                    return Err(SpectralError::NoConvergence { index: l });
                }
                let g = diag[l];
                let mut p = (diag[l + 1] - g) / (2.0 * off[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                diag[l] = off[l] / (p + r);
                diag[l + 1] = off[l] * (p + r);
                let dl1 = diag[l + 1];
                let h = g - diag[l];
                for d in diag.iter_mut().skip(l + 2) {
                    *d -= h;
                }
                shift += h;

                p = diag[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = off[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * off[i];
                    let h = c * p;
                    r = p.hypot(off[i]);
                    off[i + 1] = s * r;
                    s = off[i] / r;
                    c = p / r;
                    p = c * diag[i] - s * g;
                    diag[i + 1] = h + s * (c * g + s * diag[i]);

                    let (mut left, mut right) = z.columns_range_pair_mut(i, i + 1);
                    for (zl, zr) in left.iter_mut().zip(right.iter_mut()) {
                        let h = *zr;
                        *zr = s * *zl + c * h;
                        *zl = c * *zl - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * off[l] / dl1;
                off[l] = s * p;
                diag[l] = c * p;
                if off[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        diag[l] += shift;
        off[l] = 0.0;
    }
    Ok(())
}
