//! Ground-state correlations and bipartite entanglement of the quadratic
//! fluctuation Hamiltonian.
//!
//! In the Fock vacuum of the normal modes
//!
//! ```text
//! ⟨η(m)η(n)⟩ = ½ Σ_l ψ_l(m)ψ_l(n)/ω_l        ⟨π(m)π(n)⟩ = ½ Σ_l ω_l ψ_l(m)ψ_l(n)
//! ```
//!
//! and the position–momentum block vanishes. For a left-anchored block of
//! `ℓ` sites the symplectic eigenvalues are λ_j = √eig(X_A·P_A).
//!
//! They are computed from the mode-space factors `X = FFᵀ`, `P = GGᵀ` with
//! `F = Ψ·(2Ω)^{-1/2}` and `G = Ψ·(Ω/2)^{1/2}`. If `Fᵀ = Q_F R_F` and
//! `Gᵀ = Q_G R_G`, the leading `ℓ × ℓ` blocks of the triangular factors
//! satisfy `X_A = R_AᵀR_A`, so λ_j are the singular values of
//! `R_F[..ℓ, ..ℓ]·R_G[..ℓ, ..ℓ]ᵀ`. This keeps λ accurate to ~1e-11 even when
//! a soft translation mode makes `‖X‖·‖P‖` of order 10⁷, where forming
//! `X_A·P_A` directly loses about 3e-9.

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::{NormalModes, SpectralError};
use crate::statics::Sector;

/// Symplectic eigenvalues below ½ by less than this are rounding noise.
pub const PURITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaussianError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("block length {length} outside 1..={sites}")]
    BlockLength { length: usize, sites: usize },
    #[error("anchor site {site} outside 0..{sites}")]
    AnchorOutOfRange { site: usize, sites: usize },
    #[error("symplectic eigenvalue {lambda:.12} < 1/2 for block length {length}")]
    NumericalDegeneracy { length: usize, lambda: f64 },
    #[error("Schur iteration for J*M stalled at block length {length}")]
    SchurStalled { length: usize },
}

#[derive(Debug, Clone)]
pub struct CovarianceData {
    /// ⟨η(m)η(n)⟩
    pub xpos: DMatrix<f64>,
    /// ⟨π(m)π(n)⟩
    pub ppos: DMatrix<f64>,
    x_factor: DMatrix<f64>,
    p_factor: DMatrix<f64>,
    sector: Option<Sector>,
}

impl CovarianceData {
    pub fn n_sites(&self) -> usize {
        self.xpos.nrows()
    }

    pub fn sector(&self) -> Option<Sector> {
        self.sector
    }

    /// Upper-triangular `R` with `xpos = RᵀR`.
    pub fn position_factor(&self) -> &DMatrix<f64> {
        &self.x_factor
    }

    /// Upper-triangular `R` with `ppos = RᵀR`.
    pub fn momentum_factor(&self) -> &DMatrix<f64> {
        &self.p_factor
    }
}

pub fn covariance(modes: &NormalModes) -> Result<CovarianceData, GaussianError> {
    if let Some((mode, &w)) = modes
        .omega()
        .iter()
        .enumerate()
        .find(|(_, &w)| w.is_nan() || w <= 0.0)
    {
        return Err(SpectralError::Instability {
            mode,
            omega_sq: w * w,
        }
        .into());
    }
    let psi = modes.modes();
    let n = psi.nrows();
    let mut f = psi.clone();
    let mut g = psi.clone();
    for (k, &w) in modes.omega().iter().enumerate() {
        f.column_mut(k).scale_mut(1.0 / (2.0 * w).sqrt());
        g.column_mut(k).scale_mut((0.5 * w).sqrt());
    }
    let xpos = symmetrized(&f * f.transpose());
    let ppos = symmetrized(&g * g.transpose());
    let x_factor = f.transpose().qr().r();
    let p_factor = g.transpose().qr().r();
    debug_assert_eq!(x_factor.shape(), (n, n));
    Ok(CovarianceData {
        xpos,
        ppos,
        x_factor,
        p_factor,
        sector: modes.sector(),
    })
}

fn symmetrized(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Row `m` of the position correlations re-indexed by separation:
/// entry `n` is ξ_{m, m+n} for `n = 0..=N−m`.
pub fn correlation_profile(cov: &CovarianceData, m: usize) -> Result<Vec<f64>, GaussianError> {
    let sites = cov.n_sites();
    if m >= sites {
        return Err(GaussianError::AnchorOutOfRange { site: m, sites });
    }
    Ok((m..sites).map(|j| cov.xpos[(m, j)]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymplecticSpectrum {
    /// λ_j ≥ ½, ascending.
    pub lambdas: Vec<f64>,
    /// n̄_j = λ_j − ½.
    pub mean_phonons: Vec<f64>,
}

impl SymplecticSpectrum {
    /// Clamps values in `[½ − tol, ½)` up to ½; anything lower is an error.
    pub fn from_raw(mut raw: Vec<f64>, length: usize) -> Result<Self, GaussianError> {
        raw.sort_by(f64::total_cmp);
        if let Some(&lambda) = raw.first() {
            if lambda.is_nan() || lambda < 0.5 - PURITY_TOLERANCE {
                return Err(GaussianError::NumericalDegeneracy { length, lambda });
            }
        }
        let lambdas: Vec<f64> = raw.into_iter().map(|l| l.max(0.5)).collect();
        let mean_phonons = lambdas.iter().map(|l| l - 0.5).collect();
        Ok(SymplecticSpectrum {
            lambdas,
            mean_phonons,
        })
    }
}

fn check_length(cov: &CovarianceData, length: usize) -> Result<(), GaussianError> {
    let sites = cov.n_sites();
    if length == 0 || length > sites {
        Err(GaussianError::BlockLength { length, sites })
    } else {
        Ok(())
    }
}

/// Unclamped λ_j of the block of sites `0..length`, in no particular order.
pub fn raw_symplectic_eigenvalues(
    cov: &CovarianceData,
    length: usize,
) -> Result<Vec<f64>, GaussianError> {
    check_length(cov, length)?;
    let rx = cov.x_factor.view((0, 0), (length, length));
    let rp = cov.p_factor.view((0, 0), (length, length));
    let w = rx * rp.transpose();
    Ok(w.singular_values().iter().copied().collect())
}

/// Symplectic spectrum of the left-anchored block of `length` sites.
pub fn symplectic_eigenvalues(
    cov: &CovarianceData,
    length: usize,
) -> Result<SymplecticSpectrum, GaussianError> {
    SymplecticSpectrum::from_raw(raw_symplectic_eigenvalues(cov, length)?, length)
}

/// The same spectrum through the generic route: moduli of the eigenvalues
/// of `J·M_A`, where `M_A = diag(X_A, P_A)` in (η, π) ordering and
/// `J = [[0, 1], [−1, 0]]`. Each modulus appears twice; pairs are averaged.
/// Cubic in `2ℓ` on a non-symmetric matrix, so meant for cross-checks.
pub fn williamson_moduli(cov: &CovarianceData, length: usize) -> Result<Vec<f64>, GaussianError> {
    check_length(cov, length)?;
    let l = length;
    let mut jm = DMatrix::<f64>::zeros(2 * l, 2 * l);
    jm.view_mut((0, l), (l, l))
        .copy_from(&cov.ppos.view((0, 0), (l, l)));
    jm.view_mut((l, 0), (l, l))
        .copy_from(&(-cov.xpos.view((0, 0), (l, l))));
    let schur =
        Schur::try_new(jm, f64::EPSILON, 10_000).ok_or(GaussianError::SchurStalled { length })?;
    let mut moduli: Vec<f64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect();
    moduli.sort_by(f64::total_cmp);
    Ok(moduli.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect())
}

/// S(λ) = (λ+½)ln(λ+½) − (λ−½)ln(λ−½), with x·ln x → 0 at x = 0.
pub fn mode_entropy(lambda: f64) -> f64 {
    let xlnx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    xlnx(lambda + 0.5) - xlnx(lambda - 0.5)
}

pub fn entanglement_entropy(spectrum: &SymplecticSpectrum) -> f64 {
    spectrum.lambdas.iter().map(|&l| mode_entropy(l)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyScan {
    pub lengths: Vec<usize>,
    pub entropy: Vec<f64>,
    pub spectra: Vec<SymplecticSpectrum>,
    pub sector: Option<Sector>,
}

impl EntropyScan {
    pub fn at(&self, length: usize) -> Option<f64> {
        self.lengths
            .iter()
            .position(|&l| l == length)
            .map(|i| self.entropy[i])
    }

    /// Block length of the global maximum.
    pub fn argmax(&self) -> usize {
        let i = (0..self.entropy.len())
            .max_by(|&i, &j| self.entropy[i].total_cmp(&self.entropy[j]))
            .expect("empty scan");
        self.lengths[i]
    }

    /// The `count` highest interior local maxima, returned by ascending
    /// block length.
    pub fn maxima(&self, count: usize) -> Vec<usize> {
        let e = &self.entropy;
        let mut peaks: Vec<usize> = (1..e.len().saturating_sub(1))
            .filter(|&i| e[i] > e[i - 1] && e[i] >= e[i + 1])
            .collect();
        peaks.sort_by(|&i, &j| e[j].total_cmp(&e[i]));
        peaks.truncate(count);
        let mut out: Vec<usize> = peaks.into_iter().map(|i| self.lengths[i]).collect();
        out.sort_unstable();
        out
    }

    /// Block length of the smallest entropy strictly between two lengths.
    pub fn minimum_between(&self, lo: usize, hi: usize) -> Option<usize> {
        (0..self.lengths.len())
            .filter(|&i| self.lengths[i] > lo && self.lengths[i] < hi)
            .min_by(|&i, &j| self.entropy[i].total_cmp(&self.entropy[j]))
            .map(|i| self.lengths[i])
    }
}

/// `1, 1 + stride, 1 + 2·stride, …` up to `n_sites`.
pub fn scan_lengths(n_sites: usize, stride: usize) -> Vec<usize> {
    (1..=n_sites).step_by(stride.max(1)).collect()
}

pub fn entropy_scan(modes: &NormalModes, lengths: &[usize]) -> Result<EntropyScan, GaussianError> {
    entropy_scan_covariance(&covariance(modes)?, lengths)
}

/// Block lengths are independent and evaluated in parallel; results keep the
/// order of `lengths`.
pub fn entropy_scan_covariance(
    cov: &CovarianceData,
    lengths: &[usize],
) -> Result<EntropyScan, GaussianError> {
    let spectra = lengths
        .par_iter()
        .map(|&l| symplectic_eigenvalues(cov, l))
        .collect::<Result<Vec<_>, _>>()?;
    let entropy = spectra.iter().map(entanglement_entropy).collect();
    Ok(EntropyScan {
        lengths: lengths.to_vec(),
        entropy,
        spectra,
        sector: cov.sector(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::ModelParams;
    use crate::spectral::{build_hessian, eigendecompose, HessianMatrix};
    use crate::statics::{solve_kink, vacuum_configuration};

    fn vacuum_modes(sites: usize, g: f64, a: f64) -> NormalModes {
        let p = ModelParams::new(sites, g, a).unwrap();
        eigendecompose(&build_hessian(&vacuum_configuration(&p))).unwrap()
    }

    #[test]
    fn single_mode_covariance() {
        let modes = eigendecompose(&HessianMatrix::new(vec![5.0], 2.0)).unwrap();
        let w = 3.0;
        let cov = covariance(&modes).unwrap();
        assert!((cov.xpos[(0, 0)] - 1.0 / (2.0 * w)).abs() < 1e-15);
        assert!((cov.ppos[(0, 0)] - w / 2.0).abs() < 1e-15);
        let spec = symplectic_eigenvalues(&cov, 1).unwrap();
        assert!((spec.lambdas[0] - 0.5).abs() < 1e-15);
        assert_eq!(entanglement_entropy(&spec), 0.0);
    }

    #[test]
    fn mode_entropy_values() {
        assert_eq!(mode_entropy(0.5), 0.0);
        assert!((mode_entropy(1.5) - 2.0 * 2f64.ln()).abs() < 1e-15);
        // thermal-state form with n̄ = λ − ½
        for nbar in [0.1, 1.0, 7.5] {
            let thermal = (nbar + 1.0) * f64::ln(nbar + 1.0) - nbar * f64::ln(nbar);
            assert!((mode_entropy(0.5 + nbar) - thermal).abs() < 1e-13);
        }
    }

    #[test]
    fn clamping_rules() {
        let s = SymplecticSpectrum::from_raw(vec![0.7, 0.5 - 1e-10], 2).unwrap();
        assert_eq!(s.lambdas, vec![0.5, 0.7]);
        assert_eq!(s.mean_phonons[0], 0.0);
        assert!(matches!(
            SymplecticSpectrum::from_raw(vec![0.49], 1),
            Err(GaussianError::NumericalDegeneracy { .. })
        ));
    }

    #[test]
    fn argument_validation() {
        let cov = covariance(&vacuum_modes(11, 10.0, 0.0)).unwrap();
        assert!(matches!(
            symplectic_eigenvalues(&cov, 0),
            Err(GaussianError::BlockLength { .. })
        ));
        assert!(matches!(
            symplectic_eigenvalues(&cov, 12),
            Err(GaussianError::BlockLength { .. })
        ));
        assert!(matches!(
            correlation_profile(&cov, 11),
            Err(GaussianError::AnchorOutOfRange { .. })
        ));
        assert_eq!(correlation_profile(&cov, 10).unwrap().len(), 1);
    }

    #[test]
    fn uncertainty_bound_on_blocks() {
        let modes = vacuum_modes(11, 10.0, 0.6);
        let cov = covariance(&modes).unwrap();
        let full = &cov.xpos * &cov.ppos;
        let quarter = DMatrix::<f64>::identity(11, 11) * 0.25;
        assert!((full - quarter).abs().max() < 1e-12);
        // eig(X_A P_A) = eig(LᵀP_A L) with X_A = LLᵀ
        for l in 1..=11 {
            let xa = cov.xpos.view((0, 0), (l, l)).into_owned();
            let pa = cov.ppos.view((0, 0), (l, l)).into_owned();
            let chol = xa.cholesky().unwrap().l();
            let sym = chol.transpose() * pa * chol;
            for ev in sym.symmetric_eigenvalues().iter() {
                assert!(*ev >= 0.25 - 1e-12);
            }
        }
    }

    #[test]
    fn dual_routes_agree_on_small_chain() {
        let p = ModelParams::new(11, 5.0, 0.6).unwrap();
        for config in [vacuum_configuration(&p), solve_kink(&p).unwrap()] {
            let cov = covariance(&eigendecompose(&build_hessian(&config)).unwrap()).unwrap();
            let spec = symplectic_eigenvalues(&cov, 5).unwrap();
            let jm = williamson_moduli(&cov, 5).unwrap();
            for (x, y) in spec.lambdas.iter().zip(&jm) {
                assert!((x - y.max(0.5)).abs() < 1e-10, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn scan_lengths_and_peaks() {
        assert_eq!(scan_lengths(10, 3), vec![1, 4, 7, 10]);
        assert_eq!(scan_lengths(3, 1), vec![1, 2, 3]);
        let scan = EntropyScan {
            lengths: vec![1, 2, 3, 4, 5, 6, 7],
            entropy: vec![0.0, 2.0, 1.0, 1.5, 1.2, 3.0, 0.0],
            spectra: vec![],
            sector: None,
        };
        assert_eq!(scan.argmax(), 6);
        assert_eq!(scan.maxima(2), vec![2, 6]);
        assert_eq!(scan.minimum_between(2, 6), Some(3));
        assert_eq!(scan.at(4), Some(1.5));
    }
}
