//! Singular value decomposition `X = V Λ Wᵀ` and the objects built from it:
//! eigen-observations (columns of `W`), eigen-observables (columns of `V`),
//! whitening, eigen-mappings and the quasi square roots `H = ΛWᵀ`,
//! `H′ = VΛ`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::TrainingMatrix;
use crate::linalg;

/// Default relative cutoff on singular values: `λ_i > τ·λ_1` is retained.
pub const DEFAULT_SVD_CUTOFF: f64 = 1e-10;

/// Truncated SVD factors with a fixed ordering and sign convention.
///
/// Singular values are non-increasing. In every column of `W` the entry of
/// largest magnitude is positive (the lowest index wins a tie) and the
/// matching column of `V` is flipped with it.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    v: DMatrix<f64>,
    lambdas: DVector<f64>,
    w: DMatrix<f64>,
    spectrum: DVector<f64>,
    m_rank: usize,
    tau: f64,
}

/// Which algorithm produced the factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvdMethod {
    /// One-sided bidiagonalization of `X` itself.
    Direct,
    /// Eigendecomposition of the smaller Gram matrix. Cheaper for very tall
    /// matrices but loses relative accuracy in the small singular values.
    GramEigen,
}

impl SvdFactors {
    /// `P × M` left singular vectors (eigen-observables).
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// Retained singular values `λ_1 ≥ … ≥ λ_M > τ·λ_1`.
    pub fn lambdas(&self) -> &DVector<f64> {
        &self.lambdas
    }

    /// `N × M` right singular vectors (eigen-observations).
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// All `min(P, N)` singular values, including those below the cutoff.
    pub fn spectrum(&self) -> &DVector<f64> {
        &self.spectrum
    }

    pub fn m_rank(&self) -> usize {
        self.m_rank
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn p(&self) -> usize {
        self.v.nrows()
    }

    pub fn n_obs(&self) -> usize {
        self.w.nrows()
    }

    pub fn total_energy(&self) -> f64 {
        self.spectrum.iter().map(|l| l * l).sum()
    }

    /// `Σ_{i>n} λ_i²`, the minimal rank-`n` reconstruction error.
    pub fn tail_energy(&self, n: usize) -> f64 {
        self.spectrum.iter().skip(n).map(|l| l * l).sum()
    }

    /// `Σ_{i≤n} λ_i² / Σ_i λ_i²`.
    pub fn energy_retention(&self, n: usize) -> f64 {
        let total = self.total_energy();
        if total == 0.0 {
            return 1.0;
        }
        self.spectrum.iter().take(n).map(|l| l * l).sum::<f64>() / total
    }

    /// `V̂`, `Λ̂`, `Ŵ` restricted to the leading `n` modes.
    pub fn leading(&self, n: usize) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
        if n > self.m_rank {
            return Err(Error::RankTooLarge {
                requested: n,
                available: self.m_rank,
            });
        }
        Ok((
            self.v.columns(0, n).into_owned(),
            self.lambdas.rows(0, n).into_owned(),
            self.w.columns(0, n).into_owned(),
        ))
    }

    /// `V Λ Wᵀ` over the retained modes.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.v * DMatrix::from_diagonal(&self.lambdas) * self.w.transpose()
    }
}

fn assemble(
    mut v: DMatrix<f64>,
    spectrum: DVector<f64>,
    mut w: DMatrix<f64>,
    tau: f64,
) -> SvdFactors {
    let top = spectrum.get(0).copied().unwrap_or(0.0);
    let m_rank = if top > 0.0 {
        spectrum.iter().take_while(|&&l| l > tau * top).count()
    } else {
        0
    };
    v = v.columns(0, m_rank).into_owned();
    w = w.columns(0, m_rank).into_owned();
    for j in 0..m_rank {
        let mut best = 0;
        for i in 1..w.nrows() {
            if w[(i, j)].abs() > w[(best, j)].abs() {
                best = i;
            }
        }
        if w[(best, j)] < 0.0 {
            w.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
    let lambdas = spectrum.rows(0, m_rank).into_owned();
    SvdFactors {
        v,
        lambdas,
        w,
        spectrum,
        m_rank,
        tau,
    }
}

/// SVD of a training matrix with relative cutoff `tau`.
pub fn svd(x: &TrainingMatrix, tau: f64) -> Result<SvdFactors> {
    svd_matrix(x.values(), tau)
}

pub fn svd_matrix(x: &DMatrix<f64>, tau: f64) -> Result<SvdFactors> {
    svd_with(x, tau, SvdMethod::Direct)
}

pub fn svd_with(x: &DMatrix<f64>, tau: f64, method: SvdMethod) -> Result<SvdFactors> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "cutoff must be non-negative, got {tau}"
        )));
    }
    match method {
        SvdMethod::Direct => {
            let (u, s, vt) = linalg::thin_svd(x)?;
            Ok(assemble(u, s, vt, tau))
        }
        SvdMethod::GramEigen => svd_via_gram(x, tau),
    }
}

fn svd_via_gram(x: &DMatrix<f64>, tau: f64) -> Result<SvdFactors> {
    let (p, n) = x.shape();
    let k = p.min(n);
    let tall = p >= n;
    let gram = if tall {
        x.transpose() * x
    } else {
        x * x.transpose()
    };
    let (eigvals, eigvecs) = linalg::symmetric_eigen_desc(&gram);
    if eigvals.iter().any(|v| !v.is_finite()) {
        return Err(Error::ConvergenceFailure);
    }
    let spectrum = DVector::from_fn(k, |i, _| eigvals[i].max(0.0).sqrt());
    let top = spectrum.get(0).copied().unwrap_or(0.0);
    let usable = if top > 0.0 {
        spectrum.iter().take_while(|&&l| l > tau * top).count()
    } else {
        0
    };
    let basis = eigvecs.columns(0, k).into_owned();
    let mut other = if tall {
        x * &basis
    } else {
        x.transpose() * &basis
    };
    for j in 0..k {
        if j < usable {
            let s = 1.0 / spectrum[j];
            other.column_mut(j).scale_mut(s);
        } else {
            other.column_mut(j).fill(0.0);
        }
    }
    let (v, w) = if tall { (other, basis) } else { (basis, other) };
    Ok(assemble(v, spectrum, w, tau))
}

/// Eigen-observations `w_i` (columns) and eigenvalues `λ_i²` of `G`.
pub fn eigen_observations(f: &SvdFactors) -> (DMatrix<f64>, DVector<f64>) {
    (f.w.clone(), f.lambdas.map(|l| l * l))
}

/// Eigen-observables `v_i` (columns), eigenvectors of `G′`.
pub fn eigen_observables(f: &SvdFactors) -> DMatrix<f64> {
    f.v.clone()
}

/// Whitening `X W Λ⁻¹` over the retained modes (`P × M`).
pub fn whiten(x: &TrainingMatrix, f: &SvdFactors) -> Result<DMatrix<f64>> {
    if f.m_rank == 0 {
        return Err(Error::RankTooLarge {
            requested: 1,
            available: 0,
        });
    }
    crate::error::check_len(f.n_obs(), x.n_obs())?;
    let inv = DMatrix::from_diagonal(&f.lambdas.map(|l| 1.0 / l));
    Ok(x.values() * &f.w * inv)
}

/// De-whitening `Y Λ Wᵀ`: maps whitened rows back to observations.
pub fn dewhiten(y: &DMatrix<f64>, f: &SvdFactors) -> Result<DMatrix<f64>> {
    crate::error::check_len(f.m_rank, y.ncols())?;
    Ok(y * DMatrix::from_diagonal(&f.lambdas) * f.w.transpose())
}

/// Eigen-mapping `X w_i` (0-based `i`). Indices past the retained rank but
/// within `N` belong to the null space of `X` and map to zero.
pub fn eigen_mapping(x: &TrainingMatrix, f: &SvdFactors, i: usize) -> Result<DVector<f64>> {
    if i >= x.n_obs() {
        return Err(Error::IndexOutOfRank {
            index: i,
            len: x.n_obs(),
        });
    }
    if i >= f.m_rank {
        return Ok(DVector::zeros(x.p()));
    }
    Ok(x.values() * f.w.column(i))
}

/// Quasi square roots `H = ΛWᵀ` (`M × N`) and `H′ = VΛ` (`P × M`), with
/// `HᵀH = G` and `H′H′ᵀ = G′`.
pub fn quasi_sqrt(f: &SvdFactors) -> (DMatrix<f64>, DMatrix<f64>) {
    let lam = DMatrix::from_diagonal(&f.lambdas);
    (&lam * f.w.transpose(), &f.v * lam)
}

/// Truncated quasi square roots `Ĥ = Λ̂Ŵᵀ`, `Ĥ′ = V̂Λ̂`.
pub fn quasi_sqrt_truncated(f: &SvdFactors, n: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (v, l, w) = f.leading(n)?;
    let lam = DMatrix::from_diagonal(&l);
    Ok((&lam * w.transpose(), v * lam))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TopEigenvalueCheck {
    pub observed_mean: f64,
    pub predicted: f64,
}

impl TopEigenvalueCheck {
    pub fn ratio(&self) -> f64 {
        self.observed_mean / self.predicted
    }
}

/// Mean largest singular value of `trials` seeded `p × n` standard Gaussian
/// matrices, against the asymptotic `√N + √P`.
pub fn top_eigenvalue_asymptotic(
    n: usize,
    p: usize,
    trials: usize,
    seed: u64,
) -> Result<TopEigenvalueCheck> {
    if n == 0 || p == 0 || trials == 0 {
        return Err(Error::InvalidInput(
            "dimensions and trial count must be positive".into(),
        ));
    }
    let mut rng = linalg::rng(seed);
    let mut sum = 0.0;
    for _ in 0..trials {
        let g = linalg::gaussian_matrix(p, n, &mut rng);
        let (_, s, _) = linalg::thin_svd(&g)?;
        sum += s[0];
    }
    Ok(TopEigenvalueCheck {
        observed_mean: sum / trials as f64,
        predicted: (n as f64).sqrt() + (p as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub lambda: f64,
    pub lambda_sq: f64,
    pub cumulative_energy: f64,
}

/// One row per singular value, 1-based index.
pub fn spectrum_table(f: &SvdFactors) -> Vec<SpectrumRow> {
    let total = f.total_energy();
    let mut acc = 0.0;
    f.spectrum
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            acc += l * l;
            SpectrumRow {
                index: i + 1,
                lambda: l,
                lambda_sq: l * l,
                cumulative_energy: if total > 0.0 { acc / total } else { 1.0 },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_diff, orthonormality_defect};

    fn hand() -> TrainingMatrix {
        TrainingMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 2.0, 0.0, 0.0]).unwrap()
    }

    fn random(p: usize, n: usize, seed: u64) -> TrainingMatrix {
        let mut r = linalg::rng(seed);
        TrainingMatrix::from_matrix(linalg::gaussian_matrix(p, n, &mut r)).unwrap()
    }

    #[test]
    fn hand_svd() {
        let f = svd(&hand(), DEFAULT_SVD_CUTOFF).unwrap();
        assert_eq!(f.m_rank(), 2);
        assert!((f.lambdas()[0] - 3.0).abs() < 1e-14);
        assert!((f.lambdas()[1] - 2.0).abs() < 1e-14);
        assert!(frobenius_diff(f.w(), &DMatrix::identity(2, 2)) < 1e-14);
        let v_expected = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(frobenius_diff(f.v(), &v_expected) < 1e-14);
    }

    #[test]
    fn zero_matrix_has_no_modes() {
        let x = TrainingMatrix::from_matrix(DMatrix::zeros(4, 3)).unwrap();
        let f = svd(&x, DEFAULT_SVD_CUTOFF).unwrap();
        assert_eq!(f.m_rank(), 0);
        assert_eq!(f.v().ncols(), 0);
        assert_eq!(f.lambdas().len(), 0);
        assert!(whiten(&x, &f).is_err());
    }

    #[test]
    fn invariants_on_random() {
        for (seed, (p, n)) in [(40, 17), (17, 40), (25, 25)].into_iter().enumerate() {
            let x = random(p, n, seed as u64);
            let f = svd(&x, DEFAULT_SVD_CUTOFF).unwrap();
            assert!(orthonormality_defect(f.v()) < 1e-10);
            assert!(orthonormality_defect(f.w()) < 1e-10);
            assert!(frobenius_diff(&f.reconstruct(), x.values()) <= 1e-8 * x.values().norm());
            assert!(f.lambdas().as_slice().windows(2).all(|w| w[0] >= w[1]));
            for j in 0..f.m_rank() {
                let col = f.w().column(j);
                let imax = col.iamax();
                assert!(col[imax] > 0.0);
            }
        }
    }

    #[test]
    fn gram_route_agrees_with_direct() {
        let x = random(30, 12, 3);
        let a = svd_with(x.values(), DEFAULT_SVD_CUTOFF, SvdMethod::Direct).unwrap();
        let b = svd_with(x.values(), DEFAULT_SVD_CUTOFF, SvdMethod::GramEigen).unwrap();
        assert_eq!(a.m_rank(), b.m_rank());
        assert!((a.lambdas() - b.lambdas()).norm() < 1e-10 * a.lambdas()[0]);
        assert!(frobenius_diff(a.w(), b.w()) < 1e-8);
        assert!(frobenius_diff(a.v(), b.v()) < 1e-8);

        let wide = random(9, 21, 4);
        let a = svd_with(wide.values(), DEFAULT_SVD_CUTOFF, SvdMethod::Direct).unwrap();
        let b = svd_with(wide.values(), DEFAULT_SVD_CUTOFF, SvdMethod::GramEigen).unwrap();
        assert!(frobenius_diff(a.v(), b.v()) < 1e-8);
    }

    #[test]
    fn whitening_round_trip() {
        let x = random(20, 6, 11);
        let f = svd(&x, DEFAULT_SVD_CUTOFF).unwrap();
        let y = whiten(&x, &f).unwrap();
        assert!(orthonormality_defect(&y) < 1e-10);
        assert!(frobenius_diff(&dewhiten(&y, &f).unwrap(), x.values()) < 1e-8 * x.values().norm());

        let hand = hand();
        let f = svd(&hand, DEFAULT_SVD_CUTOFF).unwrap();
        assert!(frobenius_diff(&whiten(&hand, &f).unwrap(), f.v()) < 1e-14);
    }

    #[test]
    fn eigen_mappings() {
        let x = hand();
        let f = svd(&x, DEFAULT_SVD_CUTOFF).unwrap();
        let m = eigen_mapping(&x, &f, 0).unwrap();
        assert!((m - DVector::from_vec(vec![3.0, 0.0, 0.0])).norm() < 1e-14);
        assert!(matches!(
            eigen_mapping(&x, &f, 2),
            Err(Error::IndexOutOfRank { .. })
        ));

        let deficient = TrainingMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]).unwrap();
        let f = svd(&deficient, DEFAULT_SVD_CUTOFF).unwrap();
        assert_eq!(f.m_rank(), 1);
        assert_eq!(eigen_mapping(&deficient, &f, 1).unwrap(), DVector::zeros(2));
    }

    #[test]
    fn quasi_roots() {
        let x = random(15, 7, 5);
        let f = svd(&x, DEFAULT_SVD_CUTOFF).unwrap();
        let (h, hp) = quasi_sqrt(&f);
        let g = x.values().transpose() * x.values();
        let gp = x.values() * x.values().transpose();
        assert!(frobenius_diff(&(h.transpose() * &h), &g) < 1e-10 * g.norm());
        assert!(frobenius_diff(&(&hp * hp.transpose()), &gp) < 1e-10 * gp.norm());
        let (ht, hpt) = quasi_sqrt_truncated(&f, 3).unwrap();
        let lam2 = DMatrix::from_diagonal(&f.lambdas().rows(0, 3).map(|l| l * l));
        assert!(frobenius_diff(&(&ht * ht.transpose()), &lam2) < 1e-10 * lam2.norm());
        assert!(frobenius_diff(&(hpt.transpose() * &hpt), &lam2) < 1e-10 * lam2.norm());
    }

    #[test]
    fn spectrum_accounting() {
        let f = svd(&hand(), DEFAULT_SVD_CUTOFF).unwrap();
        assert!((f.energy_retention(1) - 9.0 / 13.0).abs() < 1e-15);
        assert!((f.tail_energy(1) - 4.0).abs() < 1e-13);
        let rows = spectrum_table(&f);
        assert_eq!(rows.len(), 2);
        assert!((rows[1].cumulative_energy - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_matrix_is_seeded() {
        let a = top_eigenvalue_asymptotic(20, 30, 2, 7).unwrap();
        let b = top_eigenvalue_asymptotic(20, 30, 2, 7).unwrap();
        assert_eq!(a.observed_mean, b.observed_mean);
        // N = P = 1: E|g| ≈ 0.8 against a prediction of 2; only sanity-check it.
        let tiny = top_eigenvalue_asymptotic(1, 1, 50, 1).unwrap();
        assert_eq!(tiny.predicted, 2.0);
        assert!(tiny.observed_mean > 0.0 && tiny.observed_mean < 2.0);
    }
}
