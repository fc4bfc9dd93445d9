//! Exact rank-`n` reduction `X̂ = V̂ Λ̂ Ŵᵀ` and the family of shallow linear
//! auto-encoders that realise it, parameterised by an invertible mixing
//! matrix `Ŝ`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::ingest::TrainingMatrix;
use crate::linalg::{frobenius_diff, orthonormality_defect, random_orthogonal};
use crate::spectral::SvdFactors;

/// Guard on `λ_n / λ_1` for scenarios that invert `Λ̂`.
pub const MIN_LAMBDA_RATIO: f64 = 1e-12;

/// Choice of mixing matrix `Ŝ`.
#[derive(Debug, Clone, PartialEq)]
pub enum MixingScenario {
    /// `Ŝ = I`.
    Identity,
    /// `Ŝ = Λ̂⁻¹`.
    InverseLambda,
    /// `Ŝ = Rᵀ`: tied weights, `W⁽²⁾ = W⁽¹⁾ᵀ`.
    TiedRotation(DMatrix<f64>),
    /// `Ŝ = Λ̂⁻¹ R`: orthonormal latent observables.
    OrthoLatent(DMatrix<f64>),
    /// `Ŝ = R Λ̂⁻¹`.
    DPrime(DMatrix<f64>),
}

impl MixingScenario {
    pub fn label(&self) -> &'static str {
        match self {
            MixingScenario::Identity => "a",
            MixingScenario::InverseLambda => "b",
            MixingScenario::TiedRotation(_) => "c",
            MixingScenario::OrthoLatent(_) => "d",
            MixingScenario::DPrime(_) => "d'",
        }
    }

    pub fn rotation(&self) -> Option<&DMatrix<f64>> {
        match self {
            MixingScenario::TiedRotation(r)
            | MixingScenario::OrthoLatent(r)
            | MixingScenario::DPrime(r) => Some(r),
            _ => None,
        }
    }

    fn uses_inverse_lambda(&self) -> bool {
        matches!(
            self,
            MixingScenario::InverseLambda
                | MixingScenario::OrthoLatent(_)
                | MixingScenario::DPrime(_)
        )
    }

    /// All five scenarios, sharing one rotation.
    pub fn all(r: &DMatrix<f64>) -> Vec<MixingScenario> {
        vec![
            MixingScenario::Identity,
            MixingScenario::InverseLambda,
            MixingScenario::TiedRotation(r.clone()),
            MixingScenario::OrthoLatent(r.clone()),
            MixingScenario::DPrime(r.clone()),
        ]
    }
}

/// Encoder/decoder transition matrices in both spaces.
///
/// Observables space: `Y = X W⁽¹⁾`, `X̂ = Y W⁽²⁾`. Observations space:
/// `Y′ = V⁽¹⁾ X`, `X̂ = V⁽²⁾ Y′`.
#[derive(Debug, Clone)]
pub struct WeightSet {
    pub w1: DMatrix<f64>,
    pub w2: DMatrix<f64>,
    pub v1: DMatrix<f64>,
    pub v2: DMatrix<f64>,
    pub scenario: Option<MixingScenario>,
    pub n_latent: usize,
}

impl WeightSet {
    /// Weights for the observables space only; `v1`, `v2` are empty.
    pub fn observables(w1: DMatrix<f64>, w2: DMatrix<f64>) -> Self {
        let n_latent = w1.ncols();
        WeightSet {
            w1,
            w2,
            v1: DMatrix::zeros(0, 0),
            v2: DMatrix::zeros(0, 0),
            scenario: None,
            n_latent,
        }
    }
}

/// `X̂ = V̂ Λ̂ Ŵᵀ` and the tail energy `Σ_{i>n} λ_i²`.
pub fn truncate(f: &SvdFactors, n: usize) -> Result<(DMatrix<f64>, f64)> {
    if n == 0 {
        return Err(Error::InvalidInput("latent rank must be at least 1".into()));
    }
    let (v, l, w) = f.leading(n)?;
    Ok((
        v * DMatrix::from_diagonal(&l) * w.transpose(),
        f.tail_energy(n),
    ))
}

fn check_rotation(r: &DMatrix<f64>, n: usize) -> Result<()> {
    check_len(n, r.nrows())?;
    check_len(n, r.ncols())?;
    let defect = orthonormality_defect(r);
    if defect > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "rotation is not orthogonal: ‖RᵀR − I‖ = {defect:e}"
        )));
    }
    Ok(())
}

/// `(Ŝ, Ŝ⁻¹)` for a scenario.
fn mixing(s: &MixingScenario, lambdas: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = lambdas.len();
    let lam = DMatrix::from_diagonal(lambdas);
    let lam_inv = DMatrix::from_diagonal(&lambdas.map(|l| 1.0 / l));
    match s {
        MixingScenario::Identity => (DMatrix::identity(n, n), DMatrix::identity(n, n)),
        MixingScenario::InverseLambda => (lam_inv, lam),
        MixingScenario::TiedRotation(r) => (r.transpose(), r.clone()),
        MixingScenario::OrthoLatent(r) => (&lam_inv * r, r.transpose() * &lam),
        MixingScenario::DPrime(r) => (r * &lam_inv, &lam * r.transpose()),
    }
}

/// `W⁽¹⁾ = Ŵ Ŝ`, `W⁽²⁾ = Ŝ⁻¹ Ŵᵀ`, `V⁽¹⁾ = Ŝ V̂ᵀ`, `V⁽²⁾ = V̂ Ŝ⁻¹`.
pub fn scenario_weights(f: &SvdFactors, n: usize, s: &MixingScenario) -> Result<WeightSet> {
    if n == 0 {
        return Err(Error::InvalidInput("latent rank must be at least 1".into()));
    }
    let (v, l, w) = f.leading(n)?;
    if let Some(r) = s.rotation() {
        check_rotation(r, n)?;
    }
    if s.uses_inverse_lambda() {
        let ratio = l[n - 1] / l[0];
        if !(ratio > MIN_LAMBDA_RATIO) {
            return Err(Error::ZeroSingularValue {
                index: n - 1,
                ratio,
            });
        }
    }
    let (s_mat, s_inv) = mixing(s, &l);
    Ok(WeightSet {
        w1: &w * &s_mat,
        w2: &s_inv * w.transpose(),
        v1: &s_mat * v.transpose(),
        v2: &v * &s_inv,
        scenario: Some(s.clone()),
        n_latent: n,
    })
}

/// `Y = X W⁽¹⁾` (`P × n`) and `Y′ = V⁽¹⁾ X` (`n × N`).
pub fn latent(x: &TrainingMatrix, ws: &WeightSet) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_len(x.n_obs(), ws.w1.nrows())?;
    let y = x.values() * &ws.w1;
    let y_prime = if ws.v1.ncols() == 0 {
        DMatrix::zeros(0, x.n_obs())
    } else {
        check_len(x.p(), ws.v1.ncols())?;
        &ws.v1 * x.values()
    };
    Ok((y, y_prime))
}

/// Closed form of `YᵀY` for a scenario.
pub fn latent_gram_closed_form(
    f: &SvdFactors,
    n: usize,
    s: &MixingScenario,
) -> Result<DMatrix<f64>> {
    let l = f.lambdas().rows(0, n.min(f.m_rank())).into_owned();
    check_len(n, l.len())?;
    let lam2 = DMatrix::from_diagonal(&l.map(|v| v * v));
    Ok(match s {
        MixingScenario::Identity => lam2,
        MixingScenario::InverseLambda | MixingScenario::OrthoLatent(_) => DMatrix::identity(n, n),
        MixingScenario::TiedRotation(r) => r * lam2 * r.transpose(),
        MixingScenario::DPrime(r) => {
            let li = DMatrix::from_diagonal(&l.map(|v| 1.0 / v));
            &li * r.transpose() * lam2 * r * &li
        }
    })
}

/// Residuals of the duality between hidden nodes of the two spaces.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DualityReport {
    /// `‖Y_d − V⁽²⁾_c‖_F`.
    pub y_d_vs_v2_c: f64,
    /// `‖W⁽²⁾_d − Y′_c‖_F`.
    pub w2_d_vs_yp_c: f64,
    /// `‖Y_a − V⁽²⁾_b‖_F`.
    pub y_a_vs_v2_b: f64,
    /// `‖Y_b − V⁽²⁾_a‖_F`.
    pub y_b_vs_v2_a: f64,
    /// `‖Y′_a − W⁽²⁾_b‖_F`.
    pub yp_a_vs_w2_b: f64,
    /// `‖Y′_b − W⁽²⁾_a‖_F`.
    pub yp_b_vs_w2_a: f64,
    /// `‖X‖_F`.
    pub scale: f64,
}

impl DualityReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.y_d_vs_v2_c,
            self.w2_d_vs_yp_c,
            self.y_a_vs_v2_b,
            self.y_b_vs_v2_a,
            self.yp_a_vs_w2_b,
            self.yp_b_vs_w2_a,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn holds(&self, rel_tol: f64) -> bool {
        self.max_residual() <= rel_tol * self.scale
    }
}

pub fn duality_check(
    x: &TrainingMatrix,
    f: &SvdFactors,
    n: usize,
    r: &DMatrix<f64>,
) -> Result<DualityReport> {
    let a = scenario_weights(f, n, &MixingScenario::Identity)?;
    let b = scenario_weights(f, n, &MixingScenario::InverseLambda)?;
    let c = scenario_weights(f, n, &MixingScenario::TiedRotation(r.clone()))?;
    let d = scenario_weights(f, n, &MixingScenario::OrthoLatent(r.clone()))?;
    let (y_a, yp_a) = latent(x, &a)?;
    let (y_b, yp_b) = latent(x, &b)?;
    let (_, yp_c) = latent(x, &c)?;
    let (y_d, _) = latent(x, &d)?;
    Ok(DualityReport {
        y_d_vs_v2_c: frobenius_diff(&y_d, &c.v2),
        w2_d_vs_yp_c: frobenius_diff(&d.w2, &yp_c),
        y_a_vs_v2_b: frobenius_diff(&y_a, &b.v2),
        y_b_vs_v2_a: frobenius_diff(&y_b, &a.v2),
        yp_a_vs_w2_b: frobenius_diff(&yp_a, &b.w2),
        yp_b_vs_w2_a: frobenius_diff(&yp_b, &a.w2),
        scale: x.values().norm(),
    })
}

/// `Ĝ = Ŵ Λ̂² Ŵᵀ` and `Ĝ′ = V̂ Λ̂² V̂ᵀ`.
pub fn reduced_grams(f: &SvdFactors, n: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (v, l, w) = f.leading(n)?;
    let lam2 = DMatrix::from_diagonal(&l.map(|v| v * v));
    Ok((&w * &lam2 * w.transpose(), &v * lam2 * v.transpose()))
}

/// `‖X − X̂‖²_F`.
pub fn recon_error(x: &TrainingMatrix, x_hat: &DMatrix<f64>) -> Result<f64> {
    check_len(x.p(), x_hat.nrows())?;
    check_len(x.n_obs(), x_hat.ncols())?;
    Ok((x.values() - x_hat).norm_squared())
}

/// The reconstruction error of a weight set evaluated four independent ways.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorForms {
    /// `tr(XᵀX) − 2 tr(XᵀX̂) + tr(X̂ᵀX̂)` with `X̂ = X W⁽¹⁾ W⁽²⁾`.
    pub trace: f64,
    /// `Σ_µ ‖x_µ − x_µ W⁽¹⁾ W⁽²⁾‖²`.
    pub per_observation: f64,
    /// `Σ_µ Σ_i (X_µi − Σ_j Σ_k X_µj W⁽¹⁾_jk W⁽²⁾_ki)²`, explicit loops.
    pub expanded_observables: f64,
    /// `Σ_µ Σ_i (X_µi − Σ_ν Σ_k V⁽²⁾_µk V⁽¹⁾_kν X_νi)²`, explicit loops;
    /// `NaN` when the weight set has no observation-space matrices.
    pub expanded_observations: f64,
}

impl ErrorForms {
    pub fn max_relative_spread(&self) -> f64 {
        let mut vals = vec![self.trace, self.per_observation, self.expanded_observables];
        if !self.expanded_observations.is_nan() {
            vals.push(self.expanded_observations);
        }
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        (hi - lo) / hi.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn recon_error_expanded(x: &TrainingMatrix, ws: &WeightSet) -> Result<ErrorForms> {
    let xv = x.values();
    let (p, n_obs) = xv.shape();
    let k = ws.w1.ncols();
    check_len(n_obs, ws.w1.nrows())?;
    check_len(k, ws.w2.nrows())?;
    check_len(n_obs, ws.w2.ncols())?;

    let xhat = xv * &ws.w1 * &ws.w2;
    let trace = xv.norm_squared() - 2.0 * xv.dot(&xhat) + xhat.norm_squared();

    let composed = &ws.w1 * &ws.w2;
    let per_observation = (0..p)
        .map(|mu| {
            let row = xv.row(mu);
            (row - row * &composed).norm_squared()
        })
        .sum();

    let mut expanded_observables = 0.0;
    for mu in 0..p {
        for i in 0..n_obs {
            let mut acc = 0.0;
            for j in 0..n_obs {
                for kk in 0..k {
                    acc += xv[(mu, j)] * ws.w1[(j, kk)] * ws.w2[(kk, i)];
                }
            }
            expanded_observables += (xv[(mu, i)] - acc).powi(2);
        }
    }

    let expanded_observations = if ws.v1.ncols() == p && ws.v2.nrows() == p {
        let kv = ws.v1.nrows();
        let mut total = 0.0;
        for mu in 0..p {
            for i in 0..n_obs {
                let mut acc = 0.0;
                for nu in 0..p {
                    for kk in 0..kv {
                        acc += ws.v2[(mu, kk)] * ws.v1[(kk, nu)] * xv[(nu, i)];
                    }
                }
                total += (xv[(mu, i)] - acc).powi(2);
            }
        }
        total
    } else {
        f64::NAN
    };

    Ok(ErrorForms {
        trace,
        per_observation,
        expanded_observables,
        expanded_observations,
    })
}

/// One row of a scenario sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub n: usize,
    pub scenario: &'static str,
    pub recon_error: f64,
    pub tail_energy: f64,
    /// `‖X W⁽¹⁾ W⁽²⁾ − X̂_svd‖_F`.
    pub reconstruction_gap: f64,
    /// `‖YᵀY − closed form‖_F`.
    pub latent_gram_deviation: f64,
    /// `‖W⁽²⁾ W⁽¹⁾ − I_n‖_F`.
    pub quasi_orthogonality: f64,
    pub duality_max_residual: f64,
}

/// Every scenario at every requested `n`, with a seeded rotation per `n`.
pub fn scenario_sweep(
    x: &TrainingMatrix,
    f: &SvdFactors,
    ns: &[usize],
    seed: u64,
) -> Result<Vec<ScenarioReport>> {
    let mut out = Vec::new();
    for &n in ns {
        let r = random_orthogonal(n, seed.wrapping_add(n as u64));
        let (xhat, tail) = truncate(f, n)?;
        let duality = duality_check(x, f, n, &r)?.max_residual();
        for s in MixingScenario::all(&r) {
            let ws = scenario_weights(f, n, &s)?;
            let (y, _) = latent(x, &ws)?;
            let recon = &y * &ws.w2;
            let expected = latent_gram_closed_form(f, n, &s)?;
            out.push(ScenarioReport {
                n,
                scenario: s.label(),
                recon_error: recon_error(x, &recon)?,
                tail_energy: tail,
                reconstruction_gap: frobenius_diff(&recon, &xhat),
                latent_gram_deviation: frobenius_diff(&(y.transpose() * &y), &expected),
                quasi_orthogonality: orthonormality_residual(&(&ws.w2 * &ws.w1)),
                duality_max_residual: duality,
            });
        }
    }
    Ok(out)
}

fn orthonormality_residual(m: &DMatrix<f64>) -> f64 {
    (m - DMatrix::identity(m.nrows(), m.ncols())).norm()
}
