//! Iterative solvers for the shallow linear auto-encoder, checked against
//! the exact truncated-SVD solution.
//!
//! Sign convention: `ΔX = X̂ − X`, the reconstruction minus the data.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dimred::WeightSet;
use crate::error::{check_len, Error, Result};
use crate::ingest::TrainingMatrix;
use crate::linalg::{gaussian_matrix, orthonormality_defect, rng};
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateRule {
    /// `ΔW⁽²⁾ = −δ YᵀΔX`, `ΔW⁽¹⁾ = −δ Xᵀ ΔX W⁽²⁾ᵀ`, applied simultaneously.
    UntiedBackprop,
    /// `ΔW⁽¹⁾ = −δ (G(m) − G(0)) W⁽¹⁾` with `W⁽²⁾ = W⁽¹⁾ᵀ`.
    TiedRbm,
    /// `ΔW⁽¹⁾ = −δ (G(m) − G(m−1)) W⁽¹⁾`, with `G(−1) = G(0)`.
    IncrementalTied,
    /// Tied rule in the observations space on `V⁽²⁾`, mirrored into the
    /// observables space as `Y = V⁽²⁾`, `W⁽²⁾ = V⁽²⁾ᵀ X`.
    Orthogonalization,
}

impl UpdateRule {
    pub fn is_tied(self) -> bool {
        !matches!(self, UpdateRule::UntiedBackprop)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub recon_error: f64,
    pub untied_residual: f64,
    pub tied_residual: f64,
}

#[derive(Debug, Clone)]
pub struct OptimState {
    pub weights: WeightSet,
    pub m: usize,
    pub delta: f64,
    pub history: Vec<HistoryRow>,
    g_prev: Option<DMatrix<f64>>,
}

impl OptimState {
    pub fn new(weights: WeightSet, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "learning parameter must be positive, got {delta}"
            )));
        }
        Ok(OptimState {
            weights,
            m: 0,
            delta,
            history: Vec::new(),
            g_prev: None,
        })
    }
}

/// `Y = X W⁽¹⁾`, `X̂ = Y W⁽²⁾`.
pub fn forward(
    x: &TrainingMatrix,
    w1: &DMatrix<f64>,
    w2: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_len(x.n_obs(), w1.nrows())?;
    check_len(w1.ncols(), w2.nrows())?;
    check_len(x.n_obs(), w2.ncols())?;
    let y = x.values() * w1;
    let xhat = &y * w2;
    Ok((y, xhat))
}

/// `Err = ‖X − X W⁽¹⁾ W⁽²⁾‖²_F`.
pub fn error(x: &TrainingMatrix, w1: &DMatrix<f64>, w2: &DMatrix<f64>) -> Result<f64> {
    let (_, xhat) = forward(x, w1, w2)?;
    Ok((x.values() - xhat).norm_squared())
}

/// `(∂Err/∂W⁽¹⁾, ∂Err/∂W⁽²⁾) = (−2 Xᵀ(X − X̂) W⁽²⁾ᵀ, −2 Yᵀ(X − X̂))`.
pub fn grad(
    x: &TrainingMatrix,
    w1: &DMatrix<f64>,
    w2: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (y, xhat) = forward(x, w1, w2)?;
    let resid = x.values() - xhat;
    let g2 = y.tr_mul(&resid) * -2.0;
    let g1 = x.values().tr_mul(&resid) * w2.transpose() * -2.0;
    Ok((g1, g2))
}

/// Central-difference gradient of the reconstruction error.
pub fn finite_difference_grad(
    x: &TrainingMatrix,
    w1: &DMatrix<f64>,
    w2: &DMatrix<f64>,
    h: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mut g1 = DMatrix::zeros(w1.nrows(), w1.ncols());
    let mut g2 = DMatrix::zeros(w2.nrows(), w2.ncols());
    let mut a = w1.clone();
    for i in 0..w1.len() {
        let orig = a[i];
        a[i] = orig + h;
        let up = error(x, &a, w2)?;
        a[i] = orig - h;
        let down = error(x, &a, w2)?;
        a[i] = orig;
        g1[i] = (up - down) / (2.0 * h);
    }
    let mut b = w2.clone();
    for i in 0..w2.len() {
        let orig = b[i];
        b[i] = orig + h;
        let up = error(x, w1, &b)?;
        b[i] = orig - h;
        let down = error(x, w1, &b)?;
        b[i] = orig;
        g2[i] = (up - down) / (2.0 * h);
    }
    Ok((g1, g2))
}

/// `(G(m) − G(0)) W⁽¹⁾` with `X(m) = X W⁽¹⁾ W⁽¹⁾ᵀ`, without forming `N × N`
/// products.
fn tied_drift(x: &DMatrix<f64>, w1: &DMatrix<f64>) -> DMatrix<f64> {
    let b = x * w1;
    let gm_w = w1 * (b.tr_mul(&b) * w1.tr_mul(w1));
    gm_w - x.tr_mul(&b)
}

/// Tied update `−δ (G(m) − G(0)) W⁽¹⁾`.
pub fn tied_update_gram(x: &TrainingMatrix, w1: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
    check_len(x.n_obs(), w1.nrows())?;
    Ok(tied_drift(x.values(), w1) * -delta)
}

/// The same update expanded as `−δ (XᵀΔX + ΔXᵀX + ΔXᵀΔX) W⁽¹⁾`.
pub fn tied_update_expanded(
    x: &TrainingMatrix,
    w1: &DMatrix<f64>,
    delta: f64,
) -> Result<DMatrix<f64>> {
    let (_, xhat) = forward(x, w1, &w1.transpose())?;
    let xv = x.values();
    let dx = xhat - xv;
    let dg = xv.tr_mul(&dx) + dx.tr_mul(xv) + dx.tr_mul(&dx);
    Ok(dg * w1 * -delta)
}

/// First-order form `−δ (XᵀΔX W⁽¹⁾ + ΔXᵀ Y)`, dropping `ΔXᵀΔY`.
pub fn tied_update_first_order(
    x: &TrainingMatrix,
    w1: &DMatrix<f64>,
    delta: f64,
) -> Result<DMatrix<f64>> {
    let (y, xhat) = forward(x, w1, &w1.transpose())?;
    let xv = x.values();
    let dx = xhat - xv;
    Ok((xv.tr_mul(&dx) * w1 + dx.tr_mul(&y)) * -delta)
}

/// `(‖YᵀΔX‖_F, ‖ΔG W⁽¹⁾‖_F)` with `ΔG = X̂ᵀX̂ − XᵀX`.
pub fn identity_residuals(x: &TrainingMatrix, state: &OptimState) -> Result<(f64, f64)> {
    let w = &state.weights;
    let (y, xhat) = forward(x, &w.w1, &w.w2)?;
    let dx = &xhat - x.values();
    let untied = y.tr_mul(&dx).norm();
    let b = &xhat * &w.w1;
    let tied = (xhat.tr_mul(&b) - x.values().tr_mul(&y)).norm();
    Ok((untied, tied))
}

/// One update of `state` under `rule`.
pub fn step(state: &mut OptimState, rule: UpdateRule, x: &TrainingMatrix) -> Result<()> {
    let xv = x.values();
    let delta = state.delta;
    let w = &mut state.weights;
    match rule {
        UpdateRule::UntiedBackprop => {
            let (y, xhat) = forward(x, &w.w1, &w.w2)?;
            let dx = xhat - xv;
            let d2 = y.tr_mul(&dx) * -delta;
            let d1 = xv.tr_mul(&dx) * w.w2.transpose() * -delta;
            w.w1 += d1;
            w.w2 += d2;
        }
        UpdateRule::TiedRbm => {
            check_len(x.n_obs(), w.w1.nrows())?;
            w.w1 += tied_drift(xv, &w.w1) * -delta;
            w.w2 = w.w1.transpose();
        }
        UpdateRule::IncrementalTied => {
            check_len(x.n_obs(), w.w1.nrows())?;
            let xm = xv * &w.w1 * w.w1.transpose();
            let gm = xm.tr_mul(&xm);
            let prev = state.g_prev.take().unwrap_or_else(|| xv.tr_mul(xv));
            w.w1 += (&gm - prev) * &w.w1 * -delta;
            w.w2 = w.w1.transpose();
            state.g_prev = Some(gm);
        }
        UpdateRule::Orthogonalization => {
            check_len(x.p(), w.v2.nrows())?;
            let a = xv.tr_mul(&w.v2);
            let drift = &w.v2 * (a.tr_mul(&a) * w.v2.tr_mul(&w.v2)) - xv * &a;
            w.v2 += drift * -delta;
            w.v1 = w.v2.transpose();
            // Duality: latent observables Y = V⁽²⁾ and decoder W⁽²⁾ = Y′ = V⁽²⁾ᵀ X.
            w.w2 = w.v2.tr_mul(xv);
        }
    }
    state.m += 1;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrthoInit {
    /// Gaussian entries scaled by `1/√P`.
    Random(u64),
    /// Leading columns of the whitened training matrix.
    Whitened,
}

#[derive(Debug, Clone)]
pub struct OrthoOutcome {
    pub weights: WeightSet,
    pub iterations: usize,
    /// `‖YᵀY − I_n‖_F` at exit.
    pub deviation: f64,
}

/// Tolerance on `‖YᵀY − I_n‖_F` for [`orthogonalize`].
pub const ORTHO_TOL: f64 = 1e-6;

/// Drives the observation-space tied weights `V⁽²⁾` until the latent
/// observables `Y = V⁽²⁾` are orthonormal.
pub fn orthogonalize(
    x: &TrainingMatrix,
    n: usize,
    max_iters: usize,
    delta: f64,
    init: OrthoInit,
) -> Result<OrthoOutcome> {
    if n == 0 {
        return Err(Error::InvalidInput("latent rank must be at least 1".into()));
    }
    let f = spectral::svd(x, spectral::DEFAULT_SVD_CUTOFF)?;
    if n > f.m_rank() {
        // Directions missing from the column space cannot be reached.
        return Err(Error::NotConverged {
            iterations: 0,
            deviation: ((n - f.m_rank()) as f64).sqrt(),
        });
    }
    let p = x.p();
    let v2 = match init {
        OrthoInit::Random(seed) => {
            let mut r = rng(seed);
            gaussian_matrix(p, n, &mut r) / (p as f64).sqrt()
        }
        OrthoInit::Whitened => spectral::whiten(x, &f)?.columns(0, n).into_owned(),
    };
    let w2 = v2.tr_mul(x.values());
    let weights = WeightSet {
        w1: DMatrix::zeros(x.n_obs(), n),
        w2,
        v1: v2.transpose(),
        v2,
        scenario: None,
        n_latent: n,
    };
    let mut state = OptimState::new(weights, delta)?;
    let start = orthonormality_defect(&state.weights.v2);
    loop {
        let deviation = orthonormality_defect(&state.weights.v2);
        if !deviation.is_finite() || deviation > 1e3 * start.max(1.0) {
            return Err(Error::Diverged {
                iteration: state.m,
                error: deviation,
            });
        }
        if deviation < ORTHO_TOL {
            let iterations = state.m;
            return Ok(OrthoOutcome {
                weights: state.weights,
                iterations,
                deviation,
            });
        }
        if state.m >= max_iters {
            return Err(Error::NotConverged {
                iterations: state.m,
                deviation,
            });
        }
        step(&mut state, UpdateRule::Orthogonalization, x)?;
    }
}

/// Suggested learning parameter `0.1 / ‖X‖²_F`.
pub fn suggested_delta(x: &TrainingMatrix) -> f64 {
    0.1 / x.values().norm_squared().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n: usize,
    pub rule: UpdateRule,
    pub delta: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Stop once the reconstruction error is at or below this value.
    pub target_error: Option<f64>,
    /// Record every k-th iteration in the history (the last one is always kept).
    pub record_every: usize,
}

impl TrainConfig {
    pub fn new(n: usize, rule: UpdateRule, delta: f64, max_iters: usize, seed: u64) -> Self {
        TrainConfig {
            n,
            rule,
            delta,
            max_iters,
            seed,
            target_error: None,
            record_every: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    RelativeChange,
    IdentityResidual,
    TargetError,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: OptimState,
    pub stop: StopReason,
    pub final_error: f64,
    pub tail_energy: f64,
}

impl TrainOutcome {
    /// Turns an exhausted iteration budget into [`Error::NotConverged`].
    pub fn require_converged(self) -> Result<Self> {
        if self.stop == StopReason::MaxIterations {
            let deviation =
                (self.final_error - self.tail_energy) / self.tail_energy.max(f64::MIN_POSITIVE);
            return Err(Error::NotConverged {
                iterations: self.state.m,
                deviation,
            });
        }
        Ok(self)
    }
}

const CHANGE_WINDOW: usize = 100;
const CHANGE_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-8;
const DIVERGENCE_FACTOR: f64 = 10.0;

/// Trains from seeded Gaussian weights (entries `/√N`).
pub fn train(x: &TrainingMatrix, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.rule == UpdateRule::Orthogonalization {
        return Err(Error::InvalidInput(
            "use orthogonalize for the orthogonalization rule".into(),
        ));
    }
    let n_obs = x.n_obs();
    if cfg.n == 0 || cfg.n > n_obs {
        return Err(Error::RankTooLarge {
            requested: cfg.n,
            available: n_obs,
        });
    }
    let f = spectral::svd(x, spectral::DEFAULT_SVD_CUTOFF)?;
    let tail = f.tail_energy(cfg.n);
    let mut r = rng(cfg.seed);
    let scale = 1.0 / (n_obs as f64).sqrt();
    let w1 = gaussian_matrix(n_obs, cfg.n, &mut r) * scale;
    let w2 = if cfg.rule.is_tied() {
        w1.transpose()
    } else {
        gaussian_matrix(cfg.n, n_obs, &mut r) * scale
    };
    let mut state = OptimState::new(WeightSet::observables(w1, w2), cfg.delta)?;
    let x_scale = x.values().norm_squared().max(f64::MIN_POSITIVE);

    let initial = error(x, &state.weights.w1, &state.weights.w2)?;
    let mut window = vec![initial];
    let every = cfg.record_every.max(1);
    loop {
        let err = error(x, &state.weights.w1, &state.weights.w2)?;
        if !err.is_finite() || err > DIVERGENCE_FACTOR * initial.max(f64::MIN_POSITIVE) {
            return Err(Error::Diverged {
                iteration: state.m,
                error: err,
            });
        }
        let (untied, tied) = identity_residuals(x, &state)?;
        let residual = if cfg.rule.is_tied() {
            tied
        } else {
            untied.max(tied)
        };
        let stop = if cfg.target_error.is_some_and(|t| err <= t) {
            Some(StopReason::TargetError)
        } else if residual < RESIDUAL_TOL * x_scale {
            Some(StopReason::IdentityResidual)
        } else if window.len() > CHANGE_WINDOW
            && (window[window.len() - 1 - CHANGE_WINDOW] - err).abs()
                < CHANGE_TOL * err.max(f64::MIN_POSITIVE)
        {
            Some(StopReason::RelativeChange)
        } else if state.m >= cfg.max_iters {
            Some(StopReason::MaxIterations)
        } else {
            None
        };
        if state.m % every == 0 || stop.is_some() {
            state.history.push(HistoryRow {
                iteration: state.m,
                recon_error: err,
                untied_residual: untied,
                tied_residual: tied,
            });
        }
        if let Some(stop) = stop {
            return Ok(TrainOutcome {
                state,
                stop,
                final_error: err,
                tail_energy: tail,
            });
        }
        step(&mut state, cfg.rule, x)?;
        window.push(err);
        if window.len() > CHANGE_WINDOW + 1 {
            window.remove(0);
        }
    }
}
