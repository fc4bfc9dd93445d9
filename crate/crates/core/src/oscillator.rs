//! Coupled harmonic oscillators with Hamiltonian `½‖p‖² + ½ q G qᵀ`,
//! propagated exactly in the eigenbasis of `G`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::symmetric_eigen_desc;
use crate::spectral::SvdFactors;

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorState {
    pub p: DVector<f64>,
    pub q: DVector<f64>,
    pub t: f64,
}

impl OscillatorState {
    pub fn new(p: DVector<f64>, q: DVector<f64>) -> Result<Self> {
        check_len(p.len(), q.len())?;
        if p.iter().chain(q.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "oscillator state must be finite".into(),
            ));
        }
        Ok(OscillatorState { p, q, t: 0.0 })
    }
}

/// `½‖p‖² + ½ q G qᵀ`.
pub fn hamiltonian(state: &OscillatorState, g: &DMatrix<f64>) -> Result<f64> {
    check_len(g.nrows(), state.q.len())?;
    Ok(0.5 * state.p.norm_squared() + 0.5 * state.q.dot(&(g * &state.q)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Potential {
    /// Frequencies `λ_i`.
    Gram,
    /// Frequencies `1/λ_i`, the inverse-metric variant.
    InverseGram,
}

/// Orthonormal modes (columns of `basis`) and their angular frequencies.
/// Directions outside the span of `basis` move freely.
#[derive(Debug, Clone)]
pub struct NormalModes {
    pub basis: DMatrix<f64>,
    pub freq: DVector<f64>,
}

impl NormalModes {
    /// Full eigendecomposition of a positive semi-definite `G`.
    pub fn from_gram(g: &DMatrix<f64>) -> Result<Self> {
        if g.nrows() != g.ncols() {
            return Err(Error::DimensionMismatch {
                expected: g.nrows(),
                actual: g.ncols(),
            });
        }
        let (vals, vecs) = symmetric_eigen_desc(g);
        let top = vals.get(0).copied().unwrap_or(0.0).max(0.0);
        if vals.iter().any(|&v| v < -1e-10 * top.max(1.0)) {
            return Err(Error::InvalidInput(
                "potential matrix is not positive semi-definite".into(),
            ));
        }
        Ok(NormalModes {
            basis: vecs,
            freq: vals.map(|v| v.max(0.0).sqrt()),
        })
    }

    /// Eigen-observations of `X` with frequencies `λ_i`.
    pub fn from_factors(f: &SvdFactors) -> Self {
        Self::from_factors_with(f, Potential::Gram)
    }

    pub fn from_factors_with(f: &SvdFactors, potential: Potential) -> Self {
        let freq = match potential {
            Potential::Gram => f.lambdas().clone(),
            Potential::InverseGram => f.lambdas().map(|l| 1.0 / l),
        };
        NormalModes {
            basis: f.w().clone(),
            freq,
        }
    }

    /// Leading `n` modes only: the truncated system `Ĝ = Ŵ Λ̂² Ŵᵀ`.
    pub fn leading(&self, n: usize) -> Result<Self> {
        if n > self.freq.len() {
            return Err(Error::RankTooLarge {
                requested: n,
                available: self.freq.len(),
            });
        }
        Ok(NormalModes {
            basis: self.basis.columns(0, n).into_owned(),
            freq: self.freq.rows(0, n).into_owned(),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// `(p̃, q̃) = (p W, q W)`.
    pub fn transform(&self, state: &OscillatorState) -> Result<(DVector<f64>, DVector<f64>)> {
        check_len(self.dim(), state.p.len())?;
        Ok((self.basis.tr_mul(&state.p), self.basis.tr_mul(&state.q)))
    }

    /// `½ p̃_i² + ½ λ_i² q̃_i²` for every mode.
    pub fn mode_energies(&self, state: &OscillatorState) -> Result<DVector<f64>> {
        let (pt, qt) = self.transform(state)?;
        Ok(DVector::from_fn(self.freq.len(), |i, _| {
            0.5 * pt[i] * pt[i] + 0.5 * (self.freq[i] * qt[i]).powi(2)
        }))
    }

    /// Hamiltonian in normal-mode form plus the free-particle part.
    pub fn energy(&self, state: &OscillatorState) -> Result<f64> {
        let (pt, _) = self.transform(state)?;
        let free = state.p.norm_squared() - pt.norm_squared();
        Ok(self.mode_energies(state)?.sum() + 0.5 * free.max(0.0))
    }

    /// Exact propagation by time `t`.
    pub fn propagate(&self, state: &OscillatorState, t: f64) -> Result<OscillatorState> {
        let (pt, qt) = self.transform(state)?;
        let p_free = &state.p - &self.basis * &pt;
        let q_free = &state.q - &self.basis * &qt;
        let mut pn = DVector::zeros(pt.len());
        let mut qn = DVector::zeros(qt.len());
        for i in 0..pt.len() {
            let l = self.freq[i];
            let (s, c) = (l * t).sin_cos();
            // sin(λt)/λ → t as λ → 0.
            let sinc = if l * t.abs() > 1e-8 { s / l } else { t };
            pn[i] = pt[i] * c - qt[i] * l * s;
            qn[i] = pt[i] * sinc + qt[i] * c;
        }
        Ok(OscillatorState {
            p: &self.basis * pn + &p_free,
            q: &self.basis * qn + q_free + p_free * t,
            t: state.t + t,
        })
    }
}

/// Exact propagation under `G`.
pub fn propagate(state: &OscillatorState, g: &DMatrix<f64>, t: f64) -> Result<OscillatorState> {
    NormalModes::from_gram(g)?.propagate(state, t)
}

/// Normal-mode coordinates `(p W, q W)` over the retained eigen-observations.
pub fn normal_modes(
    state: &OscillatorState,
    f: &SvdFactors,
) -> Result<(DVector<f64>, DVector<f64>)> {
    NormalModes::from_factors(f).transform(state)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NoiseReport {
    /// Kinetic energy in the modes dropped by the truncation.
    pub noise_energy: f64,
    /// `½ Σ_{i>n} λ_i²`.
    pub bound: f64,
}

impl NoiseReport {
    pub fn within_bound(&self) -> bool {
        self.noise_energy <= self.bound * (1.0 + 1e-12) + 1e-300
    }
}

/// Propagates under `Ĝ`: the top `n` modes oscillate, all other directions
/// move freely. The momenta of the free directions are conserved, so their
/// kinetic energy is the noise term.
pub fn truncated_propagate(
    state: &OscillatorState,
    f: &SvdFactors,
    n: usize,
    t: f64,
) -> Result<(OscillatorState, NoiseReport)> {
    let modes = NormalModes::from_factors(f).leading(n)?;
    let next = modes.propagate(state, t)?;
    let (pt, _) = modes.transform(state)?;
    let noise_energy = 0.5 * (state.p.norm_squared() - pt.norm_squared()).max(0.0);
    Ok((
        next,
        NoiseReport {
            noise_energy,
            bound: 0.5 * f.tail_energy(n),
        },
    ))
}

/// `Σ_{i≤n} λ_i² / Σ_i λ_i²`.
pub fn r_squared(f: &SvdFactors, n: usize) -> f64 {
    f.energy_retention(n)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub h: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub mode_energies: Vec<f64>,
}

/// Samples `steps + 1` states spaced by `dt`, each obtained by composing
/// exact steps. Mode energies are reported for the first `top` modes.
pub fn trajectory(
    modes: &NormalModes,
    start: &OscillatorState,
    dt: f64,
    steps: usize,
    top: usize,
) -> Result<Vec<TrajectoryRow>> {
    let mut rows = Vec::with_capacity(steps + 1);
    let mut s = start.clone();
    for k in 0..=steps {
        if k > 0 {
            s = modes.propagate(&s, dt)?;
        }
        let kinetic = 0.5 * s.p.norm_squared();
        let h = modes.energy(&s)?;
        let energies = modes.mode_energies(&s)?;
        rows.push(TrajectoryRow {
            t: s.t,
            h,
            kinetic,
            potential: h - kinetic,
            mode_energies: energies.iter().take(top).copied().collect(),
        });
    }
    Ok(rows)
}
