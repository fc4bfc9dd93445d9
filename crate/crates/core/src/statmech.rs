//! Moments, occupation statistics, observation energies and the training
//! partition function.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::gramcore::{vertex_degrees, GramPair, RegularizedInverse};
use crate::ingest::TrainingMatrix;

/// `(1/P) Σ v_µ⁴`.
pub fn fourth_moment(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().map(|x| x.powi(4)).sum::<f64>() / v.len() as f64
}

/// Fourth cumulant `E z⁴ − 3 (E z²)²`, optionally after removing the mean.
pub fn kurtosis(v: &[f64], demean: bool) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = if demean {
        v.iter().sum::<f64>() / n
    } else {
        0.0
    };
    let (m2, m4) = v.iter().fold((0.0, 0.0), |(a, b), &x| {
        let z = x - mean;
        let z2 = z * z;
        (a + z2, b + z2 * z2)
    });
    m4 / n - 3.0 * (m2 / n).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatKind {
    Boltzmann,
    Fermi,
    BoseEinstein,
}

/// Occupation statistics with `α = µ/T` and `β = 1/T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatEnsemble {
    pub kind: StatKind,
    pub alpha: f64,
    pub beta: f64,
}

/// Mean occupation of a level with energy `eps`.
pub fn occupation(e: StatEnsemble, eps: f64) -> Result<f64> {
    let x = (-e.alpha + e.beta * eps).exp();
    match e.kind {
        StatKind::Boltzmann => Ok((e.alpha - e.beta * eps).exp()),
        StatKind::Fermi => Ok(1.0 / (x + 1.0)),
        StatKind::BoseEinstein => {
            if x <= 1.0 {
                return Err(Error::BoseDivergence(x));
            }
            Ok(1.0 / (x - 1.0))
        }
    }
}

fn logistic(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Fermi occupation written as the logistic function of `α − βε`.
pub fn fermi_logistic(alpha: f64, beta: f64, eps: f64) -> f64 {
    logistic(alpha - beta * eps)
}

/// Mean spin `2p − 1 = tanh((α − βε)/2)`.
pub fn spin_mean(alpha: f64, beta: f64, eps: f64) -> f64 {
    ((alpha - beta * eps) / 2.0).tanh()
}

/// `tanh(h / 2T)`.
pub fn tanh_update(h: f64, t: f64) -> f64 {
    (h / (2.0 * t)).tanh()
}

/// Maximum-entropy occupations and the exponential fit `ln k = α − βε`.
#[derive(Debug, Clone, Serialize)]
pub struct EntropySolution {
    pub k: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub fit_residual: f64,
    pub iterations: usize,
}

/// Maximizes `S = −Σ L_i k_i ln(k_i / e)` subject to `Σ L_i k_i = K` and
/// `Σ ε_i L_i k_i = E` by equality-constrained Newton iteration, then fits
/// `ln k_i` against `(1, −ε_i)`.
pub fn boltzmann_from_entropy(
    eps: &[f64],
    degeneracy: &[f64],
    k_total: f64,
    e_total: f64,
) -> Result<EntropySolution> {
    let n = eps.len();
    check_len(n, degeneracy.len())?;
    if n == 0 {
        return Err(Error::InfeasibleConstraints("no levels".into()));
    }
    if degeneracy.iter().any(|&l| !(l > 0.0)) || !(k_total > 0.0) {
        return Err(Error::InfeasibleConstraints(
            "degeneracies and K must be positive".into(),
        ));
    }
    let l_sum: f64 = degeneracy.iter().sum();
    let e_min = eps.iter().cloned().fold(f64::INFINITY, f64::min);
    let e_max = eps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = e_max.abs().max(e_min.abs()).max(1.0) * k_total;
    let uniform = k_total / l_sum;

    if e_max - e_min <= 1e-12 * e_max.abs().max(1.0) {
        if (e_total - e_min * k_total).abs() > 1e-9 * scale {
            return Err(Error::InfeasibleConstraints(format!(
                "all levels share energy {e_min}, so E must be {}",
                e_min * k_total
            )));
        }
        return Ok(EntropySolution {
            k: vec![uniform; n],
            alpha: uniform.ln(),
            beta: 0.0,
            fit_residual: 0.0,
            iterations: 0,
        });
    }
    if !(e_total > e_min * k_total && e_total < e_max * k_total) {
        return Err(Error::InfeasibleConstraints(format!(
            "E = {e_total} must lie strictly between {} and {}",
            e_min * k_total,
            e_max * k_total
        )));
    }

    // Strictly positive feasible start: blend the uniform point with the
    // single-level extreme on the side of the target energy.
    let e_uniform: f64 = eps
        .iter()
        .zip(degeneracy)
        .map(|(e, l)| e * l * uniform)
        .sum();
    let target_idx = if e_total >= e_uniform {
        (0..n).max_by(|&a, &b| eps[a].total_cmp(&eps[b])).unwrap()
    } else {
        (0..n).min_by(|&a, &b| eps[a].total_cmp(&eps[b])).unwrap()
    };
    let e_extreme = eps[target_idx] * k_total;
    let t = if (e_extreme - e_uniform).abs() > 0.0 {
        (e_total - e_uniform) / (e_extreme - e_uniform)
    } else {
        0.0
    };
    let mut k: Vec<f64> = (0..n)
        .map(|i| {
            let ext = if i == target_idx {
                k_total / degeneracy[i]
            } else {
                0.0
            };
            (1.0 - t) * uniform + t * ext
        })
        .collect();

    let objective = |k: &[f64]| -> f64 {
        k.iter()
            .zip(degeneracy)
            .map(|(ki, li)| li * ki * (ki.ln() - 1.0))
            .sum()
    };
    let mut iterations = 0;
    for it in 0..200 {
        iterations = it + 1;
        let g: Vec<f64> = k
            .iter()
            .zip(degeneracy)
            .map(|(ki, li)| li * ki.ln())
            .collect();
        let h: Vec<f64> = k.iter().zip(degeneracy).map(|(ki, li)| li / ki).collect();
        let mut kkt = DMatrix::zeros(n + 2, n + 2);
        let mut rhs = DVector::zeros(n + 2);
        for i in 0..n {
            kkt[(i, i)] = h[i];
            kkt[(i, n)] = degeneracy[i];
            kkt[(n, i)] = degeneracy[i];
            kkt[(i, n + 1)] = eps[i] * degeneracy[i];
            kkt[(n + 1, i)] = eps[i] * degeneracy[i];
            rhs[i] = -g[i];
        }
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InfeasibleConstraints("singular constraint system".into()))?;
        let step: Vec<f64> = (0..n).map(|i| sol[i]).collect();
        let decrement: f64 = step.iter().zip(&h).map(|(s, hi)| s * s * hi).sum();
        if decrement < 1e-28 * (1.0 + objective(&k).abs()) {
            break;
        }
        let mut a = 1.0;
        for (ki, si) in k.iter().zip(&step) {
            if *si < 0.0 {
                a = f64::min(a, -0.99 * ki / si);
            }
        }
        let f0 = objective(&k);
        let slope: f64 = g.iter().zip(&step).map(|(gi, si)| gi * si).sum();
        loop {
            let trial: Vec<f64> = k.iter().zip(&step).map(|(ki, si)| ki + a * si).collect();
            if trial.iter().all(|&v| v > 0.0) && objective(&trial) <= f0 + 0.25 * a * slope {
                k = trial;
                break;
            }
            a *= 0.5;
            if a < 1e-16 {
                return Err(Error::ConvergenceFailure);
            }
        }
    }

    let (alpha, beta, fit_residual) = exponential_fit(eps, &k);
    Ok(EntropySolution {
        k,
        alpha,
        beta,
        fit_residual,
        iterations,
    })
}

/// Least-squares fit of `ln k_i = α − β ε_i`; returns `(α, β, ‖residual‖)`.
pub fn exponential_fit(eps: &[f64], k: &[f64]) -> (f64, f64, f64) {
    let n = eps.len();
    let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { -eps[i] });
    let target = DVector::from_iterator(n, k.iter().map(|v| v.ln()));
    if n == 1 {
        return (target[0], 0.0, 0.0);
    }
    let svd = design.clone().svd(true, true);
    let coef = svd
        .solve(&target, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(2));
    let resid = (&design * &coef - &target).norm();
    (coef[0], coef[1], resid)
}

/// Per-observation energy models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnergyModel {
    /// `−½((G′²)_µµ − (G′_µµ)²)`.
    FerroOverlap,
    /// `−½(P′_µµ − (x_µ·x_µ)²)`.
    FerroConjugate,
    AntiFerroOverlap,
    AntiFerroConjugate,
}

impl EnergyModel {
    pub fn needs_inverse(self) -> bool {
        matches!(
            self,
            EnergyModel::FerroConjugate | EnergyModel::AntiFerroConjugate
        )
    }
}

pub fn energies(
    x: &TrainingMatrix,
    gp: &GramPair,
    inv: Option<&RegularizedInverse>,
    model: EnergyModel,
) -> Result<DVector<f64>> {
    check_len(x.p(), gp.g_prime.nrows())?;
    let raw = match model {
        EnergyModel::FerroOverlap | EnergyModel::AntiFerroOverlap => {
            DVector::from_vec(vertex_degrees(&gp.g_prime))
        }
        EnergyModel::FerroConjugate | EnergyModel::AntiFerroConjugate => {
            let inv = inv.ok_or_else(|| {
                Error::InvalidInput("conjugate energies need a regularized inverse".into())
            })?;
            let diag = inv.p_prime_diagonal();
            check_len(x.p(), diag.len())?;
            DVector::from_fn(x.p(), |mu, _| diag[mu] - gp.g_prime[(mu, mu)].powi(2))
        }
    };
    let sign = match model {
        EnergyModel::FerroOverlap | EnergyModel::FerroConjugate => -0.5,
        _ => 0.5,
    };
    Ok(raw * sign)
}

/// Boltzmann probabilities over observations and the partition function.
#[derive(Debug, Clone)]
pub struct Partition {
    pub probabilities: DVector<f64>,
    /// `ln Z`. `Z` itself overflows for realistic energy ranges.
    pub log_z: f64,
}

impl Partition {
    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }
}

/// `p_µ = e^{−ε_µ/T} / Z`, computed with a log-sum-exp shift.
pub fn boltzmann_probabilities(eps: &DVector<f64>, t: f64) -> Result<Partition> {
    if eps.is_empty() {
        return Err(Error::EmptySelection);
    }
    if !(t > 0.0) || eps.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidInput(
            "temperature must be positive and energies finite".into(),
        ));
    }
    let a = eps.map(|e| -e / t);
    let shift = a.max();
    let weights = a.map(|v| (v - shift).exp());
    let sum = weights.sum();
    Ok(Partition {
        probabilities: weights / sum,
        log_z: shift + sum.ln(),
    })
}

/// Stable ascending order of probabilities and `G′` reordered to match.
pub fn rank_and_reorder(
    gp: &GramPair,
    probabilities: &DVector<f64>,
) -> Result<(Vec<usize>, DMatrix<f64>)> {
    check_len(gp.g_prime.nrows(), probabilities.len())?;
    let mut perm: Vec<usize> = (0..probabilities.len()).collect();
    perm.sort_by(|&a, &b| probabilities[a].total_cmp(&probabilities[b]));
    let g = &gp.g_prime;
    let reordered = DMatrix::from_fn(perm.len(), perm.len(), |i, j| g[(perm[i], perm[j])]);
    Ok((perm, reordered))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LangevinVariant {
    /// `Δq̌ = G q̌ + noise`.
    Overlap,
    /// `Δq = G⁻¹ q + noise`.
    Conjugate,
}

/// Increment of one discrete Langevin step on an observation-side vector.
/// Noise is supplied by the caller.
pub fn langevin_increment(
    v: &DVector<f64>,
    gp: &GramPair,
    inv: Option<&RegularizedInverse>,
    noise: &DVector<f64>,
    variant: LangevinVariant,
) -> Result<DVector<f64>> {
    check_len(gp.g.nrows(), v.len())?;
    check_len(v.len(), noise.len())?;
    let drift = match variant {
        LangevinVariant::Overlap => &gp.g * v,
        LangevinVariant::Conjugate => {
            let inv = inv.ok_or_else(|| {
                Error::InvalidInput("conjugate Langevin step needs a regularized inverse".into())
            })?;
            inv.g_inv() * v
        }
    };
    Ok(drift + noise)
}

/// `v + Δv`.
pub fn langevin_step(
    v: &DVector<f64>,
    gp: &GramPair,
    inv: Option<&RegularizedInverse>,
    noise: &DVector<f64>,
    variant: LangevinVariant,
) -> Result<DVector<f64>> {
    Ok(v + langevin_increment(v, gp, inv, noise, variant)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateMode {
    Parallel,
    /// One neuron at a time over `n` neurons.
    Sequential {
        n: usize,
    },
}

/// Number of observations whose energy lies in `[c − Δ, c + Δ]`, scaled by
/// the number of states reachable per update.
pub fn degeneracy_estimate(eps: &[f64], center: f64, half_width: f64, mode: UpdateMode) -> f64 {
    let count = eps
        .iter()
        .filter(|&&e| e >= center - half_width && e <= center + half_width)
        .count() as f64;
    match mode {
        UpdateMode::Parallel => count,
        UpdateMode::Sequential { n } => count * n as f64,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

/// Equal-width histogram over the finite range of `values`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo {
        (hi - lo) / bins as f64
    } else {
        1.0
    };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            left: lo + i as f64 * width,
            right: lo + (i + 1) as f64 * width,
            count,
        })
        .collect()
}
