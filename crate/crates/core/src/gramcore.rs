//! Gram matrices, training mappings, conjugates, training projections,
//! metrics, Pearson correlations and the training graph.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::ingest::TrainingMatrix;
use crate::spectral::{self, SvdFactors};

/// Default cutoff on Gram eigenvalues, relative to the largest.
pub const DEFAULT_INVERSE_CUTOFF: f64 = 1e-12;

/// Eigenvalue ratio below which a retained mode is flagged as near the
/// floating point floor.
pub const FLOOR_RATIO: f64 = 1e-14;

/// `G = XᵀX` (observables Gram, `N × N`) and `G′ = XXᵀ` (observations
/// Gram, `P × P`).
#[derive(Debug, Clone)]
pub struct GramPair {
    pub g: DMatrix<f64>,
    pub g_prime: DMatrix<f64>,
}

pub fn gram(x: &TrainingMatrix) -> GramPair {
    let xv = x.values();
    GramPair {
        g: xv.tr_mul(xv),
        g_prime: xv * xv.transpose(),
    }
}

/// Overlaps `X q′ᵀ` of an `N`-vector with every training observation.
pub fn train_map_observation(x: &TrainingMatrix, q_prime: &DVector<f64>) -> Result<DVector<f64>> {
    check_len(x.n_obs(), q_prime.len())?;
    Ok(x.values() * q_prime)
}

/// `Xᵀ q`: weighted sum of training observations.
pub fn train_map_observable(x: &TrainingMatrix, q: &DVector<f64>) -> Result<DVector<f64>> {
    check_len(x.p(), q.len())?;
    Ok(x.values().tr_mul(q))
}

/// Which space a vector lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    /// `N`-vectors, the space of training observations.
    Observations,
    /// `P`-vectors, the space of training observables.
    Observables,
}

/// Spectrally truncated inverses `G⁻¹ = W Λ⁻² Wᵀ`, `G′⁻¹ = V Λ⁻² Vᵀ`.
///
/// Modes with `λ_i² ≤ τ·λ_1²` are dropped. The pair shares one SVD so the
/// two inverses always agree on the retained rank.
#[derive(Debug, Clone)]
pub struct RegularizedInverse {
    tau: f64,
    v: DMatrix<f64>,
    w: DMatrix<f64>,
    inv_sq: DVector<f64>,
    near_floor: bool,
    dropped: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct InverseDiagnostics {
    pub tau: f64,
    pub retained_rank: usize,
    pub dropped_modes: usize,
    /// Smallest retained eigenvalue is below `1e-14` of the largest.
    pub near_floor: bool,
}

impl RegularizedInverse {
    pub fn new(x: &TrainingMatrix, tau: f64) -> Result<Self> {
        let f = spectral::svd(x, 0.0)?;
        Self::from_factors(&f, tau)
    }

    pub fn from_factors(f: &SvdFactors, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidInput(format!(
                "inverse cutoff must be positive, got {tau}"
            )));
        }
        let eig = f.lambdas().map(|l| l * l);
        let top = eig.get(0).copied().unwrap_or(0.0);
        let k = eig.iter().take_while(|&&e| e > tau * top).count();
        let near_floor = k > 0 && eig[k - 1] < FLOOR_RATIO * top;
        Ok(RegularizedInverse {
            tau,
            v: f.v().columns(0, k).into_owned(),
            w: f.w().columns(0, k).into_owned(),
            inv_sq: eig.rows(0, k).map(|e| 1.0 / e),
            near_floor,
            dropped: f.spectrum().len() - k,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn retained_rank(&self) -> usize {
        self.inv_sq.len()
    }

    pub fn diagnostics(&self) -> InverseDiagnostics {
        InverseDiagnostics {
            tau: self.tau,
            retained_rank: self.retained_rank(),
            dropped_modes: self.dropped,
            near_floor: self.near_floor,
        }
    }

    /// `G⁻¹` (`N × N`).
    pub fn g_inv(&self) -> DMatrix<f64> {
        &self.w * DMatrix::from_diagonal(&self.inv_sq) * self.w.transpose()
    }

    /// `G′⁻¹` (`P × P`).
    pub fn g_prime_inv(&self) -> DMatrix<f64> {
        &self.v * DMatrix::from_diagonal(&self.inv_sq) * self.v.transpose()
    }

    /// Diagonal of `P′ = X G⁻¹ Xᵀ` without forming the `P × P` matrix.
    pub fn p_prime_diagonal(&self) -> DVector<f64> {
        DVector::from_fn(self.v.nrows(), |mu, _| self.v.row(mu).norm_squared())
    }

    /// Diagonal of `P = Xᵀ G′⁻¹ X`.
    pub fn p_diagonal(&self) -> DVector<f64> {
        DVector::from_fn(self.w.nrows(), |i, _| self.w.row(i).norm_squared())
    }

    fn apply(&self, basis: &DMatrix<f64>, q: &DVector<f64>) -> DVector<f64> {
        let coeff = basis.tr_mul(q).component_mul(&self.inv_sq);
        basis * coeff
    }
}

/// Conjugate of a vector: `G⁻¹ q′ᵀ` on the observations side, `G′⁻¹ q` on
/// the observables side.
pub fn conjugate(
    x: &TrainingMatrix,
    q: &DVector<f64>,
    side: Side,
    inv: &RegularizedInverse,
) -> Result<DVector<f64>> {
    match side {
        Side::Observations => {
            check_len(x.n_obs(), q.len())?;
            check_len(x.n_obs(), inv.w.nrows())?;
            Ok(inv.apply(&inv.w, q))
        }
        Side::Observables => {
            check_len(x.p(), q.len())?;
            check_len(x.p(), inv.v.nrows())?;
            Ok(inv.apply(&inv.v, q))
        }
    }
}

/// Left conjugate training matrix `X̌ = X G⁻¹` and right conjugate
/// `X̌′ = G′⁻¹ X`, both `P × N`.
pub fn conjugate_matrices(
    x: &TrainingMatrix,
    inv: &RegularizedInverse,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_len(x.n_obs(), inv.w.nrows())?;
    check_len(x.p(), inv.v.nrows())?;
    let xv = x.values();
    let scale = DMatrix::from_diagonal(&inv.inv_sq);
    let left = (xv * &inv.w) * &scale * inv.w.transpose();
    let right = &inv.v * (&scale * inv.v.tr_mul(xv));
    Ok((left, right))
}

/// Training projections `P′ = X G⁻¹ Xᵀ` (`P × P`) and `P = Xᵀ G′⁻¹ X`
/// (`N × N`).
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    pub p_prime: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub pseudo_rank: usize,
}

pub fn projections(x: &TrainingMatrix, inv: &RegularizedInverse) -> Result<ProjectionPair> {
    check_len(x.n_obs(), inv.w.nrows())?;
    check_len(x.p(), inv.v.nrows())?;
    // On the retained modes X G⁻¹ Xᵀ collapses to V Vᵀ and Xᵀ G′⁻¹ X to W Wᵀ.
    Ok(ProjectionPair {
        p_prime: &inv.v * inv.v.transpose(),
        p: &inv.w * inv.w.transpose(),
        pseudo_rank: inv.retained_rank(),
    })
}

/// Residual sum of squares `Σ_µ (1 − P′_µµ) = P − tr P′`.
pub fn rss(pp: &ProjectionPair) -> f64 {
    pp.p_prime.nrows() as f64 - pp.p_prime.trace()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MetricFamily {
    Euclidean,
    Training,
    ConjugateTraining,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MetricKind {
    pub family: MetricFamily,
    pub side: Side,
}

/// Inner product under the chosen metric. Observation-side vectors are
/// `N`-vectors and use `G` or `G⁻¹`; observable-side vectors are
/// `P`-vectors and use `G′` or `G′⁻¹`.
pub fn inner(
    p: &DVector<f64>,
    q: &DVector<f64>,
    kind: MetricKind,
    gram: &GramPair,
    inv: Option<&RegularizedInverse>,
) -> Result<f64> {
    check_len(p.len(), q.len())?;
    let dim = match kind.side {
        Side::Observations => gram.g.nrows(),
        Side::Observables => gram.g_prime.nrows(),
    };
    check_len(dim, p.len())?;
    match kind.family {
        MetricFamily::Euclidean => Ok(p.dot(q)),
        MetricFamily::Training => {
            let m = match kind.side {
                Side::Observations => &gram.g,
                Side::Observables => &gram.g_prime,
            };
            Ok(p.dot(&(m * q)))
        }
        MetricFamily::ConjugateTraining => {
            let inv = inv.ok_or_else(|| {
                Error::InvalidInput("conjugate metric needs a regularized inverse".into())
            })?;
            let basis = match kind.side {
                Side::Observations => &inv.w,
                Side::Observables => &inv.v,
            };
            check_len(dim, basis.nrows())?;
            let a = basis.tr_mul(p);
            let b = basis.tr_mul(q);
            Ok(a.component_mul(&inv.inv_sq).dot(&b))
        }
    }
}

/// Pearson correlation matrix with Fisher-z 95% confidence bounds.
///
/// Entries involving a zero-variance variable are `NaN` and the variable is
/// listed in `zero_variance`.
#[derive(Debug, Clone)]
pub struct Correlation {
    pub r: DMatrix<f64>,
    pub lower: DMatrix<f64>,
    pub upper: DMatrix<f64>,
    pub samples: usize,
    pub zero_variance: Vec<usize>,
}

impl Correlation {
    /// Half the width of each confidence interval.
    pub fn half_widths(&self) -> DMatrix<f64> {
        (&self.upper - &self.lower) * 0.5
    }

    /// Interval excludes zero.
    pub fn significant(&self, i: usize, j: usize) -> bool {
        self.lower[(i, j)] > 0.0 || self.upper[(i, j)] < 0.0
    }
}

const Z_95: f64 = 1.959963984540054;

pub fn pearson(x: &TrainingMatrix, treat_rows_as_variables: bool) -> Result<Correlation> {
    let data = if treat_rows_as_variables {
        x.values().transpose()
    } else {
        x.values().clone()
    };
    pearson_columns(&data)
}

/// Correlation between the columns of `data`; rows are samples.
pub fn pearson_columns(data: &DMatrix<f64>) -> Result<Correlation> {
    let (n, k) = data.shape();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "Pearson correlation needs at least 3 samples, got {n}"
        )));
    }
    let mut centered = data.clone();
    let mut zero_variance = Vec::new();
    let mut norms = vec![0.0; k];
    for (j, slot) in norms.iter_mut().enumerate() {
        let mut col = centered.column_mut(j);
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        if norm == 0.0 {
            zero_variance.push(j);
        } else {
            col.scale_mut(1.0 / norm);
        }
        *slot = norm;
    }
    let mut r = centered.tr_mul(&centered);
    let se = 1.0 / ((n - 3) as f64).sqrt();
    let mut lower = DMatrix::zeros(k, k);
    let mut upper = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            if norms[i] == 0.0 || norms[j] == 0.0 {
                r[(i, j)] = f64::NAN;
                lower[(i, j)] = f64::NAN;
                upper[(i, j)] = f64::NAN;
                continue;
            }
            let v = if i == j {
                1.0
            } else {
                r[(i, j)].clamp(-1.0, 1.0)
            };
            r[(i, j)] = v;
            if v.abs() == 1.0 || n == 3 {
                lower[(i, j)] = if n == 3 { -1.0 } else { v };
                upper[(i, j)] = if n == 3 { 1.0 } else { v };
            } else {
                let z = v.atanh();
                lower[(i, j)] = (z - Z_95 * se).tanh();
                upper[(i, j)] = (z + Z_95 * se).tanh();
            }
        }
    }
    Ok(Correlation {
        r,
        lower,
        upper,
        samples: n,
        zero_variance,
    })
}

/// Training graph on the observations: an edge joins `µ ≠ ν` when
/// `G′_µν > threshold`. Degrees are `(G′²)_µµ − (G′_µµ)²`.
#[derive(Debug, Clone, Serialize)]
pub struct TrainingGraph {
    pub threshold: f64,
    pub adjacency: Vec<Vec<usize>>,
    pub degrees: Vec<f64>,
}

impl TrainingGraph {
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Every vertex reachable from vertex 0.
    pub fn is_connected(&self) -> bool {
        let n = self.adjacency.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// `(G′²)_µµ − (G′_µµ)²` for every observation.
pub fn vertex_degrees(g_prime: &DMatrix<f64>) -> Vec<f64> {
    (0..g_prime.nrows())
        .map(|mu| {
            let row = g_prime.row(mu);
            row.norm_squared() - g_prime[(mu, mu)].powi(2)
        })
        .collect()
}

pub fn training_graph(gp: &GramPair, threshold: f64) -> Result<TrainingGraph> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "graph threshold must be non-negative, got {threshold}"
        )));
    }
    let g = &gp.g_prime;
    let n = g.nrows();
    let adjacency = (0..n)
        .map(|mu| {
            (0..n)
                .filter(|&nu| nu != mu && g[(mu, nu)] > threshold)
                .collect()
        })
        .collect();
    Ok(TrainingGraph {
        threshold,
        adjacency,
        degrees: vertex_degrees(g),
    })
}
