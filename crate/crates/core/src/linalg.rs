//! Small dense helpers shared across modules.

use faer::dyn_stack::{GlobalPodBuffer, PodStack};
use faer::linalg::svd::{compute_svd, compute_svd_req, ComputeVectors};
use faer::{Col, Mat, Parallelism};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

pub fn frobenius_sq(m: &DMatrix<f64>) -> f64 {
    m.norm_squared()
}

/// `‖a − b‖_F`.
pub fn frobenius_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

/// `‖a − b‖_F / max(‖b‖_F, tiny)`.
pub fn relative_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.norm().max(f64::MIN_POSITIVE);
    (a - b).norm() / scale
}

pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).norm()
}

/// Thin SVD `a = u diag(s) vᵀ` computed sequentially so results are
/// reproducible bit for bit. Singular values are returned in descending order.
pub(crate) fn thin_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Ok((
            DMatrix::zeros(m, 0),
            DVector::zeros(0),
            DMatrix::zeros(n, 0),
        ));
    }
    let fa = Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let mut s = Col::<f64>::zeros(k);
    let mut u = Mat::<f64>::zeros(m, k);
    let mut v = Mat::<f64>::zeros(n, k);
    let par = Parallelism::None;
    let params = Default::default();
    let req = compute_svd_req::<f64>(
        m,
        n,
        ComputeVectors::Thin,
        ComputeVectors::Thin,
        par,
        params,
    )
    .map_err(|_| Error::InvalidInput("matrix too large for SVD workspace".into()))?;
    let mut buf = GlobalPodBuffer::new(req);
    compute_svd(
        fa.as_ref(),
        s.as_mut(),
        Some(u.as_mut()),
        Some(v.as_mut()),
        par,
        PodStack::new(&mut buf),
        params,
    );
    let s = DVector::from_fn(k, |i, _| s.read(i));
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::ConvergenceFailure);
    }
    let u = DMatrix::from_fn(m, k, |i, j| u.read(i, j));
    let v = DMatrix::from_fn(n, k, |i, j| v.read(i, j));
    Ok((u, s, v))
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
pub(crate) fn symmetric_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with i.i.d. standard normal entries drawn from `rng`.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    // Fill row-major so the stream maps onto rows the way a reader expects.
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = StandardNormal.sample(rng);
        }
    }
    m
}

/// Haar-ish random orthogonal matrix: QR of a seeded Gaussian matrix with the
/// diagonal of `R` forced positive.
pub fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let g = gaussian_matrix(n, n, &mut r);
    let qr = g.qr();
    let mut q = qr.q();
    let rr = qr.r();
    for j in 0..n {
        if rr[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col.neg_mut();
        }
    }
    q
}

pub fn orthonormality_defect(q: &DMatrix<f64>) -> f64 {
    let k = q.ncols();
    (q.transpose() * q - DMatrix::<f64>::identity(k, k)).norm()
}

pub fn identity(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}
