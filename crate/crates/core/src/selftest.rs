//! Quick property suite on seeded synthetic data. Each check reports the
//! worst observed value against its tolerance.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dimred::{self, MixingScenario};
use crate::error::Result;
use crate::gramcore::{self, RegularizedInverse, DEFAULT_INVERSE_CUTOFF};
use crate::ingest::{self, IdxImages, TrainingMatrix};
use crate::linalg::{
    frobenius_diff, gaussian_matrix, orthonormality_defect, random_orthogonal, relative_diff, rng,
};
use crate::optim;
use crate::oscillator::{NormalModes, OscillatorState};
use crate::spectral::{self, DEFAULT_SVD_CUTOFF};
use crate::statmech;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn check(name: &'static str, value: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name,
        value,
        tolerance,
        passed: value.is_finite() && value <= tolerance,
    }
}

fn random_matrix(p: usize, n: usize, seed: u64) -> Result<TrainingMatrix> {
    let mut r = rng(seed);
    TrainingMatrix::from_matrix(gaussian_matrix(p, n, &mut r))
}

pub fn run(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();

    let mut proj = 0.0f64;
    let mut inverse = 0.0f64;
    for k in 0..5 {
        let x = random_matrix(30, 12, seed.wrapping_add(k))?;
        let inv = RegularizedInverse::new(&x, DEFAULT_INVERSE_CUTOFF)?;
        let pp = gramcore::projections(&x, &inv)?;
        let p = &pp.p_prime;
        proj = proj
            .max(relative_diff(&(p * p), p))
            .max(relative_diff(&(p * x.values()), x.values()))
            .max((p.trace() - pp.pseudo_rank as f64).abs() / pp.pseudo_rank as f64);
        let (left, _) = gramcore::conjugate_matrices(&x, &inv)?;
        inverse = inverse.max(frobenius_diff(
            &left.tr_mul(x.values()),
            &DMatrix::identity(12, 12),
        ));
    }
    out.push(check("projection_properties", proj, 1e-8));
    out.push(check("left_inverse_identity", inverse, 1e-8));

    let x = random_matrix(6, 4, seed ^ 0x5eed)?;
    let f = spectral::svd(&x, DEFAULT_SVD_CUTOFF)?;
    let mut ey = 0.0f64;
    for n in 1..=f.m_rank() {
        let (xhat, tail) = dimred::truncate(&f, n)?;
        let err = (x.values() - &xhat).norm_squared();
        ey = ey.max((err - tail).abs() / tail.max(1e-300).max(x.values().norm_squared() * 1e-16));
    }
    out.push(check("truncation_equals_tail_energy", ey, 1e-8));

    let x = random_matrix(30, 12, seed.wrapping_add(100))?;
    let f = spectral::svd(&x, DEFAULT_SVD_CUTOFF)?;
    let r = random_orthogonal(5, seed);
    let rep = dimred::duality_check(&x, &f, 5, &r)?;
    out.push(check(
        "duality_relative_residual",
        rep.max_residual() / rep.scale,
        1e-10,
    ));
    let ws = dimred::scenario_weights(&f, 5, &MixingScenario::OrthoLatent(r))?;
    let (y, _) = dimred::latent(&x, &ws)?;
    out.push(check(
        "scenario_d_orthonormal",
        orthonormality_defect(&y),
        1e-10,
    ));

    let x = random_matrix(8, 5, seed.wrapping_add(200))?;
    let mut g = rng(seed.wrapping_add(201));
    let w1 = gaussian_matrix(5, 3, &mut g);
    let w2 = gaussian_matrix(3, 5, &mut g);
    let (a1, a2) = optim::grad(&x, &w1, &w2)?;
    let (n1, n2) = optim::finite_difference_grad(&x, &w1, &w2, 1e-5)?;
    out.push(check(
        "gradient_vs_finite_difference",
        relative_diff(&n1, &a1).max(relative_diff(&n2, &a2)),
        1e-6,
    ));

    let mut fermi = 0.0f64;
    for i in 0..100 {
        let a = -10.0 + 0.2 * i as f64;
        let lhs = statmech::fermi_logistic(a, 1.0, 0.0);
        fermi = fermi.max((lhs - 0.5 * (1.0 + statmech::spin_mean(a, 1.0, 0.0))).abs());
    }
    out.push(check("fermi_logistic_tanh_identity", fermi, 1e-14));

    let e = statmech::StatEnsemble {
        kind: statmech::StatKind::BoseEinstein,
        alpha: -(2f64.ln()),
        beta: 0.0,
    };
    let closed = statmech::occupation(e, 0.0)?;
    let partial: f64 = (1..=200).map(|j| 0.5f64.powi(j)).sum();
    out.push(check(
        "bose_partial_sums",
        (closed - partial).abs() / closed,
        1e-6,
    ));

    let sol = statmech::boltzmann_from_entropy(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0], 1.0, 0.6)?;
    out.push(check(
        "entropy_maximum_is_exponential",
        sol.fit_residual,
        1e-6,
    ));

    let x = random_matrix(9, 5, seed.wrapping_add(300))?;
    let modes = NormalModes::from_gram(&x.values().tr_mul(x.values()))?;
    let mut s = OscillatorState::new(x.values().row(0).transpose(), x.values().row(1).transpose())?;
    let h0 = modes.energy(&s)?;
    for _ in 0..1000 {
        s = modes.propagate(&s, 0.01)?;
    }
    out.push(check(
        "oscillator_energy_drift",
        (modes.energy(&s)? - h0).abs() / h0,
        1e-10,
    ));

    let img = IdxImages {
        count: 2,
        rows: 2,
        cols: 3,
        pixels: (0..12).map(|v| (v * 21) as u8).collect(),
    };
    let bytes = img.to_bytes();
    let back = ingest::parse_idx(&bytes)?;
    out.push(check(
        "idx_round_trip",
        if back.to_bytes() == bytes { 0.0 } else { 1.0 },
        0.0,
    ));

    Ok(out)
}
