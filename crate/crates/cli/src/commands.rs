use std::io::Write;

use serde::Serialize;
use serde_json::json;
use trainspace::dimred::{self, MixingScenario};
use trainspace::export;
use trainspace::gramcore::{self, RegularizedInverse, Side, DEFAULT_INVERSE_CUTOFF};
use trainspace::ingest::{self, DataFormat, DatasetConfig};
use trainspace::linalg;
use trainspace::optim::{self, OrthoInit, TrainConfig, UpdateRule};
use trainspace::oscillator::{self, NormalModes, OscillatorState};
use trainspace::spectral::{self, DEFAULT_SVD_CUTOFF};
use trainspace::statmech::{self, EnergyModel};
use trainspace::{DMatrix, DVector, Error, Normalization, Result, TrainingMatrix};

use crate::report::Report;
use crate::settings::{EnergyArg, Format, RuleArg, ScenarioArg, Settings};

const HIST_BINS: usize = 50;

pub fn load(s: &Settings) -> Result<TrainingMatrix> {
    let input = s
        .input
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("--input is required".into()))?;
    let format = s.format.unwrap_or_else(|| {
        if input
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
        {
            Format::Csv
        } else {
            Format::Idx
        }
    });
    let mut cfg = DatasetConfig::idx(input);
    if format == Format::Csv {
        cfg.format = DataFormat::Csv;
        cfg.normalization = Normalization::None;
    }
    cfg.max_observations = s.take;
    cfg.rank_reduce_to = s.rank_reduce;
    ingest::load(&cfg)
}

fn n_latent(s: &Settings, x: &TrainingMatrix, default: usize) -> usize {
    s.n.unwrap_or(default.min(x.n_obs()).min(x.p()))
}

fn json<T: Serialize + ?Sized>(r: &mut Report, name: &str, v: &T) -> Result<()> {
    r.write(name, |w| export::write_json(w, v))
}

fn matrix(r: &mut Report, name: &str, m: &DMatrix<f64>, prefix: &str) -> Result<()> {
    r.write(name, |w| export::write_matrix_csv(w, m, prefix))
}

fn vector(r: &mut Report, name: &str, index: &str, value: &str, v: &DVector<f64>) -> Result<()> {
    r.write(name, |w| export::write_vector_csv(w, index, value, v))
}

fn rows<T: Serialize>(r: &mut Report, name: &str, v: &[T]) -> Result<()> {
    r.write(name, |w| export::write_rows_csv(w, v))
}

fn table(r: &mut Report, name: &str, header: &[&str], data: &[Vec<f64>]) -> Result<()> {
    let header: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    r.write(name, |w| export::write_table_csv(w, &header, data))
}

fn dataset_summary(x: &TrainingMatrix) -> serde_json::Value {
    json!({
        "observations": x.p(),
        "observables": x.n_obs(),
        "normalization": x.normalization(),
        "rank_reduced_to": x.rank_reduced_to(),
        "frobenius_sq": linalg::frobenius_sq(x.values()),
    })
}

pub fn ingest(s: &Settings, r: &mut Report) -> Result<()> {
    let x = load(s)?;
    matrix(r, "X.csv", x.values(), "x")?;
    json(r, "dataset.json", &dataset_summary(&x))
}

pub fn gram(s: &Settings, r: &mut Report) -> Result<()> {
    let x = load(s)?;
    let gp = gramcore::gram(&x);
    matrix(r, "G.csv", &gp.g, "g")?;
    matrix(r, "Gp.csv", &gp.g_prime, "g")?;
    let graph = gramcore::training_graph(&gp, s.threshold.unwrap_or(0.0))?;
    let degrees = DVector::from_vec(graph.degrees.clone());
    vector(r, "degrees.csv", "observation", "degree", &degrees)?;
    let p = x.p();
    let band: Vec<Vec<f64>> = (0..p)
        .map(|k| {
            let mean = (0..p - k)
                .map(|i| gp.g_prime[(i + k, i)].abs())
                .sum::<f64>()
                / (p - k) as f64;
            vec![k as f64, mean]
        })
        .collect();
    table(r, "band_profile.csv", &["offset", "mean_abs"], &band)?;
    json(
        r,
        "gram.json",
        &json!({
            "dataset": dataset_summary(&x),
            "g": export::summarize(&gp.g),
            "g_prime": export::summarize(&gp.g_prime),
            "g_symmetry_defect": linalg::symmetry_defect(&gp.g),
            "g_prime_symmetry_defect": linalg::symmetry_defect(&gp.g_prime),
            "graph": {
                "threshold": graph.threshold,
                "edges": graph.edge_count(),
                "connected": graph.is_connected(),
            },
        }),
    )
}

pub fn project(s: &Settings, r: &mut Report) -> Result<()> {
    let x = load(s)?;
    let inv = RegularizedInverse::new(&x, DEFAULT_INVERSE_CUTOFF)?;
    let pp_diag = inv.p_prime_diagonal();
    let p_diag = inv.p_diagonal();
    vector(r, "p_prime_diagonal.csv", "observation", "value", &pp_diag)?;
    vector(r, "p_diagonal.csv", "observable", "value", &p_diag)?;
    let rank = inv.retained_rank() as f64;
    json(
        r,
        "projection.json",
        &json!({
            "dataset": dataset_summary(&x),
            "inverse": inv.diagnostics(),
            "trace_p_prime": pp_diag.sum(),
            "trace_p": p_diag.sum(),
            "rss": (pp_diag.sum() - rank).abs() + (p_diag.sum() - rank).abs(),
        }),
    )
}

pub fn correlate(s: &Settings, r: &mut Report) -> Result<()> {
    let x = load(s)?;
    let k = n_latent(s, &x, 10).min(x.p());
    if k < 2 {
        return Err(Error::InvalidInput(
            "need at least two observations to correlate".into(),
        ));
    }
    let head = x.values().rows(0, k).transpose();
    let c = gramcore::pearson_columns(&head)?;
    matrix(r, "correlation.csv", &c.r, "obs")?;
    matrix(r, "ci_lower.csv", &c.lower, "obs")?;
    matrix(r, "ci_upper.csv", &c.upper, "obs")?;
    let neighbours: Vec<Vec<f64>> = (0..k - 1)
        .map(|i| {
            let sig = if c.significant(i, i + 1) { 1.0 } else { 0.0 };
            vec![
                i as f64,
                (i + 1) as f64,
                c.r[(i, i + 1)],
                c.lower[(i, i + 1)],
                c.upper[(i, i + 1)],
                sig,
            ]
        })
        .collect();
    table(
        r,
        "neighbours.csv",
        &["mu", "nu", "r", "lower", "upper", "significant"],
        &neighbours,
    )?;

    let inv = RegularizedInverse::new(&x, DEFAULT_INVERSE_CUTOFF)?;
    let mut kurt = Vec::with_capacity(k);
    for mu in 0..k {
        let row = x.values().row(mu).transpose();
        let conj = gramcore::conjugate(&x, &row, Side::Observations, &inv)?;
        let original: Vec<f64> = row.iter().copied().collect();
        let conjugate: Vec<f64> = conj.iter().copied().collect();
        kurt.push(vec![
            mu as f64,
            statmech::kurtosis(&original, true),
            statmech::kurtosis(&conjugate, true),
        ]);
    }
    table(
        r,
        "kurtosis.csv",
        &["observation", "original", "conjugate"],
        &kurt,
    )?;
    json(
        r,
        "correlation.json",
        &json!({
            "dataset": dataset_summary(&x),
            "variables": k,
            "samples": c.samples,
            "zero_variance": c.zero_variance,
            "inverse": inv.diagnostics(),
        }),
    )
}

pub fn spectral(s: &Settings, r: &mut Report) -> Result<()> {
    let x = load(s)?;
    let f = spectral::svd(&x, DEFAULT_SVD_CUTOFF)?;
    let n = n_latent(s, &x, 20).min(f.m_rank());
    rows(r, "spectrum.csv", &spectral::spectrum_table(&f))?;
    matrix(
        r,
        "eigen_observations.csv",
        &f.w().columns(0, n).into_owned(),
        "w",
    )?;
    let mut hist = Vec::new();
    for i in 0..n.min(3) {
        let mapping = spectral::eigen_mapping(&x, &f, i)?;
        let values: Vec<f64> = mapping.iter().copied().collect();
        for b in statmech::histogram(&values, HIST_BINS) {
            hist.push(vec![(i + 1) as f64, b.left, b.right, b.count as f64]);
        }
    }
    table(
        r,
        "eigen_mapping_histogram.csv",
        &["mode", "left", "right", "count"],
        &hist,
    )?;
    let mean_obs = DVector::from_fn(x.n_obs(), |j, _| x.values().column(j).mean());
    let w1 = f.w().column(0);
    let mean_alignment = w1.dot(&mean_obs).abs() / mean_obs.norm().max(f64::MIN_POSITIVE);
    let rmt = spectral::top_eigenvalue_asymptotic(400, 400, 5, s.seed())?;
    json(
        r,
        "spectral.json",
        &json!({
            "dataset": dataset_summary(&x),
            "rank": f.m_rank(),
            "n": n,
            "energy_retention": f.energy_retention(n),
            "tail_energy": f.tail_energy(n),
            "leading_mode_mean_alignment": mean_alignment,
            "random_matrix_top_eigenvalue": { "observed": rmt.observed_mean, "predicted": rmt.predicted, "ratio": rmt.ratio() },
        }),
    )
}

pub fn moments(s: &Settings, r: &mut Report) -> Result<()> {
    let x = load(s)?;
    let f = spectral::svd(&x, DEFAULT_SVD_CUTOFF)?;
    let top = f.m_rank().min(600);
    let scale = (x.p() as f64).sqrt();
    let mut table_rows = Vec::with_capacity(top);
    let mut moments = Vec::with_capacity(top);
    for i in 0..top {
        let v: Vec<f64> = f.v().column(i).iter().map(|e| e * scale).collect();
        let m4 = statmech::fourth_moment(&v);
        moments.push(m4);
        table_rows.push(vec![(i + 1) as f64, f.lambdas()[i], m4]);
    }
    table(
        r,
        "fourth_moments.csv",
        &["index", "lambda", "fourth_moment"],
        &table_rows,
    )?;
    let mut bottom: Vec<f64> = moments[top / 2..].to_vec();
    bottom.sort_by(f64::total_cmp);
    let median = if bottom.is_empty() {
        f64::NAN
    } else {
        bottom[bottom.len() / 2]
    };
    let mut rng = linalg::rng(s.seed());
    let control = linalg::gaussian_matrix(x.p().max(1000), 1, &mut rng);
    let control: Vec<f64> = control.iter().copied().collect();
    json(
        r,
        "moments.json",
        &json!({
            "dataset": dataset_summary(&x),
            "modes": top,
            "bottom_half_median": median,
            "gaussian_control": statmech::fourth_moment(&control),
        }),
    )
}

fn energy_model(a: EnergyArg) -> EnergyModel {
    match a {
        EnergyArg::Ferro => EnergyModel::FerroOverlap,
        EnergyArg::FerroConj => EnergyModel::FerroConjugate,
        EnergyArg::Antiferro => EnergyModel::AntiFerroOverlap,
        EnergyArg::AntiferroConj => EnergyModel::AntiFerroConjugate,
    }
}

pub fn energy(s: &Settings, r: &mut Report) -> Result<()> {
    let x = load(s)?;
    let model = energy_model(s.energy_model.unwrap_or(EnergyArg::Ferro));
    let t = s.temperature.unwrap_or(1.0);
    let gp = gramcore::gram(&x);
    let inv = if model.needs_inverse() {
        Some(RegularizedInverse::new(&x, DEFAULT_INVERSE_CUTOFF)?)
    } else {
        None
    };
    let eps = statmech::energies(&x, &gp, inv.as_ref(), model)?;
    let part = statmech::boltzmann_probabilities(&eps, t)?;
    let (order, reordered) = statmech::rank_and_reorder(&gp, &part.probabilities)?;
    let mut rank_of = vec![0usize; order.len()];
    for (rank, &mu) in order.iter().enumerate() {
        rank_of[mu] = rank;
    }
    let data: Vec<Vec<f64>> = (0..x.p())
        .map(|mu| {
            vec![
                mu as f64,
                eps[mu],
                part.probabilities[mu],
                rank_of[mu] as f64,
            ]
        })
        .collect();
    table(
        r,
        "energies.csv",
        &["observation", "energy", "probability", "rank"],
        &data,
    )?;
    let values: Vec<f64> = eps.iter().copied().collect();
    rows(
        r,
        "energy_histogram.csv",
        &statmech::histogram(&values, HIST_BINS),
    )?;
    vector(
        r,
        "reordered_diagonal.csv",
        "rank",
        "g_prime",
        &reordered.diagonal(),
    )?;
    json(
        r,
        "energy.json",
        &json!({
            "dataset": dataset_summary(&x),
            "model": model,
            "temperature": t,
            "log_z": part.log_z,
            "most_probable": order.iter().rev().take(10).collect::<Vec<_>>(),
            "inverse": inv.map(|i| i.diagnostics()),
        }),
    )
}

pub fn dimred(s: &Settings, r: &mut Report) -> Result<()> {
    let x = load(s)?;
    let f = spectral::svd(&x, DEFAULT_SVD_CUTOFF)?;
    let n = n_latent(s, &x, 20);
    let wanted = s.scenario.unwrap_or(ScenarioArg::All);
    let rot = linalg::random_orthogonal(n, s.seed().wrapping_add(n as u64));
    let label = match wanted {
        ScenarioArg::A => Some("a"),
        ScenarioArg::B => Some("b"),
        ScenarioArg::C => Some("c"),
        ScenarioArg::D => Some("d"),
        ScenarioArg::Dprime => Some("d'"),
        ScenarioArg::All => None,
    };
    let reports: Vec<_> = dimred::scenario_sweep(&x, &f, &[n], s.seed())?
        .into_iter()
        .filter(|rep| label.is_none_or(|l| rep.scenario == l))
        .collect();
    rows(r, "scenarios.csv", &reports)?;
    let duality = dimred::duality_check(&x, &f, n, &rot)?;
    let (_, _, w_hat) = f.leading(n)?;
    let w_diag = DVector::from_fn(w_hat.nrows(), |j, _| w_hat.row(j).norm_squared());
    vector(
        r,
        "observable_coverage.csv",
        "observable",
        "p_hat_diagonal",
        &w_diag,
    )?;
    for sc in MixingScenario::all(&rot)
        .iter()
        .filter(|sc| label.is_none_or(|l| sc.label() == l))
    {
        let ws = dimred::scenario_weights(&f, n, sc)?;
        let tag = sc.label().replace('\'', "prime");
        matrix(r, &format!("w1_{tag}.csv"), &ws.w1, "latent")?;
        let (y, _) = dimred::latent(&x, &ws)?;
        let report = reports.iter().find(|rep| rep.scenario == sc.label());
        json(
            r,
            &format!("scenario_{tag}.json"),
            &json!({
                "scenario": sc.label(),
                "n": n,
                "report": report,
                "latent_gram_diagonal": (y.transpose() * &y).diagonal().iter().collect::<Vec<_>>(),
            }),
        )?;
    }
    json(
        r,
        "dimred.json",
        &json!({
            "dataset": dataset_summary(&x),
            "n": n,
            "tail_energy": f.tail_energy(n),
            "energy_retention": f.energy_retention(n),
            "duality": duality,
            "duality_max_residual": duality.max_residual(),
            "unused_observables": w_diag.iter().filter(|&&d| d < 1e-6).count(),
        }),
    )
}

pub fn optimize(s: &Settings, r: &mut Report) -> Result<()> {
    let x = load(s)?;
    let n = n_latent(s, &x, 20);
    let delta = s.delta.unwrap_or_else(|| optim::suggested_delta(&x));
    let iters = s.iters.unwrap_or(10_000);
    let rule = s.rule.unwrap_or(RuleArg::Untied);
    let f = spectral::svd(&x, DEFAULT_SVD_CUTOFF)?;
    if rule == RuleArg::Ortho {
        let out = optim::orthogonalize(&x, n, iters, delta, OrthoInit::Random(s.seed()))?;
        matrix(r, "v2.csv", &out.weights.v2, "latent")?;
        matrix(r, "w2.csv", &out.weights.w2, "observable")?;
        return json(
            r,
            "optimize.json",
            &json!({
                "dataset": dataset_summary(&x),
                "rule": UpdateRule::Orthogonalization,
                "n": n,
                "delta": delta,
                "iterations": out.iterations,
                "deviation": out.deviation,
            }),
        );
    }
    let rule = match rule {
        RuleArg::Untied => UpdateRule::UntiedBackprop,
        RuleArg::Rbm => UpdateRule::TiedRbm,
        _ => UpdateRule::IncrementalTied,
    };
    let cfg = TrainConfig::new(n, rule, delta, iters, s.seed());
    let out = optim::train(&x, &cfg)?;
    rows(r, "history.csv", &out.state.history)?;
    matrix(r, "w1.csv", &out.state.weights.w1, "latent")?;
    matrix(r, "w2.csv", &out.state.weights.w2, "observable")?;
    json(
        r,
        "optimize.json",
        &json!({
            "dataset": dataset_summary(&x),
            "config": cfg,
            "stop": out.stop,
            "iterations": out.state.m,
            "final_error": out.final_error,
            "tail_energy": out.tail_energy,
            "error_over_tail": out.final_error / out.tail_energy,
            "svd_rank": f.m_rank(),
        }),
    )
}

pub fn oscillate(s: &Settings, r: &mut Report) -> Result<()> {
    let x = load(s)?;
    let f = spectral::svd(&x, DEFAULT_SVD_CUTOFF)?;
    let n = n_latent(s, &x, 20).min(f.m_rank());
    let dt = s.dt.unwrap_or(0.01);
    let steps = s.iters.unwrap_or(1000);
    let p0 = x.values().row(0).transpose();
    let start = OscillatorState::new(p0, DVector::zeros(x.n_obs()))?;
    let modes = NormalModes::from_factors(&f);
    let top = 10.min(f.m_rank());
    let traj = oscillator::trajectory(&modes, &start, dt, steps, top)?;
    let mut header = vec![
        "t".to_string(),
        "h".into(),
        "kinetic".into(),
        "potential".into(),
    ];
    header.extend((1..=top).map(|i| format!("mode_{i}")));
    let data: Vec<Vec<f64>> = traj
        .iter()
        .map(|row| {
            let mut v = vec![row.t, row.h, row.kinetic, row.potential];
            v.extend(&row.mode_energies);
            v
        })
        .collect();
    r.write("trajectory.csv", |w| {
        export::write_table_csv(w, &header, &data)
    })?;
    let r2: Vec<Vec<f64>> = (1..=f.m_rank())
        .map(|k| vec![k as f64, oscillator::r_squared(&f, k)])
        .collect();
    table(r, "r_squared.csv", &["n", "r_squared"], &r2)?;
    let (_, noise) = oscillator::truncated_propagate(&start, &f, n, dt * steps as f64)?;
    let h0 = traj.first().map_or(0.0, |row| row.h);
    let drift = traj
        .iter()
        .map(|row| (row.h - h0).abs())
        .fold(0.0, f64::max)
        / h0.abs().max(f64::MIN_POSITIVE);
    json(
        r,
        "oscillator.json",
        &json!({
            "dataset": dataset_summary(&x),
            "n": n,
            "dt": dt,
            "steps": steps,
            "relative_energy_drift": drift,
            "noise": noise,
            "noise_within_bound": noise.within_bound(),
            "r_squared": oscillator::r_squared(&f, n),
        }),
    )
}

/// Runs the built-in checks. Returns whether all of them passed.
pub fn selftest(s: &Settings, r: Option<&mut Report>) -> Result<bool> {
    let checks = trainspace::selftest::run(s.seed())?;
    let mut stdout = std::io::stdout().lock();
    for c in &checks {
        let status = if c.passed { "ok" } else { "FAIL" };
        writeln!(
            stdout,
            "{status:4} {:<40} {:.3e} (tol {:.1e})",
            c.name, c.value, c.tolerance
        )?;
    }
    if let Some(r) = r {
        json(r, "selftest.json", &checks)?;
    }
    Ok(checks.iter().all(|c| c.passed))
}
