use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Idx,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioArg {
    A,
    B,
    C,
    D,
    Dprime,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleArg {
    Untied,
    Rbm,
    Incremental,
    Ortho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyArg {
    Ferro,
    FerroConj,
    Antiferro,
    AntiferroConj,
}

/// Flags shared by every subcommand. Anything left unset may come from the
/// `--config` file.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct Settings {
    /// Dataset path: an IDX image file, a directory holding
    /// train-images-idx3-ubyte, or a CSV file.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Keep only the first P observations.
    #[arg(long, global = true, value_name = "P")]
    pub take: Option<usize>,
    /// Project observations onto the leading N eigen-observations.
    #[arg(long = "rank-reduce", global = true, value_name = "N")]
    pub rank_reduce: Option<usize>,
    /// Latent dimension.
    #[arg(long, global = true, value_name = "LATENT")]
    pub n: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub scenario: Option<ScenarioArg>,
    #[arg(long, global = true, value_enum)]
    pub rule: Option<RuleArg>,
    /// Learning parameter.
    #[arg(long, global = true, value_name = "F")]
    pub delta: Option<f64>,
    #[arg(long, global = true, value_name = "K")]
    pub iters: Option<usize>,
    #[arg(long, global = true, value_name = "F")]
    pub temperature: Option<f64>,
    #[arg(long = "energy-model", global = true, value_enum)]
    pub energy_model: Option<EnergyArg>,
    /// Edge threshold for the training graph.
    #[arg(long, global = true, value_name = "F")]
    pub threshold: Option<f64>,
    /// Time step for oscillator trajectories.
    #[arg(long, global = true, value_name = "F")]
    pub dt: Option<f64>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    #[serde(skip)]
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Key/value file (`take = 5000`) supplying defaults for unset flags.
    #[serde(skip)]
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

fn parse_enum<T: ValueEnum>(key: &str, s: &str) -> Result<T, String> {
    T::from_str(s, true).map_err(|_| format!("config key `{key}`: invalid value `{s}`"))
}

fn as_string(key: &str, v: &toml::Value) -> Result<String, String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        _ => Err(format!("config key `{key}`: unsupported value")),
    }
}

fn as_usize(key: &str, v: &toml::Value) -> Result<usize, String> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => as_string(key, v)?
            .parse()
            .map_err(|_| format!("config key `{key}`: expected a non-negative integer")),
    }
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64, String> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => as_string(key, v)?
            .parse()
            .map_err(|_| format!("config key `{key}`: expected a number")),
    }
}

impl Settings {
    /// Fills unset fields from a config file. Explicit flags win.
    pub fn merge_config(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| format!("config {}: {e}", path.display()))?;
        for (key, v) in &table {
            let k = key.replace('_', "-");
            match k.as_str() {
                "input" => fill(&mut self.input, || Ok(PathBuf::from(as_string(key, v)?)))?,
                "format" => fill(&mut self.format, || parse_enum(key, &as_string(key, v)?))?,
                "take" => fill(&mut self.take, || as_usize(key, v))?,
                "rank-reduce" => fill(&mut self.rank_reduce, || as_usize(key, v))?,
                "n" => fill(&mut self.n, || as_usize(key, v))?,
                "scenario" => fill(&mut self.scenario, || parse_enum(key, &as_string(key, v)?))?,
                "rule" => fill(&mut self.rule, || parse_enum(key, &as_string(key, v)?))?,
                "delta" => fill(&mut self.delta, || as_f64(key, v))?,
                "iters" => fill(&mut self.iters, || as_usize(key, v))?,
                "temperature" => fill(&mut self.temperature, || as_f64(key, v))?,
                "energy-model" => fill(&mut self.energy_model, || {
                    parse_enum(key, &as_string(key, v)?)
                })?,
                "threshold" => fill(&mut self.threshold, || as_f64(key, v))?,
                "dt" => fill(&mut self.dt, || as_f64(key, v))?,
                "seed" => fill(&mut self.seed, || as_usize(key, v).map(|s| s as u64))?,
                "out" => fill(&mut self.out, || Ok(PathBuf::from(as_string(key, v)?)))?,
                _ => return Err(format!("unknown config key `{key}`")),
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

fn fill<T>(slot: &mut Option<T>, value: impl FnOnce() -> Result<T, String>) -> Result<(), String> {
    if slot.is_none() {
        *slot = Some(value()?);
    }
    Ok(())
}
