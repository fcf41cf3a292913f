use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use disag_core::bvar::{McmcSettings, PriorOverrides, Sign, SignPattern};
use disag_core::pipeline::{Role, SourceFrequency, Tcode};
use disag_core::survey_index::{Category, Method};
use disag_core::{Frequency, Period};
use serde::Deserialize;

use crate::error::{in_config, CliError, CliResult};

pub const DATA_DIR_ENV: &str = "DISAG_DATA_DIR";
pub const DEFAULT_SEED: u64 = 0;
pub const MONTHLY_LAGS: usize = 13;
pub const QUARTERLY_LAGS: usize = 4;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    /// Base for relative input paths. Relative to the config file itself.
    pub data_dir: Option<PathBuf>,
    pub index: Option<IndexConfig>,
    pub simulate: Option<SimulateConfig>,
    pub estimate: Option<EstimateConfig>,
    pub irf: Option<IrfConfig>,
    pub fevd: Option<FevdConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    /// Per-question measure fed to the principal component.
    #[serde(default = "default_measure")]
    pub measure: Method,
    pub questions: Vec<PathBuf>,
    pub lacy_order: Option<[Category; 3]>,
}

fn default_method() -> Method {
    Method::Pca
}

fn default_measure() -> Method {
    Method::Tail
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_order")]
    pub n: usize,
    #[serde(default = "default_order")]
    pub k: usize,
    #[serde(default = "default_agents")]
    pub n_agents: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_grid")]
    pub grid_eps2: Vec<f64>,
    #[serde(default = "default_grid")]
    pub grid_v2: Vec<f64>,
}

fn default_beta() -> f64 {
    0.5
}

fn default_order() -> usize {
    12
}

fn default_agents() -> usize {
    10_000
}

fn default_replications() -> usize {
    200
}

fn default_grid() -> Vec<f64> {
    vec![1.0, 2.0, 3.0, 4.0, 5.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// Already transformed panel, `date,<var>,...`. Alternative to `series`.
    pub design: Option<PathBuf>,
    #[serde(default)]
    pub series: Vec<SeriesEntry>,
    pub lags: Option<usize>,
    pub sample_start: Option<Period>,
    pub sample_end: Option<Period>,
    pub shocks: Vec<String>,
    pub signs: SignsSpec,
    #[serde(default)]
    pub mcmc: McmcSettings,
    #[serde(default)]
    pub priors: PriorOverrides,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesEntry {
    pub mnemonic: String,
    pub file: Option<PathBuf>,
    /// `"index"` takes the series from the disagreement index of this run.
    pub source: Option<String>,
    pub tcode: Tcode,
    pub frequency: SourceFrequency,
    pub role: Role,
}

/// Either a CSV with header `variable,shock,sign` or an inline table
/// `variable -> shock -> sign`. Unlisted entries are free.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SignsSpec {
    File(PathBuf),
    Table(BTreeMap<String, BTreeMap<String, String>>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrfConfig {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    /// Directory holding a previous `estimate` run; defaults to `--out`.
    pub draws: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FevdConfig {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    pub draws: Option<PathBuf>,
}

fn default_horizon() -> usize {
    48
}

fn default_levels() -> Vec<f64> {
    disag_core::structural::DEFAULT_BAND_LEVELS.to_vec()
}

impl Default for IrfConfig {
    fn default() -> Self {
        IrfConfig { horizon: default_horizon(), levels: default_levels(), draws: None }
    }
}

impl Default for FevdConfig {
    fn default() -> Self {
        FevdConfig { horizon: default_horizon(), draws: None }
    }
}

/// A parsed config with its raw text and the base directory for inputs.
pub struct Loaded {
    pub config: Config,
    pub text: String,
    pub base_dir: PathBuf,
}

pub fn load(path: &Path, env_data_dir: Option<PathBuf>) -> CliResult<Loaded> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    let config: Config = toml::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let config_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let base_dir = match (&config.data_dir, env_data_dir) {
        (Some(d), _) => config_dir.join(d),
        (None, Some(env)) => env,
        (None, None) => config_dir,
    };
    Ok(Loaded { config, text, base_dir })
}

impl Loaded {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn section<'a, T>(&self, s: &'a Option<T>, name: &str) -> CliResult<&'a T> {
        s.as_ref()
            .ok_or_else(|| CliError::config(format!("config has no [{name}] section")))
    }
}

impl EstimateConfig {
    pub fn lags_for(&self, freq: Frequency) -> usize {
        self.lags.unwrap_or(match freq {
            Frequency::Monthly => MONTHLY_LAGS,
            Frequency::Quarterly => QUARTERLY_LAGS,
        })
    }

    pub fn window(&self) -> CliResult<Option<(Period, Period)>> {
        match (self.sample_start, self.sample_end) {
            (None, None) => Ok(None),
            (Some(s), Some(e)) => Ok(Some((s, e))),
            _ => Err(CliError::config("set both sample_start and sample_end, or neither")),
        }
    }
}

/// Builds the `n × r` pattern from `(variable, shock, sign)` triples.
pub fn sign_pattern(
    variables: &[String],
    shocks: &[String],
    triples: &[(String, String, String)],
) -> CliResult<SignPattern> {
    if shocks.is_empty() {
        return Err(CliError::config("no shocks declared"));
    }
    let mut pattern = SignPattern::free(variables.len(), shocks.len());
    let mut seen = BTreeMap::new();
    for (var, shock, sign) in triples {
        let i = variables
            .iter()
            .position(|v| v == var)
            .ok_or_else(|| CliError::config(format!("sign table names unknown variable `{var}`")))?;
        let j = shocks
            .iter()
            .position(|s| s == shock)
            .ok_or_else(|| CliError::config(format!("sign table names unknown shock `{shock}`")))?;
        if seen.insert((i, j), ()).is_some() {
            return Err(CliError::config(format!("sign for ({var}, {shock}) given twice")));
        }
        let s: Sign = sign.parse().map_err(in_config)?;
        pattern.set(i, j, s);
    }
    Ok(pattern)
}

pub fn sign_triples(spec: &SignsSpec, loaded: &Loaded) -> CliResult<Vec<(String, String, String)>> {
    match spec {
        SignsSpec::Table(t) => Ok(t
            .iter()
            .flat_map(|(v, row)| row.iter().map(move |(s, sign)| (v.clone(), s.clone(), sign.clone())))
            .collect()),
        SignsSpec::File(p) => {
            let path = loaded.resolve(p);
            let mut rdr = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_path(&path)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            let headers = rdr.headers()?.clone();
            if headers.iter().collect::<Vec<_>>() != ["variable", "shock", "sign"] {
                return Err(CliError::config(format!(
                    "{}: expected header variable,shock,sign",
                    path.display()
                )));
            }
            let mut out = Vec::new();
            for rec in rdr.records() {
                let rec = rec?;
                out.push((rec[0].to_string(), rec[1].to_string(), rec[2].to_string()));
            }
            Ok(out)
        }
    }
}
