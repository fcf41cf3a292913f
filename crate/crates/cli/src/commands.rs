use std::path::{Path, PathBuf};
use std::time::Instant;

use disag_core::bvar::{
    build_design, run_mcmc, EssSummary, McmcSettings, PosteriorDraws, Priors, VarConfig,
};
use disag_core::dispersion::{disagreement_surface, SurfaceConfig};
use disag_core::pipeline::{assemble_dataset, RawSeries, SeriesSpec, SourceFrequency, TimeSeries};
use disag_core::stats;
use disag_core::structural::{fevd, fevd_bands, impulse_responses, posterior_bands, Bands};
use disag_core::survey_index::{
    entropy_disagreement, lacy_disagreement, pca_first_component, standardize, tail_disagreement,
    CategoricalSeries, CategoryOrder, DisagreementIndex, Method,
};
use disag_core::Period;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{self, EstimateConfig, FevdConfig, IrfConfig, Loaded};
use crate::error::{in_config, CliError, CliResult};
use crate::io::{self, num, CsvOut};

pub struct Ctx {
    pub loaded: Loaded,
    pub seed: u64,
    pub out: PathBuf,
}

impl Ctx {
    fn out(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Keeps the config next to its outputs.
    fn save_config(&self) -> CliResult<()> {
        io::write_atomic(&self.out("config.toml"), self.loaded.text.as_bytes())
    }
}

#[derive(Serialize)]
struct IndexManifest<'a> {
    method: Method,
    measure: Option<Method>,
    loadings: Option<&'a [f64]>,
    source_questions: &'a [String],
    explained_variance_share: Option<f64>,
    eigenvalue: Option<f64>,
}

pub fn index(ctx: &Ctx) -> CliResult<DisagreementIndex> {
    let cfg = ctx.loaded.section(&ctx.loaded.config.index, "index")?;
    if cfg.questions.is_empty() {
        return Err(CliError::config("[index] lists no questions"));
    }
    let questions = cfg
        .questions
        .iter()
        .map(|p| io::read_question(&ctx.loaded.resolve(p)))
        .collect::<CliResult<Vec<_>>>()?;
    let order = match cfg.lacy_order {
        Some(o) => CategoryOrder::new(o).map_err(in_config)?,
        None => CategoryOrder::default(),
    };
    let measure = |q: &CategoricalSeries, m: Method| -> CliResult<DisagreementIndex> {
        Ok(match m {
            Method::Tail => tail_disagreement(q),
            Method::Entropy => entropy_disagreement(q)?,
            Method::Lacy => lacy_disagreement(q, order)?,
            Method::Pca => return Err(CliError::config("pca is not a per-question measure")),
        })
    };

    let (index, pc) = match cfg.method {
        Method::Pca => {
            let inputs = questions
                .iter()
                .map(|q| Ok(standardize(&measure(q, cfg.measure)?)?))
                .collect::<CliResult<Vec<_>>>()?;
            let pc = pca_first_component(&inputs)?;
            (pc.index.clone(), Some(pc))
        }
        m => {
            if questions.len() != 1 {
                return Err(CliError::config(format!(
                    "method {m:?} takes exactly one question, got {}; use pca to combine",
                    questions.len()
                )));
            }
            (measure(&questions[0], m)?, None)
        }
    };

    let mut csv = CsvOut::new(&["date", "value"])?;
    for (d, v) in index.dates.iter().zip(&index.values) {
        csv.row([d.to_string(), num(*v)])?;
    }
    csv.finish(&ctx.out("index.csv"))?;
    io::write_json(
        &ctx.out("index.json"),
        &IndexManifest {
            method: cfg.method,
            measure: (cfg.method == Method::Pca).then_some(cfg.measure),
            loadings: index.loadings.as_deref(),
            source_questions: &index.source_questions,
            explained_variance_share: pc.as_ref().map(|p| p.explained_variance_share),
            eigenvalue: pc.as_ref().map(|p| p.eigenvalue),
        },
    )?;
    ctx.save_config()?;
    log::info!("index: {} periods from {} question(s)", index.values.len(), questions.len());
    Ok(index)
}

#[derive(Serialize)]
struct SurfaceManifest {
    seed: u64,
    beta: f64,
    n: usize,
    k: usize,
    n_agents: usize,
    replications: usize,
    grid_eps2: Vec<f64>,
    grid_v2: Vec<f64>,
    /// Spearman correlation of the mean with σ_v² along each σ_ε² row.
    spearman_along_sigma_v2: Vec<f64>,
    /// Spearman correlation of the mean with σ_ε² down each σ_v² column.
    spearman_along_sigma_eps2: Vec<f64>,
    wall_time_secs: f64,
}

pub fn simulate(ctx: &Ctx) -> CliResult<()> {
    let cfg = ctx.loaded.section(&ctx.loaded.config.simulate, "simulate")?;
    let sc = SurfaceConfig {
        grid_eps2: cfg.grid_eps2.clone(),
        grid_v2: cfg.grid_v2.clone(),
        beta: cfg.beta,
        n: cfg.n,
        k: cfg.k,
        n_agents: cfg.n_agents,
        replications: cfg.replications,
        seed: ctx.seed,
    };
    let start = Instant::now();
    let surf = disagreement_surface(&sc).map_err(in_config)?;
    let wall = start.elapsed().as_secs_f64();

    let mut csv = CsvOut::new(&["sigma_eps2", "sigma_v2", "mean_tilde_T", "se_tilde_T"])?;
    for (i, e) in surf.grid_eps2.iter().enumerate() {
        for (j, v) in surf.grid_v2.iter().enumerate() {
            csv.row([num(*e), num(*v), num(surf.mean[i][j]), num(surf.se[i][j])])?;
        }
    }
    csv.finish(&ctx.out("surface.csv"))?;

    let along_v2 = surf.mean.iter().map(|row| stats::spearman(&surf.grid_v2, row)).collect();
    let along_eps2 = (0..surf.grid_v2.len())
        .map(|j| {
            let col: Vec<f64> = surf.mean.iter().map(|row| row[j]).collect();
            stats::spearman(&surf.grid_eps2, &col)
        })
        .collect();
    io::write_json(
        &ctx.out("surface.json"),
        &SurfaceManifest {
            seed: ctx.seed,
            beta: cfg.beta,
            n: cfg.n,
            k: cfg.k,
            n_agents: cfg.n_agents,
            replications: cfg.replications,
            grid_eps2: surf.grid_eps2.clone(),
            grid_v2: surf.grid_v2.clone(),
            spearman_along_sigma_v2: along_v2,
            spearman_along_sigma_eps2: along_eps2,
            wall_time_secs: wall,
        },
    )?;
    ctx.save_config()
}

struct Panel {
    dates: Vec<Period>,
    names: Vec<String>,
    data: DMatrix<f64>,
    warnings: Vec<String>,
}

fn load_panel(ctx: &Ctx, est: &EstimateConfig, index: Option<&DisagreementIndex>) -> CliResult<Panel> {
    let window = est.window()?;
    match (&est.design, est.series.is_empty()) {
        (Some(_), false) => Err(CliError::config("[estimate] sets both design and series")),
        (None, true) => Err(CliError::config("[estimate] needs design or [[estimate.series]]")),
        (Some(path), true) => {
            let (dates, names, data) = io::read_matrix(&ctx.loaded.resolve(path))?;
            let (lo, hi) = match window {
                None => (0, dates.len()),
                Some((s, e)) => {
                    let lo = dates.iter().position(|d| *d >= s).unwrap_or(dates.len());
                    let hi = dates.iter().rposition(|d| *d <= e).map_or(0, |i| i + 1);
                    if lo >= hi {
                        return Err(CliError::data(format!("design has no rows inside {s} to {e}")));
                    }
                    (lo, hi)
                }
            };
            Ok(Panel {
                dates: dates[lo..hi].to_vec(),
                names,
                data: data.rows(lo, hi - lo).into_owned(),
                warnings: Vec::new(),
            })
        }
        (None, false) => {
            let mut specs = Vec::new();
            let mut raw = Vec::new();
            for s in &est.series {
                specs.push(SeriesSpec {
                    mnemonic: s.mnemonic.clone(),
                    tcode: s.tcode,
                    frequency: s.frequency,
                    role: s.role,
                });
                raw.push(match (&s.file, s.source.as_deref()) {
                    (Some(f), None) => {
                        let path = ctx.loaded.resolve(f);
                        match s.frequency {
                            SourceFrequency::Daily => RawSeries::Daily(io::read_daily(&path, &s.mnemonic)?),
                            _ => RawSeries::Periodic(io::read_periodic(&path, &s.mnemonic)?),
                        }
                    }
                    (None, Some("index")) => RawSeries::Periodic(match index {
                        Some(ix) => TimeSeries::new(&s.mnemonic, ix.dates.clone(), ix.values.clone())?,
                        None => io::read_periodic(&ctx.out("index.csv"), &s.mnemonic)?,
                    }),
                    _ => {
                        return Err(CliError::config(format!(
                            "series {} needs exactly one of file or source = \"index\"",
                            s.mnemonic
                        )))
                    }
                });
            }
            let ds = assemble_dataset(&specs, raw, window)?;
            let names = ds.names();
            Ok(Panel { dates: ds.dates, names, data: ds.data, warnings: ds.warnings })
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrawsManifest {
    pub variables: Vec<String>,
    pub shocks: Vec<String>,
    pub lags: usize,
    pub sample_start: Period,
    pub sample_end: Period,
    pub observations: usize,
    pub seed: u64,
    pub settings: McmcSettings,
    pub retained: usize,
    /// One row per variable, shock signs separated by spaces.
    pub sign_pattern: Vec<String>,
    pub ess: Vec<EssSummary>,
    pub wall_time_secs: f64,
    pub warnings: Vec<String>,
}

fn regressor_names(vars: &[String], p: usize) -> Vec<String> {
    let mut out = vec!["const".to_string()];
    for l in 1..=p {
        out.extend(vars.iter().map(|v| format!("{v}.l{l}")));
    }
    out
}

fn matrix_header(rows: &[String], cols: &[String]) -> Vec<String> {
    let mut h = vec!["draw".to_string()];
    for r in rows {
        h.extend(cols.iter().map(|c| format!("{r}~{c}")));
    }
    h
}

/// One row per draw, matrix entries row-major.
fn write_matrix_draws(path: &Path, header: &[String], mats: &[DMatrix<f64>]) -> CliResult<()> {
    let mut csv = CsvOut::new(header)?;
    for (d, m) in mats.iter().enumerate() {
        let mut row = vec![d.to_string()];
        row.extend(m.transpose().iter().map(|v| num(*v)));
        csv.row(row)?;
    }
    csv.finish(path)
}

fn write_vector_draws(path: &Path, names: &[String], vecs: &[DVector<f64>]) -> CliResult<()> {
    let mut header = vec!["draw".to_string()];
    header.extend(names.iter().cloned());
    let mut csv = CsvOut::new(&header)?;
    for (d, v) in vecs.iter().enumerate() {
        let mut row = vec![d.to_string()];
        row.extend(v.iter().map(|x| num(*x)));
        csv.row(row)?;
    }
    csv.finish(path)
}

fn read_matrix_draws(path: &Path, header: &[String], nrows: usize, ncols: usize) -> CliResult<Vec<DMatrix<f64>>> {
    io::read_table(path, header)?
        .into_iter()
        .enumerate()
        .map(|(d, row)| {
            if row[0] != d as f64 {
                return Err(CliError::data(format!("{}: draw {d} out of order", path.display())));
            }
            Ok(DMatrix::from_row_slice(nrows, ncols, &row[1..]))
        })
        .collect()
}

pub fn estimate(ctx: &Ctx, index: Option<&DisagreementIndex>) -> CliResult<DrawsManifest> {
    let est = ctx.loaded.section(&ctx.loaded.config.estimate, "estimate")?;
    let panel = load_panel(ctx, est, index)?;
    let freq = panel.dates[0].frequency();
    let p = est.lags_for(freq);
    let triples = config::sign_triples(&est.signs, &ctx.loaded)?;
    let pattern = config::sign_pattern(&panel.names, &est.shocks, &triples)?;
    let (n, r) = (panel.names.len(), est.shocks.len());
    let var_cfg = VarConfig {
        n_vars: n,
        n_lags: p,
        n_factors: r,
        sign_pattern: pattern.clone(),
        settings: est.mcmc,
        seed: ctx.seed,
    };
    var_cfg.validate().map_err(in_config)?;
    let priors = Priors::with_overrides(n, r, &est.priors).map_err(in_config)?;
    let design = build_design(&panel.data, p)?;

    let start = Instant::now();
    let draws = run_mcmc(&design, &var_cfg, &priors)?;
    let wall = start.elapsed().as_secs_f64();

    io::write_matrix(&ctx.out("dataset.csv"), &panel.dates, &panel.names, &panel.data)?;
    let dir = ctx.out("draws");
    let regs = regressor_names(&panel.names, p);
    write_matrix_draws(&dir.join("phi.csv"), &matrix_header(&panel.names, &regs), &draws.phi)?;
    write_matrix_draws(&dir.join("lambda.csv"), &matrix_header(&panel.names, &est.shocks), &draws.lambda)?;
    write_vector_draws(&dir.join("sigma2.csv"), &panel.names, &draws.sigma)?;
    write_matrix_draws(
        &dir.join("horseshoe_local.csv"),
        &matrix_header(&panel.names, &regs),
        &draws.horseshoe_local,
    )?;
    write_vector_draws(&dir.join("horseshoe_global.csv"), &panel.names, &draws.horseshoe_global)?;
    let factor_dates = &panel.dates[p..];
    let mut header = vec!["draw".to_string(), "date".to_string()];
    header.extend(est.shocks.iter().cloned());
    let mut csv = CsvOut::new(&header)?;
    for (d, f) in draws.factors.iter().enumerate() {
        for (t, date) in factor_dates.iter().enumerate() {
            let mut row = vec![d.to_string(), date.to_string()];
            row.extend(f.row(t).iter().map(|v| num(*v)));
            csv.row(row)?;
        }
    }
    csv.finish(&dir.join("factors.csv"))?;

    let mut warnings = panel.warnings;
    warnings.extend(design.warnings.iter().cloned());
    let manifest = DrawsManifest {
        variables: panel.names.clone(),
        shocks: est.shocks.clone(),
        lags: p,
        sample_start: panel.dates[0],
        sample_end: *panel.dates.last().expect("nonempty panel"),
        observations: panel.dates.len(),
        seed: ctx.seed,
        settings: est.mcmc,
        retained: draws.len(),
        sign_pattern: (0..n)
            .map(|i| (0..r).map(|j| pattern.get(i, j).symbol()).collect::<Vec<_>>().join(" "))
            .collect(),
        ess: draws.ess_table(),
        wall_time_secs: wall,
        warnings,
    };
    io::write_json(&ctx.out("manifest.json"), &manifest)?;
    ctx.save_config()?;
    log::info!("estimate: kept {} draws in {wall:.1}s", draws.len());
    Ok(manifest)
}

/// Reads `Φ`, `Λ` and `Σ` back from an `estimate` output directory. Factor
/// and Horseshoe draws are not needed downstream and are left empty.
pub fn read_draws(dir: &Path) -> CliResult<(DrawsManifest, PosteriorDraws)> {
    let mpath = dir.join("manifest.json");
    let text = std::fs::read_to_string(&mpath).map_err(|e| CliError::io(&mpath, e))?;
    let m: DrawsManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("{}: {e}", mpath.display())))?;
    let (n, r) = (m.variables.len(), m.shocks.len());
    let regs = regressor_names(&m.variables, m.lags);
    let d = dir.join("draws");
    let phi = read_matrix_draws(&d.join("phi.csv"), &matrix_header(&m.variables, &regs), n, regs.len())?;
    let lambda = read_matrix_draws(&d.join("lambda.csv"), &matrix_header(&m.variables, &m.shocks), n, r)?;
    let mut header = vec!["draw".to_string()];
    header.extend(m.variables.iter().cloned());
    let sigma: Vec<DVector<f64>> = read_matrix_draws(&d.join("sigma2.csv"), &header, n, 1)?
        .into_iter()
        .map(|c| c.column(0).into_owned())
        .collect();
    if phi.len() != m.retained || lambda.len() != m.retained || sigma.len() != m.retained {
        return Err(CliError::data(format!(
            "{}: draw files disagree with the manifest count {}",
            d.display(),
            m.retained
        )));
    }
    let draws = PosteriorDraws {
        n_lags: m.lags,
        phi,
        lambda,
        sigma,
        factors: Vec::new(),
        horseshoe_local: Vec::new(),
        horseshoe_global: Vec::new(),
    };
    Ok((m, draws))
}

fn level_label(level: f64) -> String {
    let pct = level * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("q{}", pct.round() as i64)
    } else {
        format!("q{pct}")
    }
}

fn write_bands(path: &Path, bands: &Bands, variables: &[String], slots: &[String]) -> CliResult<()> {
    let mut header = vec!["variable".to_string(), "shock".to_string(), "horizon".to_string()];
    header.extend(bands.levels.iter().map(|l| level_label(*l)));
    let mut csv = CsvOut::new(&header)?;
    for (i, v) in variables.iter().enumerate() {
        for (j, s) in slots.iter().enumerate() {
            for h in 0..=bands.horizon {
                let mut row = vec![v.clone(), s.clone(), h.to_string()];
                row.extend((0..bands.levels.len()).map(|l| num(bands.get(l, i, j, h))));
                csv.row(row)?;
            }
        }
    }
    csv.finish(path)
}

#[derive(Serialize)]
struct BandsManifest<'a> {
    horizon: usize,
    levels: &'a [f64],
    draws: usize,
    used_draws: usize,
    excluded_draws: usize,
    variables: &'a [String],
    shocks: &'a [String],
}

fn draws_dir(ctx: &Ctx, configured: &Option<PathBuf>) -> PathBuf {
    configured.clone().unwrap_or_else(|| ctx.out.clone())
}

pub fn irf(ctx: &Ctx) -> CliResult<()> {
    let cfg: IrfConfig = ctx.loaded.config.irf.clone().unwrap_or_default();
    let (m, draws) = read_draws(&draws_dir(ctx, &cfg.draws))?;
    let set = impulse_responses(&draws, cfg.horizon)?;
    let bands = posterior_bands(&set, &cfg.levels)?;
    let cum = posterior_bands(&set.cumulated(), &cfg.levels)?;
    write_bands(&ctx.out("irf.csv"), &bands, &m.variables, &m.shocks)?;
    write_bands(&ctx.out("irf_cumulative.csv"), &cum, &m.variables, &m.shocks)?;
    io::write_json(
        &ctx.out("irf.json"),
        &BandsManifest {
            horizon: cfg.horizon,
            levels: &cfg.levels,
            draws: set.n_draws(),
            used_draws: bands.used_draws,
            excluded_draws: bands.excluded_draws,
            variables: &m.variables,
            shocks: &m.shocks,
        },
    )?;
    if bands.excluded_draws > 0 {
        log::warn!("irf: excluded {} explosive draws", bands.excluded_draws);
    }
    ctx.save_config()
}

pub const RESIDUAL_SLOT: &str = "residual";

pub fn fevd_cmd(ctx: &Ctx) -> CliResult<()> {
    let cfg: FevdConfig = ctx.loaded.config.fevd.clone().unwrap_or_default();
    let (m, draws) = read_draws(&draws_dir(ctx, &cfg.draws))?;
    let set = fevd(&draws, cfg.horizon)?;
    let bands = fevd_bands(&set, &[0.5])?;
    let mut slots = m.shocks.clone();
    slots.push(RESIDUAL_SLOT.to_string());
    write_bands(&ctx.out("fevd.csv"), &bands, &m.variables, &slots)?;
    io::write_json(
        &ctx.out("fevd.json"),
        &BandsManifest {
            horizon: cfg.horizon,
            levels: &[0.5],
            draws: draws.len(),
            used_draws: bands.used_draws,
            excluded_draws: bands.excluded_draws,
            variables: &m.variables,
            shocks: &slots,
        },
    )?;
    ctx.save_config()
}

pub fn pipeline(ctx: &Ctx) -> CliResult<()> {
    let index = match &ctx.loaded.config.index {
        Some(_) => Some(index(ctx)?),
        None => None,
    };
    estimate(ctx, index.as_ref())?;
    irf(ctx)?;
    fevd_cmd(ctx)
}
