//! Batch pipeline: config → ingest → frontier fit → efficiency series →
//! simulation → fractal bounds → certificates, consolidated into one
//! deterministic `report.json` plus plot-ready CSV series.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dynamics::{self, BrownianPath, DoubleBound, Horizon, HorizonBasis, IdCoefficients, IdState};
use crate::fractal::{self, ExAnteModel, FractalBound, IndexingPower};
use crate::frontier::{self, EfficiencyDistribution, FitError, FrontierFit, FrontierSpec, ObsKey, PanelDesign};
use crate::panel::{self, Panel, PanelSeries};
use crate::picard::{self, BoundCertificate, BoundParams, BoundVariant};

/// Bumped on any change to the report's fields.
pub const SCHEMA_VERSION: &str = "1.0.0";

/// Absolute tolerance for a headline claim to count as reproduced.
pub const HEADLINE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Panel { path: PathBuf, source: panel::PanelError },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub data: DataConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default)]
    pub fractal: FractalConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelSource {
    /// Indicator name the panel is registered under.
    pub name: String,
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub panels: Vec<PanelSource>,
    /// Name of the output panel.
    pub output: String,
    /// Names of the regressor panels.
    pub inputs: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub distribution: EfficiencyDistribution,
    pub log_transform: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { distribution: EfficiencyDistribution::HalfNormal, log_transform: true }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub n_partitions: usize,
    pub t0: f64,
    pub t1: f64,
    pub horizon: Horizon,
    pub steps: usize,
    pub i0: f64,
    pub d0: f64,
    /// Constant `B` in the investigation equation.
    pub base: f64,
    /// Component `k` of investigation is `investigation[k] · x`.
    pub investigation: Vec<f64>,
    pub mu: Vec<f64>,
    pub y: Vec<f64>,
    pub double_bound: [f64; 4],
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n_partitions: 1024,
            t0: 0.0,
            t1: 1.0,
            horizon: Horizon::Medium,
            steps: 256,
            i0: 0.1,
            d0: 0.1,
            base: -0.5,
            investigation: vec![0.2],
            mu: vec![0.1],
            y: vec![0.1],
            double_bound: [1.0, 1.0, 1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct CertifyConfig {
    pub variants: Vec<BoundVariant>,
    pub max_m: usize,
    pub tolerance: f64,
    /// `CODE:YEAR` of the observation whose fitted frontier output is used
    /// as PIB_e(α). Defaults to the first pooled observation.
    pub anchor: Option<String>,
    /// Uses this PIB_e(α) instead of the fitted frontier.
    pub pib_e: Option<f64>,
    #[serde(flatten)]
    pub params: BoundParams,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            variants: vec![BoundVariant::FactorialProduct, BoundVariant::ExponentialForm, BoundVariant::GeometricForm],
            max_m: 200,
            tolerance: 1e-6,
            anchor: None,
            pib_e: None,
            params: BoundParams::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FractalConfig {
    pub model: ExAnteModel,
    pub scales: usize,
    pub rs_min_window: usize,
    pub rs_max_window: usize,
    /// Length of the residual-bootstrap extension of the efficiency series.
    pub bootstrap_length: usize,
}

impl Default for FractalConfig {
    fn default() -> Self {
        Self { model: ExAnteModel::Brownian, scales: 8, rs_min_window: 16, rs_max_window: 4096, bootstrap_length: 4096 }
    }
}

impl Config {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ReportError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ReportError::Config { path: path.to_path_buf(), message: e.to_string() })?;
        cfg.validate().map_err(|message| ReportError::Config { path: path.to_path_buf(), message })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = fs::read_to_string(path).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, path)
    }

    fn validate(&self) -> Result<(), String> {
        let names: Vec<&str> = self.data.panels.iter().map(|p| p.name.as_str()).collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(format!("panel {n:?} declared twice"));
            }
        }
        for wanted in std::iter::once(&self.data.output).chain(&self.data.inputs) {
            if !names.contains(&wanted.as_str()) {
                return Err(format!("panel {wanted:?} is not declared under [data] panels"));
            }
        }
        if self.data.inputs.is_empty() {
            return Err("[data] inputs is empty".into());
        }
        let s = &self.simulate;
        if s.n_partitions == 0 || s.steps == 0 || !(s.t1 > s.t0) {
            return Err("[simulate] needs n_partitions > 0, steps > 0 and t1 > t0".into());
        }
        if s.mu.len() != s.y.len() {
            return Err("[simulate] mu and y differ in length".into());
        }
        if self.certify.variants.is_empty() || !(self.certify.tolerance > 0.0) {
            return Err("[certify] needs at least one variant and a positive tolerance".into());
        }
        if self.fractal.scales < 4 || self.fractal.rs_min_window < fractal::MIN_RS_WINDOW || self.fractal.rs_max_window < self.fractal.rs_min_window {
            return Err("[fractal] needs scales ≥ 4 and 8 ≤ rs_min_window ≤ rs_max_window".into());
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- headline

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    /// A named country's value in some year.
    Value,
    /// Cross-sectional max − min.
    Range,
    /// Cross-sectional mean.
    Mean,
    /// A country's deviation from the cross-sectional mean.
    Deviation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Claim {
    pub id: &'static str,
    pub indicator: &'static str,
    pub kind: ClaimKind,
    pub code: Option<&'static str>,
    pub claimed: f64,
}

/// Headline statistics quoted alongside the source tables.
pub const HEADLINE_CLAIMS: &[Claim] = &[
    Claim { id: "rd_index_max_nzl", indicator: "rd_index", kind: ClaimKind::Value, code: Some("NZL"), claimed: 46.0 },
    Claim { id: "rd_index_mid_pol", indicator: "rd_index", kind: ClaimKind::Value, code: Some("POL"), claimed: 41.2 },
    Claim { id: "rd_index_min_nld", indicator: "rd_index", kind: ClaimKind::Value, code: Some("NLD"), claimed: 4.2 },
    Claim { id: "rd_index_range", indicator: "rd_index", kind: ClaimKind::Range, code: None, claimed: 10.2 },
    Claim { id: "pib_mean", indicator: "pib_per_employment", kind: ClaimKind::Mean, code: None, claimed: 4.4 },
    Claim { id: "pib_dev_arg", indicator: "pib_per_employment", kind: ClaimKind::Deviation, code: Some("ARG"), claimed: 0.4 },
    Claim { id: "pib_dev_mex", indicator: "pib_per_employment", kind: ClaimKind::Deviation, code: Some("MEX"), claimed: -1.1 },
    Claim { id: "technology_ecs", indicator: "technology", kind: ClaimKind::Value, code: Some("ECS"), claimed: 35.4 },
    Claim { id: "technology_usa", indicator: "technology", kind: ClaimKind::Value, code: Some("USA"), claimed: 33.54 },
    Claim { id: "technology_kor", indicator: "technology", kind: ClaimKind::Value, code: Some("KOR"), claimed: 33.72 },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadlineStatus {
    Pass,
    Fail,
    Unverifiable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeadlineCheck {
    pub claim: Claim,
    /// Closest computed value over the panel's years.
    pub computed: Option<f64>,
    pub year: Option<i32>,
    pub status: HeadlineStatus,
    pub reason: String,
}

/// Recomputes every claim whose data is loaded. A claim passes when any
/// year reproduces it within [`HEADLINE_TOLERANCE`]; otherwise the closest
/// year is reported next to the claimed value.
pub fn headline_check(panels: &[&Panel]) -> Vec<HeadlineCheck> {
    HEADLINE_CLAIMS.iter().map(|c| check_claim(c, panels)).collect()
}

pub fn check_claim(claim: &Claim, panels: &[&Panel]) -> HeadlineCheck {
    let unverifiable = |reason: String| HeadlineCheck { claim: *claim, computed: None, year: None, status: HeadlineStatus::Unverifiable, reason };
    let Some(panel) = panels.iter().find(|p| p.indicator_name() == claim.indicator) else {
        return unverifiable(format!("no {} panel loaded", claim.indicator));
    };
    if let Some(code) = claim.code {
        if panel.get(code).is_none() {
            return unverifiable(format!("{code} absent from the {} panel", claim.indicator));
        }
    }
    let mut candidates: Vec<(i32, f64)> = Vec::new();
    for &year in panel.years() {
        let value = match (claim.kind, claim.code) {
            (ClaimKind::Value, Some(code)) => panel.get(code).and_then(|s| s.cell(year)).and_then(|c| c.get()),
            (ClaimKind::Range, _) => panel.range_spread(year).ok(),
            (ClaimKind::Mean, _) => panel.cross_section_mean(year).ok(),
            (ClaimKind::Deviation, Some(code)) => panel
                .growth_deviation(year)
                .ok()
                .and_then(|d| d.into_iter().find(|cv| cv.code == code).map(|cv| cv.value)),
            _ => None,
        };
        if let Some(v) = value {
            candidates.push((year, v));
        }
    }
    let Some(&(year, computed)) = candidates
        .iter()
        .min_by(|a, b| (a.1 - claim.claimed).abs().total_cmp(&(b.1 - claim.claimed).abs()))
    else {
        return unverifiable(format!("no present cells for {}", claim.id));
    };
    let pass = (computed - claim.claimed).abs() <= HEADLINE_TOLERANCE;
    HeadlineCheck {
        claim: *claim,
        computed: Some(computed),
        year: Some(year),
        status: if pass { HeadlineStatus::Pass } else { HeadlineStatus::Fail },
        reason: if pass {
            format!("reproduced in {year}")
        } else {
            format!("claimed {} but closest computed value is {computed} ({year})", claim.claimed)
        },
    }
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Flagged,
    Error,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Ok => 0,
            Self::Error => 1,
            Self::Flagged => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub name: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencySeries {
    pub code: String,
    pub country_name: String,
    pub years: Vec<i32>,
    pub efficiency: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub distribution: EfficiencyDistribution,
    pub log_transform: bool,
    pub inputs: Vec<String>,
    pub observations: usize,
    pub converged: bool,
    pub boundary: bool,
    pub beta: Vec<f64>,
    pub sigma_v: f64,
    pub sigma_u: f64,
    pub loglik: f64,
    pub mean_efficiency: f64,
    pub evals: usize,
    pub series: Vec<EfficiencySeries>,
}

impl FitSummary {
    pub fn new(fit: &FrontierFit, keys: &[ObsKey], inputs: &[String], converged: bool) -> Result<Self, FitError> {
        let series = frontier::efficiency_scores(fit, keys)?.iter().map(efficiency_series).collect();
        let n = fit.efficiency.len().max(1) as f64;
        Ok(Self {
            distribution: fit.distribution,
            log_transform: fit.log_transform,
            inputs: inputs.to_vec(),
            observations: fit.len(),
            converged,
            boundary: fit.boundary,
            beta: fit.beta.clone(),
            sigma_v: fit.sigma_v,
            sigma_u: fit.sigma_u,
            loglik: fit.loglik,
            mean_efficiency: fit.efficiency.iter().sum::<f64>() / n,
            evals: fit.evals,
            series,
        })
    }
}

fn efficiency_series(s: &PanelSeries) -> EfficiencySeries {
    EfficiencySeries {
        code: s.code().to_string(),
        country_name: s.country_name().to_string(),
        years: s.years().to_vec(),
        efficiency: s.cells().iter().filter_map(|c| c.get()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisValue {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub n_partitions: usize,
    pub t0: f64,
    pub t1: f64,
    pub path_end: f64,
    pub horizon: Horizon,
    /// Basis evaluated at (driver, i, d) at the end of the run.
    pub basis: Vec<BasisValue>,
    pub double_bound: Option<f64>,
    pub final_state: IdState,
    pub blew_up: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedBound {
    pub target: String,
    pub bound: FractalBound,
    /// Against the Ex Ante bound; absent on the Ex Ante bound itself.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indexing: Option<IndexingPower>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateEntry {
    pub pib_e_alpha: f64,
    pub certificate: BoundCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: String,
    pub seed: u64,
    pub inputs_digest: String,
    pub inputs: Vec<InputDigest>,
    pub fit: Option<FitSummary>,
    pub simulation: Option<SimulationSummary>,
    pub bounds: Vec<NamedBound>,
    pub certificates: Vec<CertificateEntry>,
    pub headline: Vec<HeadlineCheck>,
    pub flags: usize,
    pub status: RunStatus,
    pub errors: Vec<String>,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

// ---------------------------------------------------------------- plots

/// A plot-ready CSV with columns `series,x,y`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotTable {
    pub rows: Vec<(String, f64, f64)>,
}

impl PlotTable {
    pub fn push(&mut self, series: &str, x: f64, y: f64) {
        self.rows.push((series.to_string(), x, y));
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("series,x,y\n");
        for (s, x, y) in &self.rows {
            let _ = writeln!(out, "{s},{x},{y}");
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOutput {
    pub report: RunReport,
    /// File name → table.
    pub plots: Vec<(&'static str, PlotTable)>,
}

impl Default for RunReport {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            seed: 0,
            inputs_digest: String::new(),
            inputs: Vec::new(),
            fit: None,
            simulation: None,
            bounds: Vec::new(),
            certificates: Vec::new(),
            headline: Vec::new(),
            flags: 0,
            status: RunStatus::Ok,
            errors: Vec::new(),
            notes: Vec::new(),
        }
    }
}

// ---------------------------------------------------------------- pipeline

/// Loads `config_path`, runs every stage and writes `report.json` plus the
/// `plot_*.csv` files into `out_dir`. `seed` overrides the config's seed.
///
/// Unreadable or unparsable inputs are returned as errors before anything
/// is written. A failed fit still produces a report with status `error`.
pub fn run_pipeline(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<RunReport, ReportError> {
    let cfg = Config::load(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let mut inputs = Vec::new();
    for src in &cfg.data.panels {
        let path = base.join(&src.path);
        let bytes = fs::read(&path).map_err(|source| ReportError::Io { path: path.clone(), source })?;
        inputs.push((src, bytes));
    }
    let output = execute(&cfg, &inputs, seed.unwrap_or(cfg.seed))?;
    write_outputs(&output, out_dir)?;
    Ok(output.report)
}

/// Runs the pipeline on already loaded panel files, in `cfg.data.panels`
/// order. Pure: no filesystem access.
pub fn execute(cfg: &Config, files: &[(&PanelSource, Vec<u8>)], seed: u64) -> Result<PipelineOutput, ReportError> {
    let mut report = RunReport { seed, ..RunReport::default() };
    let mut plots: Vec<(&'static str, PlotTable)> = Vec::new();

    let mut all = Sha256::new();
    let mut panels = Vec::new();
    for (src, bytes) in files {
        let digest = hex::encode(Sha256::digest(bytes));
        all.update(src.name.as_bytes());
        all.update([0u8]);
        all.update(bytes);
        report.inputs.push(InputDigest { name: src.name.clone(), path: src.path.display().to_string(), sha256: digest });
        let text = String::from_utf8_lossy(bytes);
        let panel = panel::parse_panel(&text, &src.name).map_err(|source| ReportError::Panel { path: src.path.clone(), source })?;
        panels.push(panel);
    }
    report.inputs_digest = hex::encode(all.finalize());
    let find = |name: &str| panels.iter().find(|p| p.indicator_name() == name).expect("validated config");

    // fit
    let output = find(&cfg.data.output);
    let regressors: Vec<&Panel> = cfg.data.inputs.iter().map(|n| find(n)).collect();
    let design = PanelDesign::from_panels(output, &regressors, cfg.fit.log_transform);
    let spec = FrontierSpec::new(design.inputs.clone())
        .with_log_transform(cfg.fit.log_transform)
        .with_distribution(cfg.fit.distribution);
    let fit = match frontier::fit_mle(&spec, &design.x, &design.y) {
        Ok(fit) => Some((fit, true)),
        Err(FitError::NotConverged { evals, best }) => {
            report.errors.push(format!("frontier fit did not converge after {evals} evaluations"));
            Some((*best, false))
        }
        Err(e) => {
            report.errors.push(format!("frontier fit failed: {e}"));
            None
        }
    };
    if let Some((fit, converged)) = &fit {
        match FitSummary::new(fit, &design.keys, &design.inputs, *converged) {
            Ok(summary) => {
                let mut table = PlotTable::default();
                for s in &summary.series {
                    for (y, e) in s.years.iter().zip(&s.efficiency) {
                        table.push(&s.code, f64::from(*y), *e);
                    }
                }
                plots.push(("plot_efficiency.csv", table));
                report.fit = Some(summary);
            }
            Err(e) => report.errors.push(format!("efficiency series: {e}")),
        }
    }

    // simulation
    let path = match dynamics::simulate_brownian(cfg.simulate.n_partitions, cfg.simulate.t0, cfg.simulate.t1, seed) {
        Ok(p) => Some(p),
        Err(e) => {
            report.errors.push(format!("simulation: {e}"));
            None
        }
    };
    let mut id_sum = None;
    if let Some(p) = &path {
        match simulate(&cfg.simulate, p) {
            Ok((summary, trajectory)) => {
                let mut table = PlotTable::default();
                for (t, v) in p.times.iter().zip(&p.values) {
                    table.push("path", *t, *v);
                }
                for s in &trajectory {
                    table.push("i", s.t, s.i);
                    table.push("d", s.t, s.d);
                }
                plots.push(("plot_simulation.csv", table));
                let sum = summary.final_state.i + summary.final_state.d;
                id_sum = (sum.is_finite() && sum > 0.0 && !summary.blew_up).then_some(sum);
                report.simulation = Some(summary);
            }
            Err(e) => report.errors.push(format!("simulation: {e}")),
        }
    }

    // fractal bounds
    let ante = fractal::ex_ante_bound(cfg.fractal.model);
    report.bounds.push(NamedBound { target: "ex_ante".into(), bound: ante.clone(), indexing: None });
    let push_post = |report: &mut RunReport, target: &str, result: Result<FractalBound, fractal::FractalError>| match result {
        Ok(b) => {
            let indexing = Some(fractal::indexing_power(&ante, &b));
            report.bounds.push(NamedBound { target: target.into(), bound: b, indexing });
        }
        Err(e) => report.notes.push(format!("{target}: {e}")),
    };
    if let Some(p) = &path {
        let scales = cfg.fractal.scales.min(fractal::max_box_scales(p.values.len()));
        push_post(&mut report, "path_box_counting", fractal::box_counting_dimension(&p.values, scales));
        let inc = p.increments();
        let max_w = cfg.fractal.rs_max_window.min(inc.len() / 2);
        push_post(&mut report, "path_rescaled_range", fractal::hurst_rescaled_range_corrected(&inc, cfg.fractal.rs_min_window, max_w));
    }
    if let Some(fit) = &report.fit {
        let pooled: Vec<f64> = fit.series.iter().flat_map(|s| s.efficiency.iter().copied()).collect();
        let scales = cfg.fractal.scales.min(fractal::max_box_scales(pooled.len()));
        push_post(&mut report, "efficiency_box_counting", fractal::box_counting_dimension(&pooled, scales));
    }
    if let Some((fit, _)) = &fit {
        let extended = frontier::bootstrap_efficiency_path(fit, cfg.fractal.bootstrap_length, dynamics::replication_seed(seed, 1));
        let scales = cfg.fractal.scales.min(fractal::max_box_scales(extended.len()));
        let before = report.bounds.len();
        push_post(&mut report, "efficiency_bootstrap_box_counting", fractal::box_counting_dimension(&extended, scales));
        if report.bounds.len() > before {
            report.notes.push(format!(
                "efficiency_bootstrap_box_counting: {} observed scores extended to {} by frontier residual bootstrap",
                fit.len(),
                extended.len()
            ));
        }
    }
    let mut table = PlotTable::default();
    for b in &report.bounds {
        if let Some(r) = &b.bound.regression {
            let abscissa = |s: f64| if b.bound.method == fractal::Method::BoxCounting { -s.ln() } else { s.ln() };
            for (s, m) in r.scales.iter().zip(&r.measures) {
                table.push(&b.target, abscissa(*s), m.ln());
            }
        }
    }
    plots.push(("plot_fractal.csv", table));

    // certificates
    let mut params = cfg.certify.params;
    if let Some(sum) = id_sum {
        params.id_sum = sum;
    }
    let pib_e = match (cfg.certify.pib_e, &fit) {
        (Some(v), _) => Some(v),
        (None, Some((fit, _))) => anchor_output(cfg.certify.anchor.as_deref(), fit, &design.keys).map_err(|e| report.errors.push(e)).ok(),
        (None, None) => None,
    };
    if let Some(pib_e) = pib_e {
        params.pib_e_alpha = pib_e;
        let mut table = PlotTable::default();
        for &variant in &cfg.certify.variants {
            match picard::bound_sequence(&params, variant, cfg.certify.max_m, cfg.certify.tolerance) {
                Ok(cert) => {
                    let name = serde_json::to_value(variant).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
                    for (m, lb) in cert.log_bounds.iter().enumerate() {
                        table.push(&name, m as f64, *lb);
                    }
                    report.certificates.push(CertificateEntry { pib_e_alpha: pib_e, certificate: cert });
                }
                Err(e) => report.errors.push(format!("certificate: {e}")),
            }
        }
        plots.push(("plot_certificates.csv", table));
    }

    // headline
    report.headline = headline_check(&panels.iter().collect::<Vec<_>>());
    report.flags = report.headline.iter().filter(|h| h.status == HeadlineStatus::Fail).count();
    report.status = if !report.errors.is_empty() {
        RunStatus::Error
    } else if report.flags > 0 {
        RunStatus::Flagged
    } else {
        RunStatus::Ok
    };
    Ok(PipelineOutput { report, plots })
}

fn anchor_output(anchor: Option<&str>, fit: &FrontierFit, keys: &[ObsKey]) -> Result<f64, String> {
    if fit.is_empty() {
        return Err("no observations to anchor PIB_e".into());
    }
    let Some(anchor) = anchor else {
        return Ok(fit.frontier_output(0));
    };
    let (code, year) = anchor.split_once(':').ok_or_else(|| format!("anchor {anchor:?} is not CODE:YEAR"))?;
    let year: i32 = year.trim().parse().map_err(|_| format!("anchor {anchor:?} has a bad year"))?;
    keys.iter()
        .position(|k| k.code == code.trim() && k.year == year)
        .map(|i| fit.frontier_output(i))
        .ok_or_else(|| format!("anchor {anchor} is not a pooled observation"))
}

fn simulate(cfg: &SimulateConfig, path: &BrownianPath) -> Result<(SimulationSummary, Vec<IdState>), dynamics::DynamicsError> {
    let [xi, eta, zeta, rho] = cfg.double_bound;
    let db = DoubleBound::new(xi, eta, zeta, rho)?;
    let base = cfg.base;
    let investigation = cfg
        .investigation
        .iter()
        .map(|&a| Box::new(move |x: f64, _t: f64| a * x) as Box<dyn Fn(f64, f64) -> f64 + Send + Sync>)
        .collect();
    let coeffs = IdCoefficients::default()
        .with_investigation(investigation)
        .with_base(move |_, _| base)
        .with_development(cfg.mu.clone(), cfg.y.clone());
    let traj = dynamics::integrate_id(IdState { i: cfg.i0, d: cfg.d0, t: cfg.t0 }, &coeffs, path, cfg.steps)?;
    let last = *traj.last();
    let point = [path.at(last.t), last.i, last.d];
    let basis = HorizonBasis::new(cfg.horizon, &db);
    let values = basis.eval(point);
    let summary = SimulationSummary {
        seed: path.seed,
        n_partitions: path.partitions(),
        t0: cfg.t0,
        t1: cfg.t1,
        path_end: path.end(),
        horizon: cfg.horizon,
        basis: basis.terms.iter().zip(values).map(|(t, v)| BasisValue { label: t.label(), value: v }).collect(),
        double_bound: dynamics::eval_double_bound(&db, point).ok(),
        final_state: last,
        blew_up: traj.blew_up,
    };
    Ok((summary, traj.states))
}

pub fn write_outputs(output: &PipelineOutput, out_dir: &Path) -> Result<(), ReportError> {
    let write = |name: &str, text: &str| {
        let path = out_dir.join(name);
        fs::write(&path, text).map_err(|source| ReportError::Write { path, source })
    };
    fs::create_dir_all(out_dir).map_err(|source| ReportError::Write { path: out_dir.to_path_buf(), source })?;
    write("report.json", &output.report.to_json())?;
    for (name, table) in &output.plots {
        write(name, &table.to_csv())?;
    }
    Ok(())
}

// ---------------------------------------------------------------- two-column files

/// Parses a headed two-column CSV such as `theta,value` or `t,value`.
pub fn parse_two_column(text: &str, first: &str) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    if header.len() != 2 || &header[0] != first || &header[1] != "value" {
        return Err(format!("expected header {first},value, found {}", header.iter().collect::<Vec<_>>().join(",")));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let num = |k: usize| -> Result<f64, String> {
            rec.get(k)
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("row {}: column {} is not a finite number", i + 2, k + 1))
        };
        xs.push(num(0)?);
        ys.push(num(1)?);
    }
    Ok((xs, ys))
}

pub fn write_two_column(first: &str, xs: &[f64], ys: &[f64]) -> String {
    let mut out = format!("{first},value\n");
    for (x, y) in xs.iter().zip(ys) {
        let _ = writeln!(out, "{x},{y}");
    }
    out
}
