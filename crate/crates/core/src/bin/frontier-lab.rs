use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use frontier_lab::dynamics::{self, DoubleBound, Horizon, HorizonBasis};
use frontier_lab::fractal::{self, ExAnteModel};
use frontier_lab::frontier::{self, EfficiencyDistribution, FrontierSpec, PanelDesign};
use frontier_lab::lp::{self, CurvePair, MobiusWeight, Weight};
use frontier_lab::panel::{self, Panel};
use frontier_lab::picard::{self, BoundParams, BoundVariant};
use frontier_lab::report::{self, FitSummary};

#[derive(Parser)]
#[command(name = "frontier-lab", version, about = "Stochastic frontier, bound and fractal toolkit for country panels")]
struct Cli {
    /// RNG seed for anything stochastic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory that relative output paths resolve against.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a panel CSV; print a per-year summary.
    Ingest(IngestArgs),
    /// Fit a stochastic (or quantile) frontier over joined panels.
    Fit(FitArgs),
    /// Lp distance between two sampled curves and the polynomial bound.
    Lp(LpArgs),
    /// Seeded Brownian path plus the horizon basis at its end point.
    Simulate(SimulateArgs),
    /// Picard bound sequence and its convergence verdict.
    Certify(CertifyArgs),
    /// Ex Post fractal dimension bound of a series.
    Fractal(FractalArgs),
    /// Run the full pipeline from a config file.
    Report(ReportArgs),
}

#[derive(Args)]
struct IngestArgs {
    file: PathBuf,
    #[arg(long)]
    indicator: String,
    /// Also write the summary JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Output panel CSV.
    #[arg(long)]
    output: PathBuf,
    /// Comma-separated regressor panel CSVs.
    #[arg(long, value_delimiter = ',', required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = "half_normal")]
    dist: EfficiencyDistribution,
    /// Fit in levels instead of logs.
    #[arg(long)]
    levels: bool,
    /// Fit the linear quantile frontier at this quantile instead.
    #[arg(long)]
    quantile: Option<f64>,
    #[arg(long, default_value = "fit.json")]
    report: PathBuf,
}

#[derive(Args)]
struct LpArgs {
    /// Observed curve, `theta,value`.
    #[arg(long)]
    f: PathBuf,
    /// Frontier curve on the same grid.
    #[arg(long)]
    g: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Möbius weight coefficients `a,b,c,d`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    mobius: Option<Vec<f64>>,
    /// Weight by `|dθ/dθ₁|` instead of `|dθ₁/dθ|`.
    #[arg(long)]
    reciprocal: bool,
    /// Degree of the polynomial bound with g as the candidate.
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1024)]
    n_partitions: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    t0: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    t1: f64,
    #[arg(long, default_value = "medium")]
    horizon: Horizon,
    /// Point `x,y,z` for the basis; defaults to (path end, 0, 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    at: Option<Vec<f64>>,
    #[arg(long, default_value = "path.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long, default_value = "geometric")]
    variant: BoundVariant,
    #[arg(long = "K", default_value_t = 1.0)]
    k: f64,
    #[arg(long = "pib-e", default_value_t = 1.0)]
    pib_e: f64,
    #[arg(long, default_value_t = 0.1)]
    h: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    t: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    t0: f64,
    /// |y|
    #[arg(long, default_value_t = 0.5)]
    y: f64,
    #[arg(long, default_value_t = 0.2)]
    lambda: f64,
    #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
    c: f64,
    #[arg(long = "L", default_value_t = 0.0)]
    l: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long = "E", default_value_t = 0.0, allow_hyphen_values = true)]
    e: f64,
    #[arg(long, default_value_t = 1.0)]
    id_sum: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_m: usize,
    #[arg(long, default_value = "cert.json")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FractalMethod {
    Box,
    Rs,
}

#[derive(Args)]
struct FractalArgs {
    /// `t,value` series, e.g. a simulated path.
    #[arg(long)]
    series: PathBuf,
    #[arg(long, value_enum, default_value = "box")]
    method: FractalMethod,
    #[arg(long, default_value_t = 8)]
    scales: usize,
    #[arg(long, default_value_t = 16)]
    min_window: usize,
    #[arg(long, default_value_t = 4096)]
    max_window: usize,
    /// Analyse first differences (use for a path with `rs`).
    #[arg(long)]
    difference: bool,
    #[arg(long, default_value = "brownian")]
    model: ExAnteModel,
    #[arg(long, default_value = "bound.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    config: PathBuf,
}

struct Ctx {
    out_dir: PathBuf,
    seed: u64,
    seed_given: bool,
    verbose: bool,
}

impl Ctx {
    fn out(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out_dir.join(p)
        }
    }

    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("frontier-lab: {}", msg.as_ref());
        }
    }

    fn write(&self, p: &Path, text: &str) -> Result<(), String> {
        let path = self.out(p);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        }
        fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        self.log(format!("wrote {}", path.display()));
        Ok(())
    }
}

fn read(p: &Path) -> Result<String, String> {
    fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn load_panel(p: &Path, name: &str) -> Result<Panel, String> {
    panel::parse_panel(&read(p)?, name).map_err(|e| format!("{}: {e}", p.display()))
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into())
}

#[derive(Serialize)]
struct YearSummary {
    year: i32,
    present: usize,
    extrema: Option<panel::Extrema>,
    mean: Option<f64>,
}

fn ingest(ctx: &Ctx, a: &IngestArgs) -> Result<i32, String> {
    let p = load_panel(&a.file, &a.indicator)?;
    let years: Vec<YearSummary> = p
        .years()
        .iter()
        .map(|&y| YearSummary {
            year: y,
            present: p.series().iter().filter(|s| s.cell(y).is_some_and(|c| c.is_present())).count(),
            extrema: p.extrema(y).ok(),
            mean: p.cross_section_mean(y).ok(),
        })
        .collect();
    let text = json(&serde_json::json!({
        "indicator": p.indicator_name(),
        "series": p.series().len(),
        "present_cells": p.present_count(),
        "years": years,
    }));
    print!("{text}");
    if let Some(out) = &a.out {
        ctx.write(out, &text)?;
    }
    Ok(0)
}

fn fit(ctx: &Ctx, a: &FitArgs) -> Result<i32, String> {
    if let Some(q) = a.quantile {
        if !(q > 0.0 && q < 1.0) {
            return Err(format!("--quantile must lie in (0, 1), got {q}"));
        }
    }
    let output = load_panel(&a.output, &stem(&a.output))?;
    let inputs = a.inputs.iter().map(|p| load_panel(p, &stem(p))).collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&Panel> = inputs.iter().collect();
    let design = PanelDesign::from_panels(&output, &refs, !a.levels);
    ctx.log(format!("{} pooled observations", design.len()));
    let spec = FrontierSpec::new(design.inputs.clone()).with_log_transform(!a.levels).with_distribution(a.dist);
    if let Some(q) = a.quantile {
        let qf = frontier::fit_quantile(&spec, &design.x, &design.y, q).map_err(|e| e.to_string())?;
        ctx.write(&a.report, &json(&qf))?;
        return Ok(0);
    }
    let (fit, converged) = match frontier::fit_mle(&spec, &design.x, &design.y) {
        Ok(f) => (f, true),
        Err(frontier::FitError::NotConverged { best, .. }) => (*best, false),
        Err(e) => return Err(e.to_string()),
    };
    let summary = FitSummary::new(&fit, &design.keys, &design.inputs, converged).map_err(|e| e.to_string())?;
    ctx.write(&a.report, &json(&summary))?;
    Ok(if converged { 0 } else { 1 })
}

fn lp_cmd(ctx: &Ctx, a: &LpArgs) -> Result<i32, String> {
    if a.mobius.as_ref().is_some_and(|m| m.len() != 4) {
        return Err("--mobius takes four values a,b,c,d".into());
    }
    let (tf, f) = report::parse_two_column(&read(&a.f)?, "theta").map_err(|e| format!("{}: {e}", a.f.display()))?;
    let (tg, g) = report::parse_two_column(&read(&a.g)?, "theta").map_err(|e| format!("{}: {e}", a.g.display()))?;
    if tf != tg {
        return Err("f and g must share the same theta grid".into());
    }
    let (lo, hi) = match (tf.first(), tf.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Err("empty curve".into()),
    };
    let pair = CurvePair::new(lo, hi, f, g, a.p).map_err(|e| e.to_string())?;
    let step = pair.grid.step();
    if tf.iter().enumerate().any(|(k, t)| (t - pair.grid.theta(k)).abs() > 1e-9 * (1.0 + step)) {
        return Err("theta grid is not uniform".into());
    }
    let weight = match &a.mobius {
        Some(m) => {
            let w = MobiusWeight::new(m[0], m[1], m[2], m[3]).map_err(|e| e.to_string())?;
            Weight::Mobius(if a.reciprocal { w.reciprocal() } else { w })
        }
        None => Weight::Identity,
    };
    let distance = lp::lp_distance(&pair, &weight).map_err(|e| e.to_string())?;
    let bound = match a.degree {
        Some(n) => Some(lp::best_poly_bound(&pair.grid, &pair.f, n, a.p, &pair.g).map_err(|e| e.to_string())?),
        None => None,
    };
    let text = json(&serde_json::json!({ "p": a.p, "distance": distance, "bound": bound }));
    print!("{text}");
    if let Some(out) = &a.out {
        ctx.write(out, &text)?;
    }
    Ok(0)
}

fn simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<i32, String> {
    if a.at.as_ref().is_some_and(|v| v.len() != 3) {
        return Err("--at takes three values x,y,z".into());
    }
    let path = dynamics::simulate_brownian(a.n_partitions, a.t0, a.t1, ctx.seed).map_err(|e| e.to_string())?;
    let basis = HorizonBasis::new(a.horizon, &DoubleBound::default());
    let point = a.at.as_ref().map_or([path.end(), 0.0, 0.0], |v| [v[0], v[1], v[2]]);
    let values: Vec<_> = basis.terms.iter().map(|t| serde_json::json!({ "label": t.label(), "value": t.eval(point) })).collect();
    ctx.write(&a.out, &report::write_two_column("t", &path.times, &path.values))?;
    print!("{}", json(&serde_json::json!({ "seed": path.seed, "n_partitions": path.partitions(), "end": path.end(), "basis_at": point, "basis": values })));
    Ok(0)
}

fn certify(ctx: &Ctx, a: &CertifyArgs) -> Result<i32, String> {
    let params = BoundParams {
        k: a.k,
        pib_e_alpha: a.pib_e,
        h: a.h,
        t: a.t,
        t0: a.t0,
        y_norm: a.y,
        lambda: a.lambda,
        c: a.c,
        l: a.l,
        rho: a.rho,
        e: a.e,
        id_sum: a.id_sum,
        ..BoundParams::default()
    };
    let cert = picard::bound_sequence(&params, a.variant, a.max_m, a.tol).map_err(|e| e.to_string())?;
    ctx.write(&a.out, &json(&cert))?;
    println!("{}", serde_json::to_string(&cert.verdict).expect("serializable"));
    Ok(0)
}

fn fractal_cmd(ctx: &Ctx, a: &FractalArgs) -> Result<i32, String> {
    let (_, mut values) = report::parse_two_column(&read(&a.series)?, "t").map_err(|e| format!("{}: {e}", a.series.display()))?;
    if a.difference {
        values = values.windows(2).map(|w| w[1] - w[0]).collect();
    }
    let bound = match a.method {
        FractalMethod::Box => fractal::box_counting_dimension(&values, a.scales),
        FractalMethod::Rs => fractal::hurst_rescaled_range_corrected(&values, a.min_window, a.max_window),
    }
    .map_err(|e| e.to_string())?;
    let indexing = fractal::indexing_power(&fractal::ex_ante_bound(a.model), &bound);
    ctx.write(&a.out, &json(&serde_json::json!({ "bound": bound, "indexing": indexing })))?;
    Ok(0)
}

fn report_cmd(ctx: &Ctx, a: &ReportArgs) -> Result<i32, String> {
    let r = report::run_pipeline(&a.config, &ctx.out_dir, ctx.seed_override()).map_err(|e| e.to_string())?;
    for h in &r.headline {
        ctx.log(format!("{:?} {}: {}", h.status, h.claim.id, h.reason));
    }
    for e in &r.errors {
        eprintln!("frontier-lab: {e}");
    }
    println!("{}", serde_json::to_string(&r.status).expect("serializable"));
    Ok(r.exit_code())
}

impl Ctx {
    fn seed_override(&self) -> Option<u64> {
        Some(self.seed).filter(|_| self.seed_given)
    }
}

fn main() -> ExitCode {
    // exit code 2 is reserved for flagged reports, so usage errors map to 1
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let ctx = Ctx { out_dir: cli.out_dir, seed: cli.seed.unwrap_or(0), seed_given: cli.seed.is_some(), verbose: cli.verbose };
    let result = match &cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Fit(a) => fit(&ctx, a),
        Command::Lp(a) => lp_cmd(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Certify(a) => certify(&ctx, a),
        Command::Fractal(a) => fractal_cmd(&ctx, a),
        Command::Report(a) => report_cmd(&ctx, a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("frontier-lab: {e}");
            ExitCode::from(1)
        }
    }
}
