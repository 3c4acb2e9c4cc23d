use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use noon_core::analysis::{compare_fit, fit_fringe, fit_gaussian_profile, Envelope, FitData, FringeFit, GaussianFit};
use noon_core::config::ExperimentConfig;
use noon_core::record::ScanRecord;
use noon_core::scenario::{resample, Experiment};
use noon_core::spatial::classical_visibility_bound;
use noon_core::Error;

#[derive(Parser)]
#[command(name = "noonsim", version, about = "Heralded N00N-state interference simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML); the shipped default when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `[scan] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check the shipped conventions against the closed-form states.
    Validate,
    /// Phase scan: single-photon, three-fold and four-fold records.
    ScanTemporal,
    /// Fiber-position scan of the single-photon and N00N fringes.
    ScanSpatial,
    /// Fiber-position scan with one arm blocked.
    Profile,
    /// Redraw the counts of a record from its expected rates.
    Sample {
        #[arg(long)]
        input: PathBuf,
    },
    /// Fit a record and report the parameters as JSON.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "gaussian")]
        model: Model,
        /// Photon number for the classical-bound comparison.
        #[arg(long)]
        n: Option<u32>,
    },
    /// Classical visibility limit for N-photon detection.
    Bound {
        #[arg(long)]
        n: u32,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    /// Fringe with a flat envelope.
    Flat,
    /// Fringe under a Gaussian envelope.
    Gaussian,
    /// Gaussian profile without fringe.
    Profile,
}

enum Failure {
    Config(String),
    Validation,
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

struct Context {
    config: ExperimentConfig,
    out: PathBuf,
    seed_override: Option<u64>,
    quiet: bool,
}

impl Context {
    fn new(common: &Common) -> Result<Self, Failure> {
        let mut config = match &common.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default_config(),
        };
        if let Some(s) = common.seed {
            config = config.with_seed(s);
        }
        let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir));
        Ok(Context { config, out, seed_override: common.seed, quiet: common.quiet })
    }

    fn say(&self, line: &str) {
        if !self.quiet {
            println!("{line}");
        }
    }

    fn out_dir(&self) -> Result<&Path, Failure> {
        std::fs::create_dir_all(&self.out)?;
        Ok(&self.out)
    }

    fn save(&self, record: &ScanRecord) -> Result<PathBuf, Failure> {
        let path = self.out_dir()?.join(format!("{}.csv", record.name));
        record.save(&path)?;
        Ok(path)
    }

    fn save_json(&self, name: &str, value: &Value) -> Result<PathBuf, Failure> {
        let path = self.out_dir()?.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

fn fringe_json(fit: &Result<FringeFit, Error>, photons: Option<u32>) -> Value {
    match fit {
        Ok(f) => {
            let bound = photons.map(|n| match compare_fit(f, n) {
                Ok(c) => json!(c),
                Err(e) => json!({ "error": e.to_string() }),
            });
            json!({ "fit": f, "uncertainty": "covariance 1 sigma", "bound": bound })
        }
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn profile_json(fit: &Result<GaussianFit, Error>) -> Value {
    match fit {
        Ok(f) => json!({ "fit": f, "two_w0": 2.0 * f.w0, "two_w0_err": 2.0 * f.w0_err }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn total_counts(r: &ScanRecord) -> u64 {
    r.rows.iter().map(|row| row.sampled_counts).sum()
}

fn fringe_line(record: &ScanRecord, path: &Path, fit: &Result<FringeFit, Error>) -> String {
    let head = format!("{}: {} points, {} counts -> {}", record.name, record.rows.len(), total_counts(record), path.display());
    match fit {
        Ok(f) => format!(
            "{head}; V = {:.3} ± {:.3}, period = {:.4} ± {:.4} {}{}",
            f.visibility,
            f.visibility_err,
            f.period,
            f.period_err,
            record.unit,
            if f.degenerate { " (flagged)" } else { "" }
        ),
        Err(e) => format!("{head}; fit failed: {e}"),
    }
}

fn sampled_fringe(record: &ScanRecord, envelope: Envelope) -> Result<FringeFit, Error> {
    fit_fringe(&FitData::sampled(record)?, envelope)
}

fn run_validate(ctx: &Context) -> Result<(), Failure> {
    let exp = Experiment::new(&ctx.config)?;
    let report = exp.run_validation()?;
    let path = ctx.save_json("validation.json", &json!(report))?;
    for c in &report.checks {
        ctx.say(&format!(
            "{:<24} {}  max residual {:.3e}  (tolerance {:.0e})",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.max_residual,
            c.tolerance
        ));
    }
    ctx.say(&format!("validation {} -> {}", if report.passed { "passed" } else { "FAILED" }, path.display()));
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}

fn run_temporal(ctx: &Context) -> Result<(), Failure> {
    let exp = Experiment::new(&ctx.config)?;
    let scan = exp.run_temporal_scan()?;
    let mut summary = serde_json::Map::new();
    for (record, photons) in [
        (&scan.reference, Some(1)),
        (&scan.threefold, None),
        (&scan.fourfold_raw, Some(3)),
        (&scan.fourfold_subtracted, Some(3)),
    ] {
        let path = ctx.save(record)?;
        let fit = sampled_fringe(record, Envelope::Flat);
        ctx.say(&fringe_line(record, &path, &fit));
        summary.insert(record.name.clone(), fringe_json(&fit, photons));
    }
    summary.insert("seed".into(), json!(ctx.config.scan.seed));
    let path = ctx.save_json("temporal_summary.json", &Value::Object(summary))?;
    ctx.say(&format!("summary -> {}", path.display()));
    Ok(())
}

fn run_spatial(ctx: &Context) -> Result<(), Failure> {
    let exp = Experiment::new(&ctx.config)?;
    let scan = exp.run_spatial_scan()?;
    let mut summary = serde_json::Map::new();
    let mut periods = Vec::new();
    for (record, photons) in [(&scan.n1, 1), (&scan.n3, 3)] {
        let path = ctx.save(record)?;
        let fit = sampled_fringe(record, Envelope::Gaussian);
        ctx.say(&fringe_line(record, &path, &fit));
        if let Ok(f) = &fit {
            periods.push((f.period, f.period_err));
        }
        summary.insert(record.name.clone(), fringe_json(&fit, Some(photons)));
    }
    if let [(p1, e1), (p3, e3)] = periods[..] {
        let ratio = p1 / p3;
        let err = ratio * ((e1 / p1).powi(2) + (e3 / p3).powi(2)).sqrt();
        summary.insert("period_ratio".into(), json!({ "value": ratio, "uncertainty": err }));
    }
    let table = ctx.out_dir()?.join("spatial_table.csv");
    scan.table.save(&table)?;
    ctx.say(&format!("spatial_table: {} positions -> {}", scan.table.x_um.len(), table.display()));
    summary.insert("seed".into(), json!(ctx.config.scan.seed));
    let path = ctx.save_json("spatial_summary.json", &Value::Object(summary))?;
    ctx.say(&format!("summary -> {}", path.display()));
    Ok(())
}

fn run_profile(ctx: &Context) -> Result<(), Failure> {
    let exp = Experiment::new(&ctx.config)?;
    let scan = exp.run_profile_scan()?;
    let mut summary = serde_json::Map::new();
    let mut widths = Vec::new();
    for record in [&scan.n1, &scan.n3] {
        let path = ctx.save(record)?;
        let fit = FitData::sampled(record).and_then(|d| fit_gaussian_profile(&d));
        let head = format!("{}: {} points, {} counts -> {}", record.name, record.rows.len(), total_counts(record), path.display());
        match &fit {
            Ok(f) => {
                ctx.say(&format!("{head}; 2w0 = {:.3} ± {:.3} {}", 2.0 * f.w0, 2.0 * f.w0_err, record.unit));
                widths.push((f.w0, f.w0_err));
            }
            Err(e) => ctx.say(&format!("{head}; fit failed: {e}")),
        }
        summary.insert(record.name.clone(), profile_json(&fit));
    }
    if let [(w1, e1), (w3, e3)] = widths[..] {
        let ratio = w3 / w1;
        let err = ratio * ((e1 / w1).powi(2) + (e3 / w3).powi(2)).sqrt();
        summary.insert("width_ratio_n3_n1".into(), json!({ "value": ratio, "uncertainty": err }));
    }
    summary.insert("seed".into(), json!(ctx.config.scan.seed));
    let path = ctx.save_json("profile_summary.json", &Value::Object(summary))?;
    ctx.say(&format!("summary -> {}", path.display()));
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "record".into())
}

fn run_sample(ctx: &Context, input: &Path) -> Result<(), Failure> {
    let record = ScanRecord::load(input)?;
    let seed = ctx.seed_override.unwrap_or(ctx.config.scan.seed);
    let fresh = resample(&record, seed)?;
    let path = ctx.out_dir()?.join(format!("{}_seed{seed}.csv", stem(input)));
    fresh.save(&path)?;
    ctx.say(&format!("{}: {} points, {} counts -> {}", fresh.name, fresh.rows.len(), total_counts(&fresh), path.display()));
    Ok(())
}

fn run_fit(ctx: &Context, input: &Path, model: Model, photons: Option<u32>) -> Result<(), Failure> {
    let record = ScanRecord::load(input)?;
    let data = FitData::sampled(&record)?;
    let report = match model {
        Model::Flat => fringe_json(&fit_fringe(&data, Envelope::Flat), photons),
        Model::Gaussian => fringe_json(&fit_fringe(&data, Envelope::Gaussian), photons),
        Model::Profile => profile_json(&fit_gaussian_profile(&data)),
    };
    let failed = report.get("error").is_some();
    let report = json!({ "input": input.display().to_string(), "record": record.name, "unit": record.unit, "result": report });
    let path = ctx.save_json(&format!("{}_fit.json", stem(input)), &report)?;
    if !ctx.quiet {
        println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.to_string()))?);
    }
    ctx.say(&format!("fit report -> {}", path.display()));
    if failed {
        Err(Failure::Runtime("fit failed".into()))
    } else {
        Ok(())
    }
}

/// Shortest decimal with at most 12 decimal places.
fn short(x: f64) -> String {
    let s = format!("{:.12}", x);
    let s = s.trim_end_matches('0');
    s.trim_end_matches('.').to_string()
}

fn run() -> Result<(), Failure> {
    let cli = Cli::parse();
    if let Command::Bound { n } = cli.command {
        println!("{}", short(classical_visibility_bound(n)?));
        return Ok(());
    }
    let ctx = Context::new(&cli.common)?;
    match &cli.command {
        Command::Validate => run_validate(&ctx),
        Command::ScanTemporal => run_temporal(&ctx),
        Command::ScanSpatial => run_spatial(&ctx),
        Command::Profile => run_profile(&ctx),
        Command::Sample { input } => run_sample(&ctx, input),
        Command::Fit { input, model, n } => run_fit(&ctx, input, *model, *n),
        Command::Bound { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Validation) => ExitCode::from(1),
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
