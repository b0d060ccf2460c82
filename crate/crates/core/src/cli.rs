//! Command-line front end of the `contactnet` binary.
//!
//! Every subcommand writes its outputs atomically under `--out` together with
//! a `manifest.toml` that records the resolved configuration and arguments;
//! `contactnet replay <manifest> --out <dir>` regenerates them.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::abc::{self, AdjustOptions, PosteriorSample, ReferenceTable, StudyConfig, TableMeta};
use crate::analytic;
use crate::config::RunConfig;
use crate::io::{write_atomic, Manifest};
use crate::params::Param;
use crate::priors::{self, PriorConfig};
use crate::sim::{self, SimSettings};
use crate::stats;
use crate::survey::{self, fmt_f64, DurationOrigin, SummarySet, SummaryVector};
use crate::{Error, ModelParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_LAYOUT: i32 = 4;
pub const EXIT_EMPTY_POSTERIOR: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "contactnet", version, about = "Contact network simulation and ABC inference")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Run configuration (TOML key-value file).
    #[arg(long, global = true, env = "CONTACTNET_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, env = "CONTACTNET_SEED")]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "CONTACTNET_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "CONTACTNET_OUT")]
    out: Option<PathBuf>,
    /// Prior configuration file (`name = [a, b]` lines).
    #[arg(long, global = true, env = "CONTACTNET_PRIORS")]
    priors: Option<PathBuf>,
    /// Burn-in steps before the first survey wave.
    #[arg(long, global = true, env = "CONTACTNET_BURN_IN")]
    burn_in: Option<u32>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one trajectory and dump the final network and event log.
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        /// Total steps (defaults to the burn-in).
        #[arg(long)]
        steps: Option<u32>,
    },
    /// Simulate a survey and print its summary record.
    Survey {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        design: DesignArgs,
    },
    /// Convert between timescales and parameterisations.
    Convert(ConvertArgs),
    /// Inspect the prior configuration.
    Priors {
        #[command(subcommand)]
        action: PriorsAction,
    },
    /// Reference-table construction.
    Table {
        #[command(subcommand)]
        action: TableAction,
    },
    /// Rejection ABC on a reference table.
    Abc {
        #[command(subcommand)]
        action: AbcAction,
    },
    /// Survey-design studies.
    Study {
        #[command(subcommand)]
        action: StudyAction,
    },
    /// Regenerate the outputs described by a manifest.
    Replay {
        manifest: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum PriorsAction {
    /// Print shapes and quantiles of every prior.
    Show {
        /// Also check coverage of literature estimates at this central level.
        #[arg(long)]
        coverage: Option<f64>,
    },
}

#[derive(Debug, Subcommand)]
enum TableAction {
    /// Simulate rows `start..start+rows` of a reference table.
    Build {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        rows: usize,
        /// First row index; non-zero values append to an existing table.
        #[arg(long, default_value_t = 0)]
        start: usize,
        /// Table file name inside the output directory.
        #[arg(long, default_value = "table.csv")]
        name: String,
    },
}

#[derive(Debug, Subcommand)]
enum AbcAction {
    /// Rejection ABC with optional regression adjustment.
    Fit {
        #[arg(long)]
        table: PathBuf,
        /// Observed summaries (`key = value` lines).
        #[arg(long)]
        observed: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        accept: f64,
        #[arg(long, overrides_with = "no_adjust")]
        adjust: bool,
        #[arg(long = "no-adjust")]
        no_adjust: bool,
        /// Adjust logit-transformed probabilities.
        #[arg(long)]
        logit: bool,
    },
    /// Posterior-predictive replicates of the survey summaries.
    Ppc {
        #[arg(long)]
        posterior: PathBuf,
        #[arg(long)]
        observed: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        replicates: usize,
        #[command(flatten)]
        design: DesignArgs,
    },
    /// Quantiles of a posterior sample file.
    Quantiles {
        #[arg(long)]
        posterior: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.025, 0.5, 0.975])]
        levels: Vec<f64>,
    },
}

#[derive(Debug, Subcommand)]
enum StudyAction {
    /// RMSE of posterior means against prior-predictive test items, by lag.
    Rmse {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0, 4, 13, 26, 52])]
        lags: Vec<u32>,
        #[arg(long = "summary-set", value_delimiter = ',', default_values_t = vec!["longitudinal".to_string(), "tlfb".to_string(), "all".to_string()])]
        summary_set: Vec<String>,
        #[arg(long = "test-size", default_value_t = 200)]
        test_size: usize,
        #[arg(long, default_value_t = 10_000)]
        rows: usize,
        #[arg(long, default_value_t = 0.01)]
        accept: f64,
        #[arg(long)]
        adjust: bool,
        #[command(flatten)]
        design: DesignArgs,
    },
}

#[derive(Debug, Args)]
struct ParamArgs {
    /// Expected population size.
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    omega0: Option<f64>,
    #[arg(long)]
    omega1: Option<f64>,
}

impl ParamArgs {
    /// Stockholm point estimates at `n_fixed`, overridden by the flags.
    fn resolve(&self, config: &RunConfig) -> crate::Result<ModelParams> {
        let mut p = ModelParams::stockholm(self.n.unwrap_or(config.priors.n_fixed));
        for (param, v) in [
            (Param::Mu, self.mu),
            (Param::Rho, self.rho),
            (Param::Xi, self.xi),
            (Param::Sigma, self.sigma),
            (Param::Omega0, self.omega0),
            (Param::Omega1, self.omega1),
        ] {
            if let Some(v) = v {
                p.set(param, v);
            }
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
struct DesignArgs {
    /// Respondents.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    waves: Option<u32>,
    /// Weeks between waves.
    #[arg(long)]
    lag: Option<u32>,
    #[arg(long = "tlfb-window")]
    tlfb_window: Option<u32>,
    #[arg(long = "casual-recall")]
    casual_recall: Option<u32>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Start of reported steady durations: `window` or `formation`.
    #[arg(long = "duration-origin")]
    duration_origin: Option<DurationOrigin>,
}

impl DesignArgs {
    fn apply(&self, config: &mut RunConfig) {
        let d = &mut config.design;
        if let Some(v) = self.m {
            d.m = v;
        }
        if let Some(v) = self.waves {
            d.waves = v;
        }
        if let Some(v) = self.lag {
            d.lag = v;
        }
        if let Some(v) = self.tlfb_window {
            d.tlfb_window = v;
        }
        if let Some(v) = self.casual_recall {
            d.casual_recall = v;
        }
        if let Some(v) = self.dropout {
            d.dropout = v;
        }
        if let Some(v) = self.duration_origin {
            d.duration_origin = v;
        }
    }
}

#[derive(Debug, Args)]
struct ConvertArgs {
    /// Per-step probability at the faster scale.
    #[arg(long = "from-daily", group = "mode")]
    from_daily: Option<f64>,
    /// Per-step probability at the slower scale, converted to the faster one.
    #[arg(long = "to-daily", group = "mode")]
    to_daily: Option<f64>,
    /// Rate of events per `--period`.
    #[arg(long, group = "mode")]
    rate: Option<f64>,
    /// Probability to express as an expected waiting time.
    #[arg(long = "inverse-odds", group = "mode")]
    inverse_odds: Option<f64>,
    /// Expected waiting time to express as a probability.
    #[arg(long = "from-wait", group = "mode")]
    from_wait: Option<f64>,
    /// Fine steps per coarse step (days per week by default).
    #[arg(long, default_value_t = 7.0)]
    scale: f64,
    /// Length of the rate's period in target steps (weeks per year by default).
    #[arg(long, default_value_t = 52.0)]
    period: f64,
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidConfig(_) | Error::Parse { .. } | Error::InvalidParameter { .. } => EXIT_CONFIG,
            Error::LayoutMismatch(_) => EXIT_LAYOUT,
            Error::EmptyPosterior => EXIT_EMPTY_POSTERIOR,
            _ => EXIT_FAILURE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Runs the CLI on `args` (including the program name) and returns the exit
/// status. Diagnostics go to stderr, primary results to stdout.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, &args) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("contactnet: error: {}", f.message);
            f.code
        }
    }
}

fn load_config(global: &GlobalArgs) -> CliResult<RunConfig> {
    let mut config = match &global.config {
        Some(path) => RunConfig::load(path).map_err(|e| Failure {
            code: EXIT_CONFIG,
            message: e.to_string(),
        })?,
        None => RunConfig::default(),
    };
    if let Some(path) = &global.priors {
        config.priors = PriorConfig::load(path).map_err(|e| Failure {
            code: EXIT_CONFIG,
            message: e.to_string(),
        })?;
    }
    if let Some(v) = global.seed {
        config.master_seed = v;
    }
    if let Some(v) = global.workers {
        config.workers = v;
    }
    if let Some(v) = &global.out {
        config.output_dir = v.clone();
    }
    if let Some(v) = global.burn_in {
        config.burn_in = v;
    }
    Ok(config)
}

/// Arguments without the output directory, which must not influence outputs.
fn reproducible_args(args: &[OsString]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in args.iter().skip(1) {
        let a = a.to_string_lossy().into_owned();
        if skip {
            skip = false;
            continue;
        }
        if a == "--out" || a == "--config" || a == "--priors" {
            skip = true;
            continue;
        }
        if a.starts_with("--out=") || a.starts_with("--config=") || a.starts_with("--priors=") {
            continue;
        }
        out.push(a);
    }
    out
}

fn execute(cli: Cli, args: &[OsString]) -> CliResult<()> {
    if let Command::Replay { manifest } = &cli.command {
        return replay(manifest, &cli.global);
    }
    let mut config = load_config(&cli.global)?;
    let replay_args = reproducible_args(args);
    dispatch(cli.command, &mut config, replay_args)
}

fn replay(manifest: &Path, global: &GlobalArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(manifest).map_err(|e| Failure::from(Error::io(manifest, e)))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Failure::from(Error::parse(manifest, e)))?;
    let config_text = table
        .get("config")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Failure::from(Error::parse(manifest, "missing config")))?;
    let mut config = RunConfig::from_text(config_text).map_err(|m| Failure::from(Error::parse(manifest, m)))?;
    let args: Vec<String> = table
        .get("args")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Failure::from(Error::parse(manifest, "missing args")))?
        .iter()
        .filter_map(|v| v.as_str().map(str::to_string))
        .collect();
    let mut argv = vec!["contactnet".to_string()];
    argv.extend(args.iter().cloned());
    let cli = Cli::try_parse_from(&argv).map_err(|e| Failure {
        code: EXIT_USAGE,
        message: e.to_string(),
    })?;
    if matches!(cli.command, Command::Replay { .. }) {
        return Err(Failure {
            code: EXIT_USAGE,
            message: "a manifest cannot replay another replay".into(),
        });
    }
    if let Some(out) = &global.out {
        config.output_dir = out.clone();
    }
    if let Some(w) = global.workers {
        config.workers = w;
    }
    dispatch(cli.command, &mut config, args)
}

struct Outputs {
    dir: PathBuf,
    manifest: Manifest,
}

impl Outputs {
    fn new(config: &RunConfig, command: &str, args: Vec<String>) -> Self {
        let mut manifest = Manifest::new(command);
        let mut recorded = config.clone();
        recorded.output_dir = PathBuf::from(".");
        // the worker count never changes results
        recorded.workers = 1;
        manifest.set("master_seed", config.master_seed);
        manifest.set("config", recorded.to_text());
        manifest.set_args(args);
        Outputs {
            dir: config.output_dir.clone(),
            manifest,
        }
    }

    fn write(&mut self, name: &str, content: &str) -> CliResult<()> {
        write_atomic(&self.dir.join(name), content.as_bytes())?;
        self.manifest.output(name);
        Ok(())
    }

    fn finish(self) -> CliResult<()> {
        self.manifest.write(&self.dir)?;
        Ok(())
    }
}

fn dispatch(command: Command, config: &mut RunConfig, args: Vec<String>) -> CliResult<()> {
    match command {
        Command::Simulate { params, steps } => {
            config.validate()?;
            let params = params.resolve(config)?;
            cmd_simulate(config, &params, steps, args)
        }
        Command::Survey { params, design } => {
            design.apply(config);
            config.validate()?;
            let params = params.resolve(config)?;
            cmd_survey(config, &params, args)
        }
        Command::Convert(c) => cmd_convert(config, &c, args),
        Command::Priors {
            action: PriorsAction::Show { coverage },
        } => cmd_priors_show(config, coverage, args),
        Command::Table {
            action: TableAction::Build { design, rows, start, name },
        } => {
            design.apply(config);
            config.validate()?;
            cmd_table_build(config, rows, start, &name, args)
        }
        Command::Abc { action } => match action {
            AbcAction::Fit {
                table,
                observed,
                accept,
                adjust,
                no_adjust,
                logit,
            } => {
                let adjust = adjust || !no_adjust;
                cmd_abc_fit(config, &table, &observed, accept, adjust, logit, args)
            }
            AbcAction::Ppc {
                posterior,
                observed,
                replicates,
                design,
            } => {
                design.apply(config);
                config.validate()?;
                cmd_abc_ppc(config, &posterior, observed.as_deref(), replicates, args)
            }
            AbcAction::Quantiles { posterior, levels } => cmd_abc_quantiles(&posterior, &levels),
        },
        Command::Study {
            action:
                StudyAction::Rmse {
                    lags,
                    summary_set,
                    test_size,
                    rows,
                    accept,
                    adjust,
                    design,
                },
        } => {
            design.apply(config);
            config.validate()?;
            let sets = summary_set
                .iter()
                .map(|s| s.parse::<SummarySet>())
                .collect::<crate::Result<Vec<_>>>()?;
            let study = StudyConfig {
                prior: config.priors,
                design: config.design,
                lags,
                sets,
                table_rows: rows,
                test_size,
                accept_fraction: accept,
                adjust,
                burn_in: config.burn_in,
                master_seed: config.master_seed,
                workers: config.workers,
            };
            cmd_study_rmse(config, &study, args)
        }
        Command::Replay { .. } => unreachable!("handled before dispatch"),
    }
}

fn cmd_simulate(config: &RunConfig, params: &ModelParams, steps: Option<u32>, args: Vec<String>) -> CliResult<()> {
    let settings = SimSettings {
        total_steps: steps.unwrap_or(config.burn_in),
        burn_in: config.burn_in.min(steps.unwrap_or(config.burn_in)),
        retention: config.retention,
    };
    let (net, log) = sim::simulate(params, &settings, config.master_seed)?;
    let mut out = Outputs::new(config, "simulate", args);
    let mut edges = String::from("u,v,formed_at\n");
    for e in net.sorted_steady_edges() {
        let _ = writeln!(edges, "{},{},{}", e.a, e.b, e.formed_at);
    }
    out.write("steady_edges.csv", &edges)?;
    let mut casual = String::from("step,u,v\n");
    for c in log.casual_history() {
        for &(a, b) in &c.pairs {
            let _ = writeln!(casual, "{},{},{}", c.step, a, b);
        }
    }
    out.write("casual_edges.csv", &casual)?;
    let mut dissolved = String::from("u,v,formed_at,dissolved_at,cause\n");
    for d in log.dissolved() {
        let _ = writeln!(
            dissolved,
            "{},{},{},{},{}",
            d.edge.a,
            d.edge.b,
            d.edge.formed_at,
            d.dissolved_at,
            d.cause.as_str()
        );
    }
    out.write("dissolutions.csv", &dissolved)?;
    let mut departed = String::from("node,step\n");
    for d in log.departed() {
        let _ = writeln!(departed, "{},{}", d.node, d.step);
    }
    out.write("departures.csv", &departed)?;
    let mut nodes = String::from("node,degree\n");
    for id in net.sorted_nodes() {
        let _ = writeln!(nodes, "{},{}", id, net.degree(id).unwrap_or(0));
    }
    out.write("nodes.csv", &nodes)?;
    eprintln!(
        "step {}: {} nodes, {} steady edges",
        net.step(),
        net.len(),
        net.steady_edges().len()
    );
    out.finish()
}

fn cmd_survey(config: &RunConfig, params: &ModelParams, args: Vec<String>) -> CliResult<()> {
    let summary = survey::run_survey(params, &config.design, config.burn_in, config.master_seed)?;
    let record = summary.to_record();
    print!("{record}");
    let mut out = Outputs::new(config, "survey", args);
    out.write("summaries.toml", &record)?;
    out.finish()
}

fn cmd_convert(config: &RunConfig, c: &ConvertArgs, args: Vec<String>) -> CliResult<()> {
    let value = if let Some(q) = c.from_daily {
        analytic::prob_rescale(q, c.scale)?
    } else if let Some(p) = c.to_daily {
        analytic::prob_rescale_inverse(p, c.scale)?
    } else if let Some(x) = c.rate {
        analytic::rate_to_prob(x, c.period, 1.0)?
    } else if let Some(p) = c.inverse_odds {
        analytic::prob_to_inverse_odds(p)?
    } else if let Some(w) = c.from_wait {
        analytic::inverse_odds_to_prob(w)?
    } else {
        return Err(Failure {
            code: EXIT_USAGE,
            message: "convert needs one of --from-daily, --to-daily, --rate, --inverse-odds, --from-wait".into(),
        });
    };
    let rounded = round_sig(value, 2);
    println!("{rounded}");
    eprintln!("exact: {}", fmt_f64(value));
    let mut out = Outputs::new(config, "convert", args);
    out.write("convert.csv", &format!("rounded,exact\n{rounded},{}\n", fmt_f64(value)))?;
    out.finish()
}

/// `x` rounded to `digits` significant figures, printed without noise.
fn round_sig(x: f64, digits: i32) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (digits - 1 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn cmd_priors_show(config: &RunConfig, coverage: Option<f64>, args: Vec<String>) -> CliResult<()> {
    config.priors.validate()?;
    let mut text = priors::describe(&config.priors);
    let mut missing = Vec::new();
    if let Some(level) = coverage {
        missing = priors::uncovered_literature(&config.priors, level);
        for lit in priors::literature_values() {
            let ok = !missing.contains(&lit);
            let _ = writeln!(
                text,
                "coverage,{},{},{},{}",
                lit.param,
                fmt_f64(lit.value),
                if ok { "inside" } else { "outside" },
                lit.source
            );
        }
    }
    print!("{text}");
    let mut out = Outputs::new(config, "priors show", args);
    out.write("priors.csv", &text)?;
    out.finish()?;
    if let (Some(level), false) = (coverage, missing.is_empty()) {
        return Err(Failure {
            code: EXIT_FAILURE,
            message: format!("{} literature values outside the central {level} interval", missing.len()),
        });
    }
    Ok(())
}

fn cmd_table_build(config: &RunConfig, rows: usize, start: usize, name: &str, args: Vec<String>) -> CliResult<()> {
    let path = config.output_dir.join(name);
    let mut meta = TableMeta::new(&config.priors, &config.design, config.burn_in, config.master_seed);
    let built = abc::build_rows(&meta, start..start + rows, config.workers)?;
    let mut out = Outputs::new(config, "table build", args);
    if start == 0 {
        meta.rows = built.len();
        ReferenceTable {
            meta: meta.clone(),
            rows: built,
        }
        .save(&path)?;
    } else {
        let on_disk = ReferenceTable::append(&path, &meta, &[])?;
        if on_disk.rows != start {
            return Err(Failure {
                code: EXIT_CONFIG,
                message: format!("table holds {} rows, cannot append from row {start}", on_disk.rows),
            });
        }
        meta = ReferenceTable::append(&path, &meta, &built)?;
    }
    out.manifest.output(name);
    out.manifest.output(&format!("{name}.meta.toml"));
    eprintln!("{} rows in {}", meta.rows, path.display());
    out.finish()
}

fn load_observed(path: &Path) -> CliResult<SummaryVector> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::from(Error::io(path, e)))?;
    Ok(SummaryVector::from_record(&text).map_err(|m| Error::parse(path, m))?)
}

const THETA_COLUMNS: [&str; 6] = ["mu", "rho", "xi", "sigma", "omega0", "omega1"];

fn posterior_csv(samples: &[PosteriorSample]) -> String {
    let mut s = String::from("seed,distance,n");
    for c in THETA_COLUMNS {
        let _ = write!(s, ",{c}");
    }
    for c in THETA_COLUMNS {
        let _ = write!(s, ",raw_{c}");
    }
    s.push('\n');
    for x in samples {
        let _ = write!(s, "{},{},{}", x.seed, fmt_f64(x.distance), fmt_f64(x.theta_raw.n));
        for v in x.theta().probabilities().into_iter().chain(x.theta_raw.probabilities()) {
            let _ = write!(s, ",{}", fmt_f64(v));
        }
        s.push('\n');
    }
    s
}

fn read_posterior(path: &Path) -> CliResult<Vec<ModelParams>> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::from(Error::io(path, e)))?;
    if text.trim().is_empty() {
        return Err(Error::EmptyPosterior.into());
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Failure::from(Error::parse(path, e)))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Failure::from(Error::parse(path, format!("missing column {name}"))))
    };
    let n_col = col("n")?;
    let cols = THETA_COLUMNS.map(col);
    let mut idx = [0usize; 6];
    for (i, c) in cols.into_iter().enumerate() {
        idx[i] = c?;
    }
    let mut out = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Failure::from(Error::parse(path, e)))?;
        let num = |i: usize| {
            rec[i]
                .parse::<f64>()
                .map_err(|e| Failure::from(Error::parse(path, format!("row {}: {e}", line + 1))))
        };
        let mut probs = [0.0; 6];
        for (j, &i) in idx.iter().enumerate() {
            probs[j] = num(i)?;
        }
        out.push(ModelParams::with_probabilities(num(n_col)?, probs));
    }
    if out.is_empty() {
        return Err(Error::EmptyPosterior.into());
    }
    Ok(out)
}

fn quantile_csv(rows: &[abc::QuantileRow]) -> String {
    let mut s = String::from("parameter,level,probability,wait_weeks\n");
    for r in rows {
        let wait = r.wait_weeks.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{}", r.param, fmt_f64(r.level), fmt_f64(r.probability), wait);
    }
    s
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Prior and posterior densities on the probability scale and, for event
/// probabilities, on the waiting-time scale.
fn density_csv(prior: &PriorConfig, samples: &[ModelParams]) -> String {
    let mut s = String::from("parameter,scale,distribution,x,density\n");
    let mut emit = |param: Param, scale: &str, dist: &str, xs: &[f64], ds: &[f64]| {
        for (x, d) in xs.iter().zip(ds) {
            let _ = writeln!(s, "{param},{scale},{dist},{},{}", fmt_f64(*x), fmt_f64(*d));
        }
    };
    for param in Param::ALL {
        let shape = prior.shape(param);
        let values: Vec<f64> = samples.iter().map(|p| p.get(param)).collect();
        let lo = shape.quantile(0.001).min(stats::quantile(&values, 0.0));
        let hi = shape.quantile(0.999).max(stats::quantile(&values, 1.0));
        let grid = linspace(lo, hi, 200);
        let prior_d: Vec<f64> = grid.iter().map(|&x| shape.density(x)).collect();
        emit(param, "probability", "prior", &grid, &prior_d);
        emit(param, "probability", "posterior", &grid, &stats::gaussian_kde(&values, &grid));
        if param.has_waiting_time() {
            let waits: Vec<f64> = values.iter().filter(|&&p| p > 0.0).map(|&p| (1.0 - p) / p).collect();
            let wlo = (1.0 - hi) / hi;
            let whi = (1.0 - lo.max(1e-12)) / lo.max(1e-12);
            let whi = whi.min(stats::quantile(&waits, 1.0) * 3.0).max(wlo + 1e-9);
            let wgrid = linspace(wlo.max(0.0), whi, 200);
            let prior_w: Vec<f64> = wgrid
                .iter()
                .map(|&w| shape.density(1.0 / (1.0 + w)) / (1.0 + w).powi(2))
                .collect();
            emit(param, "wait_weeks", "prior", &wgrid, &prior_w);
            emit(param, "wait_weeks", "posterior", &wgrid, &stats::gaussian_kde(&waits, &wgrid));
        }
    }
    s
}

fn cmd_abc_fit(
    config: &RunConfig,
    table_path: &Path,
    observed_path: &Path,
    accept: f64,
    adjust: bool,
    logit: bool,
    args: Vec<String>,
) -> CliResult<()> {
    let table = ReferenceTable::load(table_path)?;
    let observed = load_observed(observed_path)?;
    let rejection = abc::abc_reject(&table, &observed, accept)?;
    eprintln!(
        "accepted {} of {} rows (epsilon {}), {} rows excluded for missing summaries",
        rejection.samples.len(),
        rejection.compared,
        fmt_f64(rejection.epsilon()),
        rejection.excluded
    );
    let samples = if adjust {
        let adj = abc::regression_adjust(&rejection.samples, &rejection.observed, AdjustOptions { logit })?;
        if adj.fallback {
            eprintln!("warning: regression design is rank-deficient, samples left unadjusted");
        }
        if adj.clamped > 0 {
            eprintln!("{} adjusted values clamped to [0, 1]", adj.clamped);
        }
        adj.samples
    } else {
        rejection.samples
    };
    let thetas: Vec<ModelParams> = samples.iter().map(PosteriorSample::theta).collect();
    let quantiles = abc::posterior_quantiles(&thetas, &[0.025, 0.5, 0.975])?;
    let mut out = Outputs::new(config, "abc fit", args);
    out.manifest.set("table_prior_hash", &table.meta.prior_hash);
    out.write("posterior.csv", &posterior_csv(&samples))?;
    let q = quantile_csv(&quantiles);
    print!("{q}");
    out.write("quantiles.csv", &q)?;
    out.write("density.csv", &density_csv(&table.meta.prior, &thetas))?;
    out.finish()
}

fn cmd_abc_ppc(
    config: &RunConfig,
    posterior: &Path,
    observed: Option<&Path>,
    replicates: usize,
    args: Vec<String>,
) -> CliResult<()> {
    let samples = read_posterior(posterior)?;
    let reps = abc::posterior_predictive(
        &samples,
        &config.design,
        config.burn_in,
        replicates,
        config.master_seed,
        config.workers,
    )?;
    let mut tidy = String::from("replicate,summary,value\n");
    for (r, v) in reps.iter().enumerate() {
        for (k, x) in v.present() {
            let _ = writeln!(tidy, "{r},{k},{}", fmt_f64(x));
        }
    }
    let mut out = Outputs::new(config, "abc ppc", args);
    out.write("ppc.csv", &tidy)?;
    if let Some(path) = observed {
        let obs = load_observed(path)?;
        let mut s = String::from("summary,observed,q025,q975,inside\n");
        for (k, x) in obs.present() {
            let values: Vec<f64> = reps.iter().filter_map(|r| r.get(k)).collect();
            let (lo, hi) = (stats::quantile(&values, 0.025), stats::quantile(&values, 0.975));
            let _ = writeln!(
                s,
                "{k},{},{},{},{}",
                fmt_f64(x),
                fmt_f64(lo),
                fmt_f64(hi),
                lo <= x && x <= hi
            );
        }
        print!("{s}");
        out.write("ppc_coverage.csv", &s)?;
    }
    out.finish()
}

fn cmd_abc_quantiles(posterior: &Path, levels: &[f64]) -> CliResult<()> {
    let samples = read_posterior(posterior)?;
    let rows = abc::posterior_quantiles(&samples, levels)?;
    print!("{}", quantile_csv(&rows));
    Ok(())
}

fn cmd_study_rmse(config: &RunConfig, study: &StudyConfig, args: Vec<String>) -> CliResult<()> {
    let report = abc::rmse_study(study)?;
    let mut s = String::from("summary_set,lag,parameter,rmse,se,items\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.set,
            r.lag,
            r.param,
            fmt_f64(r.rmse),
            fmt_f64(r.se),
            r.items
        );
    }
    let mut flags = String::from("summary_set,lag,skipped,fallbacks\n");
    for ((set, lag, skipped), (_, _, fb)) in report.skipped.iter().zip(&report.fallbacks) {
        let _ = writeln!(flags, "{set},{lag},{skipped},{fb}");
    }
    print!("{s}");
    let mut out = Outputs::new(config, "study rmse", args);
    out.write("rmse.csv", &s)?;
    out.write("rmse_flags.csv", &flags)?;
    out.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_figures() {
        assert_eq!(round_sig(0.067934652, 2), "0.068");
        assert_eq!(round_sig(0.01403846, 2), "0.014");
        assert_eq!(round_sig(24.9, 2), "25");
        assert_eq!(round_sig(0.0, 2), "0");
    }

    #[test]
    fn out_flags_are_not_recorded() {
        let args: Vec<OsString> = ["contactnet", "--out", "x", "survey", "--out=y", "--m", "5"]
            .iter()
            .map(OsString::from)
            .collect();
        assert_eq!(reproducible_args(&args), vec!["survey", "--m", "5"]);
    }

    #[test]
    fn error_codes() {
        assert_eq!(Failure::from(Error::EmptyPosterior).code, EXIT_EMPTY_POSTERIOR);
        assert_eq!(Failure::from(Error::LayoutMismatch(String::new())).code, EXIT_LAYOUT);
        assert_eq!(Failure::from(Error::InvalidConfig(String::new())).code, EXIT_CONFIG);
        assert_eq!(Failure::from(Error::EmptyTable).code, EXIT_FAILURE);
    }
}
