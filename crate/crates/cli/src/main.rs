use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use depthcause::data::fmt_real;
use depthcause::functional::ed_grid_is_sparse;
use depthcause::pipeline::{fit_units, mean_replicated_depth, parse_key_values, replicate_sample};
use depthcause::report::{fnv1a64, render_depths, render_report, render_split, render_summary, RunManifest};
use depthcause::stats::streams;
use depthcause::{
    aggregate_h, causal_strength, depth_split, functional_depth, load_curves, load_outcomes, load_subsidies,
    median_difference, run_baseline, run_pipeline, write_curves, DepthMethod, DepthVector, Error, PipelineConfig,
    RandomStream, ScaleEstimator, SplitMode,
};

const SEED_VAR: &str = "DEPTHCAUSE_SEED";

/// Depth-based causal analysis of treatment trajectories and outcomes.
#[derive(Parser)]
#[command(name = "depthcause", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Functional depth of every unit in a curves file.
    Depth(DepthArgs),
    /// Dense series drawn around each unit's deepest regression line.
    Replicate(ReplicateArgs),
    /// Rank sum over random groups of a given size.
    Baseline(BaselineArgs),
    /// Full analysis; writes report files to a directory.
    Pipeline(Box<PipelineArgs>),
    /// Difference between the central and peripheral functional medians.
    MedianDiff(MedianDiffArgs),
}

#[derive(Args)]
struct DepthArgs {
    /// Curves in long format `unit,t,value`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "ed")]
    method: DepthMethod,
    /// Average the depth over replications with this many grid points.
    #[arg(long, value_name = "M")]
    replicate: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ReplicateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 500)]
    m: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Put every value exactly on the deepest line.
    #[arg(long)]
    sigma_zero: bool,
}

#[derive(Args)]
struct BaselineArgs {
    /// Outcomes CSV: `unit` column followed by numeric variables.
    #[arg(long)]
    outcomes: PathBuf,
    #[arg(long)]
    nc: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    subsidies: PathBuf,
    #[arg(long)]
    outcomes: PathBuf,
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Comma-separated depth methods, one report column pair each.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<DepthMethod>,
    #[command(flatten)]
    overrides: Overrides,
    /// Any config key, as `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Config values given on the command line; each wins over the file.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    split_mode: Option<String>,
    #[arg(long)]
    quantile: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    replication: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    inner_reps: Option<String>,
    #[arg(long)]
    outer_reps: Option<String>,
    #[arg(long)]
    baseline_reps: Option<String>,
    #[arg(long)]
    permutation_reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    outlyingness_variant: Option<String>,
    #[arg(long)]
    one_sided_fraction: Option<String>,
    #[arg(long)]
    direction_count: Option<String>,
    #[arg(long)]
    scale: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    threads: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        [
            ("split_mode", &self.split_mode),
            ("quantile", &self.quantile),
            ("alpha", &self.alpha),
            ("replication", &self.replication),
            ("m", &self.m),
            ("inner_reps", &self.inner_reps),
            ("outer_reps", &self.outer_reps),
            ("baseline_reps", &self.baseline_reps),
            ("permutation_reps", &self.permutation_reps),
            ("seed", &self.seed),
            ("outlyingness_variant", &self.outlyingness_variant),
            ("one_sided_fraction", &self.one_sided_fraction),
            ("direction_count", &self.direction_count),
            ("scale", &self.scale),
            ("strength_tau", &self.tau),
            ("threads", &self.threads),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
        .collect()
    }
}

#[derive(Args)]
struct MedianDiffArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "ed")]
    method: DepthMethod,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Put the lowest `q` fraction into C instead of thresholding at alpha.
    #[arg(long)]
    quantile: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Print the difference curve `t,diff` instead of the summary row.
    #[arg(long)]
    curve: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_usage() {
            1
        } else if e.is_degenerate() {
            3
        } else {
            2
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn write_failure(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: 2,
        message: format!("cannot write {}: {e}", path.display()),
    }
}

fn usage(message: String) -> Failure {
    Failure { code: 1, message }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Depth(a) => cmd_depth(a),
        Command::Replicate(a) => cmd_replicate(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Pipeline(a) => cmd_pipeline(*a),
        Command::MedianDiff(a) => cmd_median_diff(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Seed from the flag, else from the environment, else 1.
fn resolve_seed(flag: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = flag {
        return Ok(s);
    }
    env_seed().map(|s| s.unwrap_or(1))
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("{SEED_VAR} must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn emit(text: &str) -> Outcome {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| write_failure(Path::new("<stdout>"), e))
}

fn warn_sparse(n: usize, m: usize) {
    eprintln!("warning: extremal depth on {m} grid points for {n} curves; ties are likely, consider --replicate");
}

fn depth_rows(d: &DepthVector<f64>) -> String {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d.units[a].name.cmp(&d.units[b].name));
    let mut out = String::from("unit,depth\n");
    for i in order {
        let _ = writeln!(out, "{},{}", d.units[i].name, fmt_real(d.values[i]));
    }
    out
}

fn cmd_depth(a: DepthArgs) -> Outcome {
    let sample = load_curves::<f64>(&a.input)?;
    let depths = match a.replicate {
        None => {
            if a.method == DepthMethod::Ed && ed_grid_is_sparse(&sample) {
                warn_sparse(sample.len(), sample.grid_len());
            }
            functional_depth(&sample, a.method)?
        }
        Some(m) => {
            if a.method == DepthMethod::Ed && m < 2 * sample.len() {
                warn_sparse(sample.len(), m);
            }
            let seed = resolve_seed(a.seed)?;
            mean_replicated_depth(&sample, a.method, m, a.reps, seed, ScaleEstimator::Mad)?
        }
    };
    emit(&depth_rows(&depths))
}

fn cmd_replicate(a: ReplicateArgs) -> Outcome {
    let sample = load_curves::<f64>(&a.input)?;
    let mut fits = fit_units(&sample, ScaleEstimator::Mad)?;
    if a.sigma_zero {
        for f in &mut fits {
            f.sigma = 0.0;
        }
    }
    let seed = resolve_seed(a.seed)?;
    let mut stream = RandomStream::new(seed, streams::id(streams::REPLICATION, 0));
    let rep = replicate_sample(&sample, &fits, a.m, &mut stream)?;
    let mut buf = Vec::new();
    write_curves(&rep, &mut buf)?;
    emit(&String::from_utf8_lossy(&buf))
}

fn cmd_baseline(a: BaselineArgs) -> Outcome {
    let outcomes = load_outcomes::<f64>(&a.outcomes)?;
    let n = outcomes.len();
    if a.nc == 0 || a.nc >= n {
        return Err(usage(format!(
            "--nc must lie in 1..={} for {n} units",
            n.saturating_sub(1)
        )));
    }
    let seed = resolve_seed(a.seed)?;
    let mut stream = RandomStream::new(seed, streams::id(streams::BASELINE, 0));
    let (mean, sd) = run_baseline(&outcomes, a.nc, a.reps, &mut stream)?;
    let null_mean = (a.nc * (n + 1)) as f64 / 2.0;
    emit(&format!(
        "n,n_c,reps,mean,sd,null_mean\n{n},{},{},{},{},{}\n",
        a.nc,
        a.reps,
        fmt_real(mean),
        fmt_real(sd),
        fmt_real(null_mean)
    ))
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|source| {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}

fn cmd_pipeline(a: PipelineArgs) -> Outcome {
    let mut cfg = PipelineConfig::default();
    let mut file_keys = Vec::new();
    if let Some(path) = &a.config {
        let text = String::from_utf8(read_input(path)?)
            .map_err(|_| usage(format!("{}: config is not UTF-8", path.display())))?;
        for (line, k, v) in parse_key_values(&text)? {
            cfg.set(&k, &v).map_err(|e| Error::Config {
                line,
                message: e.to_string(),
            })?;
            file_keys.push(k);
        }
    }
    let has = |keys: &[&str]| file_keys.iter().any(|k| keys.contains(&k.as_str()));
    if a.overrides.seed.is_none() && !has(&["seed"]) {
        if let Some(s) = env_seed()? {
            cfg.seed = s;
        }
    }
    for (k, v) in a.overrides.pairs() {
        cfg.set(k, v)?;
    }
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(&k.trim().to_ascii_lowercase(), v.trim())?;
    }
    cfg.validate()?;

    let methods = if !a.methods.is_empty() {
        a.methods.clone()
    } else if has(&["depth_method", "method"]) {
        vec![cfg.depth_method]
    } else {
        DepthMethod::FUNCTIONAL.to_vec()
    };

    let subsidies_bytes = read_input(&a.subsidies)?;
    let outcomes_bytes = read_input(&a.outcomes)?;
    let functional = aggregate_h::<f64>(&load_subsidies(&a.subsidies)?)?;
    let outcomes = load_outcomes::<f64>(&a.outcomes)?;

    let mut reports = Vec::with_capacity(methods.len());
    for &method in &methods {
        let run = PipelineConfig {
            depth_method: method,
            ..cfg.clone()
        };
        reports.push(run_pipeline(&functional, &outcomes, &run)?);
    }

    let inputs = vec![
        ("subsidies".to_string(), fnv1a64(&subsidies_bytes)),
        ("outcomes".to_string(), fnv1a64(&outcomes_bytes)),
    ];
    let mut manifest = RunManifest::new(&cfg, &methods, inputs);
    let files = [
        ("report.csv", render_report(&reports, &manifest)),
        ("summary.csv", render_summary(&reports, &manifest)),
        ("depths.csv", render_depths(&reports[0].depth_table)),
        ("split.csv", render_split(&reports)),
    ];
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    manifest.timestamp = Some(format!("{secs} (unix seconds)"));

    fs::create_dir_all(&a.out).map_err(|e| write_failure(&a.out, e))?;
    for (name, text) in files.iter().chain([&("manifest.txt", manifest.render())]) {
        let path = a.out.join(name);
        fs::write(&path, text).map_err(|e| write_failure(&path, e))?;
    }
    Ok(())
}

fn cmd_median_diff(a: MedianDiffArgs) -> Outcome {
    let sample = load_curves::<f64>(&a.input)?;
    let mut cfg = PipelineConfig {
        depth_method: a.method,
        alpha: a.alpha,
        ..PipelineConfig::default()
    };
    if let Some(q) = a.quantile {
        cfg.split_mode = SplitMode::Quantile(q);
    }
    cfg.validate()?;
    let (_, split) = depth_split(&sample, &cfg)?;
    let md = median_difference(&sample.select(&split.f)?, &sample.select(&split.c)?, a.method)?;
    let strength = causal_strength(&md, a.tau)?;
    let mut out = String::new();
    if a.curve {
        out.push_str("t,diff\n");
        for (t, d) in md.grid.iter().zip(&md.diff) {
            let _ = writeln!(out, "{},{}", fmt_real(*t), fmt_real(*d));
        }
    } else {
        out.push_str("method,n_c,n_f,sup_norm,l2_norm,strength\n");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            a.method,
            split.c.len(),
            split.f.len(),
            fmt_real(md.sup_norm),
            fmt_real(md.l2_norm),
            fmt_real(strength)
        );
    }
    emit(&out)
}
