use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use assouadlab::cmaps::MapExpr;
use assouadlab::dimension::{regularize_spectrum, Estimator, EstimatorParams};
use assouadlab::harness::{reports_csv, run_suite, Suite, SuiteConfig, Verdict};
use assouadlab::porosity::{estimate_porosity, PorosityParams};
use assouadlab::refine::{rate_sweep, RefineSchedule, DEFAULT_MAX_LEVEL};
use assouadlab::{generate, PointSet, SetSpec};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(
    name = "assouadlab",
    version,
    about = "Assouad dimension and spectrum estimation for planar point sets"
)]
struct Cli {
    /// JSON file with `estimator`, `porosity` and `suite` sections; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "ASSOUADLAB_THREADS")]
    threads: Option<usize>,
    /// Omit the timestamp field from JSON output.
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Log the resolved parameters to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Default)]
struct EstimatorFlags {
    #[arg(long)]
    n_centers: Option<usize>,
    #[arg(long)]
    m_max: Option<u32>,
    #[arg(long)]
    c_res: Option<f64>,
    #[arg(long)]
    m_min: Option<u32>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a point set.
    Gen {
        /// seq:<p>, geom:<q>, cantor:<ratio>:<depth>, grid:<n>, spiral:<p>:<tmax>:<step> or file:<path>
        #[arg(long)]
        set: String,
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Apply a map expression to a point set.
    Map {
        #[arg(long)]
        map: String,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Singularity exclusion radius (default: 1e-9 times the set diameter).
        #[arg(long)]
        exclusion: Option<f64>,
    },
    /// Estimate the Assouad dimension.
    Dim {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        est: EstimatorFlags,
    },
    /// Estimate the Assouad spectrum over a theta range.
    Spectrum {
        #[arg(short, long)]
        input: PathBuf,
        /// start:stop:step, inclusive
        #[arg(long, default_value = "0.05:0.95:0.05")]
        theta: String,
        /// Report the regularized (running maximum) curve.
        #[arg(long)]
        regularize: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        est: EstimatorFlags,
    },
    /// Run the major/minor refinement sweep.
    Refine {
        #[arg(long)]
        map: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        p: f64,
        #[arg(long = "Rprime")]
        r_prime: f64,
        /// Number of steps from j0.
        #[arg(long)]
        jmax: u32,
        #[arg(long)]
        theta: Option<f64>,
        /// Support set (default: seq:1 with 10000 points).
        #[arg(short, long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_LEVEL)]
        max_level: u32,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Estimate porosity.
    Porosity {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        witnesses: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a verification suite.
    Verify {
        /// Suite name or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the CSV summary here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// Failure kinds mapped to exit codes.
enum Failure {
    Usage(String),
    Check(String),
}

impl From<assouadlab::Error> for Failure {
    fn from(e: assouadlab::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Debug, Default, serde::Deserialize)]
#[serde(default)]
struct FileConfig {
    estimator: Option<EstimatorParams>,
    porosity: Option<PorosityParams>,
    suite: Option<SuiteConfig>,
}

struct Ctx {
    file: FileConfig,
    timestamp: bool,
    verbose: bool,
}

impl Ctx {
    fn estimator(&self, flags: &EstimatorFlags) -> CliResult<EstimatorParams> {
        let mut p = self.file.estimator.clone().unwrap_or_default();
        if let Some(v) = flags.n_centers {
            p.n_centers = v;
        }
        if let Some(v) = flags.m_max {
            p.m_max = v;
        }
        if let Some(v) = flags.c_res {
            p.c_res = v;
        }
        if let Some(v) = flags.m_min {
            p.m_min = v;
        }
        p.validate()?;
        self.log("estimator", &p)?;
        Ok(p)
    }

    fn log<T: serde::Serialize>(&self, what: &str, value: &T) -> CliResult<()> {
        if self.verbose {
            eprintln!("{what}: {}", serde_json::to_string(value)?);
        }
        Ok(())
    }

    fn stamp(&self, mut v: Value) -> Value {
        if self.timestamp {
            let secs = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            v["generated_at_unix"] = json!(secs);
        }
        v
    }
}

fn write_out(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_text(v: &Value) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn parse_map(s: &str) -> CliResult<MapExpr> {
    s.parse()
        .map_err(|e: assouadlab::Error| Failure::Usage(e.to_string()))
}

/// Loads a set and moves it into the unit frame if it is not already there.
fn load_normalized(path: &Path, ctx: &Ctx) -> CliResult<PointSet> {
    let set = PointSet::load(path)?;
    if set.is_normalized() {
        return Ok(set);
    }
    let (n, sim) = set.normalize();
    ctx.log("normalized by", &sim)?;
    Ok(n)
}

fn parse_theta_range(s: &str) -> CliResult<Vec<f64>> {
    let bad = || Failure::Usage(format!("bad theta range {s:?}; expected start:stop:step"));
    let v: Vec<f64> = s
        .split(':')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, stop, step] = v[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && start <= stop && start > 0.0 && stop < 1.0) {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    // integer multiples keep grid points free of accumulated rounding
    Ok((0..=n)
        .map(|i| start + i as f64 * step)
        .map(|t| (t * 1e12).round() / 1e12)
        .collect())
}

fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)?
        }
        None => FileConfig::default(),
    };
    let ctx = Ctx {
        file,
        timestamp: !cli.no_timestamp,
        verbose: cli.verbose,
    };
    if let Some(n) = cli.threads {
        ctx.log("threads", &n)?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }

    match cli.cmd {
        Cmd::Gen { set, count, output } => {
            let spec = SetSpec::parse(&set)?;
            let s = match &spec {
                SetSpec::Explicit { path } => PointSet::load(path)?,
                _ => generate(&spec, count)?,
            };
            s.save(&output)?;
        }
        Cmd::Map {
            map,
            input,
            output,
            exclusion,
        } => {
            let expr = parse_map(&map)?;
            let set = PointSet::load(&input)?;
            let img = expr.apply(&set, exclusion)?;
            if ctx.verbose {
                eprintln!("{}", img.resolution_note);
            }
            img.set.save(&output)?;
        }
        Cmd::Dim { input, json, est } => {
            let params = ctx.estimator(&est)?;
            let set = load_normalized(&input, &ctx)?;
            let d = Estimator::new(&set, &params)?.assouad();
            if json {
                let v = ctx.stamp(json!({ "input": input, "params": params, "estimate": d }));
                write_out(None, &json_text(&v)?)?;
            } else {
                println!("{:?}", d.value);
            }
        }
        Cmd::Spectrum {
            input,
            theta,
            regularize,
            output,
            est,
        } => {
            let params = ctx.estimator(&est)?;
            let thetas = parse_theta_range(&theta)?;
            let set = load_normalized(&input, &ctx)?;
            let mut curve = Estimator::new(&set, &params)?.spectrum(&thetas)?;
            if regularize {
                curve = regularize_spectrum(&curve);
            }
            write_out(output.as_deref(), &curve.to_csv())?;
        }
        Cmd::Refine {
            map,
            alpha,
            p,
            r_prime,
            jmax,
            theta,
            input,
            max_level,
            output,
        } => {
            let expr = parse_map(&map)?;
            let schedule =
                RefineSchedule::new(r_prime, expr.holomorphic_part_degree(), alpha, p, theta)?;
            ctx.log("schedule", &schedule)?;
            let support = match input {
                Some(path) => PointSet::load(path)?,
                None => generate(&SetSpec::SequencePower { p: 1.0 }, 10_000)?,
            };
            let sweep = rate_sweep(&expr, &support, &schedule, jmax, max_level)?;
            let v = ctx.stamp(json!({ "support": support.label(), "sweep": sweep }));
            write_out(output.as_deref(), &json_text(&v)?)?;
        }
        Cmd::Porosity {
            input,
            witnesses,
            output,
        } => {
            let params = ctx.file.porosity.clone().unwrap_or_default();
            ctx.log("porosity", &params)?;
            let set = load_normalized(&input, &ctx)?;
            let report = estimate_porosity(&set, &params, witnesses)?;
            let v = ctx.stamp(json!({ "input": input, "params": params, "report": report }));
            write_out(output.as_deref(), &json_text(&v)?)?;
        }
        Cmd::Verify { suite, output, csv } => {
            let suites: Vec<Suite> = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![suite.parse()?]
            };
            let cfg = ctx.file.suite.clone().unwrap_or_default();
            ctx.log("suite", &cfg)?;
            let mut reports = Vec::new();
            for s in suites {
                reports.extend(run_suite(s, &cfg)?);
            }
            let failed = reports
                .iter()
                .filter(|r| r.verdict == Verdict::Fail)
                .count();
            let v = ctx.stamp(json!({ "config": cfg, "reports": reports }));
            write_out(output.as_deref(), &json_text(&v)?)?;
            if let Some(path) = csv {
                write_out(Some(&path), &reports_csv(&reports)?)?;
            }
            for r in &reports {
                eprintln!("{:<20} {} {}", r.verdict, r.suite, r.row);
            }
            if failed > 0 {
                return Err(Failure::Check(format!(
                    "{failed} of {} rows failed",
                    reports.len()
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
