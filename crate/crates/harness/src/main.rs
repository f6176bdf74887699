use std::f64::consts::PI;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use matchlab_core::stats::moments;
use matchlab_core::transport::EmpiricalSample;
use matchlab_core::{DomainGeometry, DomainKind, GridField, SpectralBasis};
use matchlab_harness::emit::{emit, write_json, write_trials};
use matchlab_harness::experiments::bipartite;
use matchlab_harness::{
    run_experiment, run_experiment_with, sampler, trial_rng, ExperimentConfig, ExperimentKind, HarnessError,
    Result, TimeForm, TimeRule,
};

#[derive(Parser)]
#[command(name = "matchlab", version, about = "Monte Carlo experiments on random matching")]
struct Cli {
    /// Experiment configuration (JSON); also supplies defaults for the other subcommands.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; tables go to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DomainArg {
    /// interval, square, circle or torus2
    #[arg(long)]
    domain: Option<DomainKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one uniform sample and print its points.
    Sample {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long)]
        n: usize,
    },
    /// Eigenvalue table of the spectral basis.
    Spectrum {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long, default_value_t = 4)]
        cutoff: usize,
    },
    /// Heat trace on a list of times.
    Trace {
        #[command(flatten)]
        domain: DomainArg,
        /// comma-separated times
        #[arg(long, value_delimiter = ',', default_value = "0.0001,0.001,0.01")]
        s_grid: Vec<f64>,
    },
    /// Moment profile of a named test field, as JSON.
    Moments {
        #[command(flatten)]
        domain: DomainArg,
        /// ramp, cos or product
        #[arg(long, default_value = "cos")]
        field: String,
    },
    /// Dirichlet energy of the smoothed potential per trial.
    Energy {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Bipartite matching cost per trial.
    Match {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        p: u32,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// write the optimal permutation of trial 0 as JSON
        #[arg(long)]
        save_plan: Option<PathBuf>,
    },
    /// Dacorogna-Moser upper bound per trial.
    BoundUpper {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Viscous dual lower bound per trial, with slack diagnostics.
    BoundLower {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        sigma_floor: Option<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Run the experiment described by --config.
    Experiment,
}

struct Context {
    base: Option<ExperimentConfig>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

impl Context {
    fn domain(&self, arg: &DomainArg, fallback: DomainKind) -> DomainKind {
        arg.domain.or(self.base.as_ref().map(|c| c.domain)).unwrap_or(fallback)
    }

    fn seed(&self) -> u64 {
        self.seed.or(self.base.as_ref().map(|c| c.seed)).unwrap_or(0)
    }

    fn per_trial(&self, domain: DomainKind, kind: ExperimentKind, n: usize, trials: usize, t: Option<f64>) -> ExperimentConfig {
        let mut cfg = match &self.base {
            Some(b) => ExperimentConfig { domain, experiment: kind, n_values: vec![n], trials, ..b.clone() },
            None => ExperimentConfig::new(domain, kind, vec![n], trials),
        };
        if let Some(t) = t {
            cfg.t_rule = TimeRule { gamma: t, form: TimeForm::Fixed };
        }
        cfg.seed = self.seed();
        cfg
    }

    /// stdout, or `<out>/<name>` when an output directory is set
    fn sink(&self, name: &str) -> Result<Box<dyn Write>> {
        match &self.out {
            None => Ok(Box::new(io::stdout().lock())),
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.clone(), source })?;
                let path = dir.join(name);
                let f = fs::File::create(&path).map_err(|source| HarnessError::Io { path, source })?;
                Ok(Box::new(io::BufWriter::new(f)))
            }
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.into(), source }
}

fn stdout_path() -> &'static Path {
    Path::new("<stdout>")
}

fn write_csv(ctx: &Context, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(ctx.sink(name)?);
    let err = |source| HarnessError::Csv { path: name.into(), source };
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.flush().map_err(io_err(stdout_path()))
}

fn run_records(ctx: &Context, cfg: &ExperimentConfig, name: &str) -> Result<()> {
    let out = run_experiment(cfg)?;
    write_trials(&out.records, csv::Writer::from_writer(ctx.sink(name)?))
}

fn test_field(domain: DomainGeometry, name: &str) -> Result<GridField> {
    let m = if domain.dimension() == 1 { 4096 } else { 256 };
    let f: fn(matchlab_core::Point) -> f64 = match name {
        "ramp" => |p| p.x(),
        "cos" => |p| 2f64.sqrt() * (2.0 * PI * p.x()).cos(),
        "product" => |p| (2.0 * PI * p.x()).cos() * (2.0 * PI * p.y()).cos(),
        other => return Err(HarnessError::Config(format!("unknown test field `{other}` (ramp, cos, product)"))),
    };
    Ok(GridField::from_fn(domain, m, f))
}

fn execute(cli: Cli) -> Result<()> {
    let base = cli.config.as_deref().map(ExperimentConfig::load).transpose()?;
    let ctx = Context { base, seed: cli.seed, out: cli.out };
    match cli.command {
        Command::Sample { domain, n } => {
            let d = DomainGeometry::new(ctx.domain(&domain, DomainKind::Torus2));
            let s = sampler(d, n, &mut trial_rng(ctx.seed(), 0, n, 0));
            let rows = s.points.iter().map(|p| vec![p.x().to_string(), p.y().to_string()]).collect();
            write_csv(&ctx, "sample.csv", &["x", "y"], rows)
        }
        Command::Spectrum { domain, cutoff } => {
            let d = DomainGeometry::new(ctx.domain(&domain, DomainKind::Torus2));
            let basis = SpectralBasis::new(d, cutoff)?;
            let rows = basis
                .modes()
                .iter()
                .map(|m| {
                    vec![
                        m.wavevector[0].to_string(),
                        m.wavevector[1].to_string(),
                        m.eigenvalue.to_string(),
                        format!("{:?}", m.function),
                    ]
                })
                .collect();
            write_csv(&ctx, "spectrum.csv", &["k1", "k2", "eigenvalue", "function"], rows)
        }
        Command::Trace { domain, s_grid } => {
            let d = DomainGeometry::new(ctx.domain(&domain, DomainKind::Torus2));
            let s_min = s_grid.iter().copied().fold(f64::INFINITY, f64::min);
            if !(s_min > 0.0) {
                return Err(HarnessError::Config("trace times must be positive".into()));
            }
            let basis = SpectralBasis::for_time(d, s_min)?;
            let mut rows = vec![];
            for s in s_grid {
                let tr = basis.trace(s)?;
                let scaled = (4.0 * PI * s).powf(d.dimension() as f64 / 2.0) * tr;
                rows.push(vec![s.to_string(), tr.to_string(), scaled.to_string()]);
            }
            write_csv(&ctx, "trace.csv", &["s", "trace", "scaled_trace"], rows)
        }
        Command::Moments { domain, field } => {
            let d = DomainGeometry::new(ctx.domain(&domain, DomainKind::Circle));
            let profile = moments(&test_field(d, &field)?);
            let text = serde_json::to_string_pretty(&profile)
                .map_err(|source| HarnessError::Json { path: stdout_path().into(), source })?;
            writeln!(ctx.sink("moments.json")?, "{text}").map_err(io_err(stdout_path()))
        }
        Command::Energy { domain, n, t, trials } => {
            let cfg = ctx.per_trial(ctx.domain(&domain, DomainKind::Torus2), ExperimentKind::EnergyIdentity, n, trials, Some(t));
            run_records(&ctx, &cfg, "energy.csv")
        }
        Command::Match { domain, n, p, trials, save_plan } => {
            let kind = match p {
                1 => ExperimentKind::W1Scaling,
                2 => ExperimentKind::MatchBipartite,
                _ => return Err(HarnessError::Config(format!("p must be 1 or 2, got {p}"))),
            };
            let cfg = ctx.per_trial(ctx.domain(&domain, DomainKind::Torus2), kind, n, trials, None);
            if let Some(path) = save_plan {
                let d = cfg.geometry();
                let mut rng = trial_rng(cfg.seed, kind.id(), n, 0);
                let (a, b): (EmpiricalSample, EmpiricalSample) = (sampler(d, n, &mut rng), sampler(d, n, &mut rng));
                let plan = bipartite(&a, &b, p)?;
                write_json(&plan, &path)?;
            }
            run_records(&ctx, &cfg, "match.csv")
        }
        Command::BoundUpper { domain, n, t, trials } => {
            let cfg = ctx.per_trial(ctx.domain(&domain, DomainKind::Torus2), ExperimentKind::DmBound, n, trials, Some(t));
            run_records(&ctx, &cfg, "bound_upper.csv")
        }
        Command::BoundLower { domain, n, t, sigma_floor, trials } => {
            let mut cfg =
                ctx.per_trial(ctx.domain(&domain, DomainKind::Torus2), ExperimentKind::DualBound, n, trials, Some(t));
            if let Some(s) = sigma_floor {
                cfg.sigma_floor = s;
            }
            cfg.validate()?;
            run_records(&ctx, &cfg, "bound_lower.csv")
        }
        Command::Experiment => {
            let mut cfg = ctx
                .base
                .clone()
                .ok_or_else(|| HarnessError::Config("experiment needs --config".into()))?;
            if let Some(s) = ctx.seed {
                cfg.seed = s;
            }
            let out = run_experiment_with(&cfg, |n, batch| {
                eprintln!("n = {n}: {} trials done", batch.len());
            })?;
            let dir = ctx.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let files = emit(&out, &dir)?;
            eprintln!("wrote {}, {} and {}", files.table.display(), files.sidecar.display(), files.trials.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
