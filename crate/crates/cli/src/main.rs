use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use lqrlab::bench::{self, ExperimentSpec, PlotMetric};
use lqrlab::lds::{seeded_rng, EpisodeBudget, LqrInstance};
use lqrlab::linalg::{self, Matrix, Vector};
use lqrlab::policysearch::{chi_third_moment, gradient_variance_diag};
use lqrlab::{riccati, sysid, Error};

#[derive(Parser)]
#[command(name = "lqrlab", version, about = "Sample-complexity benchmarks for learning LQR controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Riccati equation of an instance and report the optimal controller.
    Solve { instance: PathBuf },
    /// Estimate (A, B) by least squares from white-noise excitation.
    Identify {
        instance: PathBuf,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        #[arg(long, default_value_t = 1.0)]
        excitation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Bootstrap replicates for operator-norm error bounds (0 disables).
        #[arg(long, default_value_t = 0)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
    },
    /// Run an experiment spec and write one CSV row per (method, seed, budget).
    Bench {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's seed_base.
        #[arg(long)]
        seed_base: Option<u64>,
    },
    /// Render a results CSV as SVG.
    Plot {
        results: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricArg::Cost)]
        metric: MetricArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Diagnostics.
    Diag {
        #[command(subcommand)]
        which: Diag,
    },
}

#[derive(Subcommand)]
enum Diag {
    /// Score-function gradient norms for R(u) = ‖u‖² over doubling dimensions.
    Variance {
        /// Dimension range `lo..hi`, visited as lo, 2lo, 4lo, … up to hi.
        #[arg(long, default_value = "2..64")]
        dims: String,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Cost,
    Stabilization,
}

fn format_matrix(m: &Matrix) -> String {
    let rows: Vec<String> = linalg::to_rows(m)
        .iter()
        .map(|r| format!("[{}]", r.iter().map(|v| format!("{v:.10e}")).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("[{}]", rows.join(", "))
}

fn solve(path: &Path) -> anyhow::Result<()> {
    let inst = LqrInstance::load(path)?;
    let sol = riccati::dare_solve(&inst.system, &inst.cost)?;
    let report = riccati::stability_report(&inst.system, &sol.gain)?;
    println!("M = {}", format_matrix(&sol.value));
    println!("K = {}", format_matrix(&sol.gain));
    println!("spectral_radius = {:.12}", report.spectral_radius);
    println!("average_cost = {:.12e}", 0.5 * (&sol.value * inst.system.noise_cov()).trace());
    println!("iterations = {}", sol.iterations);
    Ok(())
}

fn identify(path: &Path, episodes: usize, excitation: f64, seed: u64, n_boot: usize, confidence: f64) -> anyhow::Result<()> {
    let inst = LqrInstance::load(path)?;
    let mut rng = seeded_rng(seed);
    let mut budget = EpisodeBudget::new();
    let data = sysid::collect_excitation(&mut budget, &inst, episodes, excitation, &mut rng)?;
    let est = sysid::least_squares_identify(&data, 0.0)?;
    println!("samples = {}", budget.samples_used());
    println!("A_hat = {}", format_matrix(&est.a_hat));
    println!("B_hat = {}", format_matrix(&est.b_hat));
    println!("residual_cov = {}", format_matrix(&est.residual_cov));
    println!("error_A = {:.6e}", linalg::op_norm(&(&est.a_hat - inst.system.a())));
    println!("error_B = {:.6e}", linalg::op_norm(&(&est.b_hat - inst.system.b())));
    if n_boot > 0 {
        let unc = sysid::bootstrap_uncertainty(&est, &data, n_boot, confidence, &mut rng)?;
        println!("eps_A = {:.6e}", unc.eps_a);
        println!("eps_B = {:.6e}", unc.eps_b);
    }
    Ok(())
}

fn bench_cmd(spec_path: &Path, out: &Path, seed_base: Option<u64>) -> anyhow::Result<()> {
    let spec = ExperimentSpec::load(spec_path)?;
    let table = bench::run_experiment(&spec, seed_base.unwrap_or(spec.seed_base))?;
    let file = fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    bench::emit_csv(&table, file).with_context(|| format!("writing {}", out.display()))?;
    let resolved = ExperimentSpec {
        seed_base: seed_base.unwrap_or(spec.seed_base),
        ..spec
    };
    let config_path = out.with_extension("config.json");
    fs::write(&config_path, resolved.to_json()?).with_context(|| format!("writing {}", config_path.display()))?;
    for s in table.summaries() {
        eprintln!(
            "{:<16} samples={:<7} median={:<12.6e} stabilized={:.2}",
            s.method, s.samples, s.median, s.stabilized_fraction
        );
    }
    Ok(())
}

fn plot(results: &Path, metric: MetricArg, out: &Path) -> anyhow::Result<()> {
    let file = fs::File::open(results).with_context(|| format!("opening {}", results.display()))?;
    let table = bench::parse_csv(file)?;
    let metric = match metric {
        MetricArg::Cost => PlotMetric::Cost,
        MetricArg::Stabilization => PlotMetric::Stabilization,
    };
    fs::write(out, bench::emit_plot(&table, metric)).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn parse_dims(spec: &str) -> anyhow::Result<Vec<usize>> {
    let (lo, hi) = spec
        .split_once("..")
        .with_context(|| format!("dims must look like lo..hi, got {spec:?}"))?;
    let lo: usize = lo.trim().parse()?;
    let hi: usize = hi.trim().trim_start_matches('=').parse()?;
    if lo == 0 || lo > hi {
        bail!("dims range {spec:?} must satisfy 1 <= lo <= hi");
    }
    Ok(std::iter::successors(Some(lo), |d| Some(d * 2)).take_while(|&d| d <= hi).collect())
}

fn diag_variance(dims: &str, sigma: f64, samples: usize, seed: u64) -> anyhow::Result<()> {
    let dims = parse_dims(dims)?;
    let mut rng = seeded_rng(seed);
    let mut means = Vec::with_capacity(dims.len());
    println!("d,mean_norm,stderr,closed_form_at_zero");
    for &d in &dims {
        let diag = gradient_variance_diag(sigma, &Vector::zeros(d), samples, &mut rng)?;
        println!(
            "{d},{:.6e},{:.3e},{:.6e}",
            diag.grad_norm.mean,
            diag.grad_norm.stderr,
            sigma * chi_third_moment(d)
        );
        means.push(diag.grad_norm.mean);
    }
    if dims.len() > 1 {
        let xs: Vec<f64> = dims.iter().map(|&d| d as f64).collect();
        eprintln!("log-log slope = {:.4}", bench::loglog_slope(&xs, &means));
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Solve { instance } => solve(&instance),
        Command::Identify {
            instance,
            episodes,
            excitation,
            seed,
            bootstrap,
            confidence,
        } => identify(&instance, episodes, excitation, seed, bootstrap, confidence),
        Command::Bench { spec, out, seed_base } => bench_cmd(&spec, &out, seed_base),
        Command::Plot { results, metric, out } => plot(&results, metric, &out),
        Command::Diag {
            which: Diag::Variance {
                dims,
                sigma,
                samples,
                seed,
            },
        } => diag_variance(&dims, sigma, samples, seed),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let config = matches!(
                err.downcast_ref::<Error>(),
                Some(Error::Config(_) | Error::Json(_) | Error::Dimension(_) | Error::Contract(_))
            );
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}
