use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use photherm_core::config::parse_override;
use photherm_core::integrate::Method;
use photherm_core::pipeline::{resolve_params, run_pipeline, RunManifest, Stage};
use photherm_core::Scale;

#[derive(Parser)]
#[command(name = "photherm", version, about = "Thermal emission from a 1D photonic crystal with pumped two-level atoms")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML file of parameter values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Parameter override `key=value`; repeatable, applied last.
    #[arg(long = "param", global = true, value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Regime preset: eq-strong, eq-weak, eq-lossy or noneq.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true, default_value = "reduced")]
    scale: Scale,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Mode-set cache directory [default: <out-dir>/cache].
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct DynamicsArgs {
    /// Final time, s.
    #[arg(long, default_value_t = 1e-7)]
    t_end: f64,
    #[arg(long, default_value = "exponential-diagonal")]
    method: Method,
    #[arg(long, default_value_t = 1e-6)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    atol: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-cavity eigenmodes.
    Modes,
    /// Band structure and gaps of the mode set.
    Bands,
    /// Integrate the rate equations from the empty state.
    Dynamics(DynamicsArgs),
    /// Steady state by Newton-Krylov.
    Steady {
        /// Trajectory CSV whose last row seeds the solve.
        #[arg(long)]
        seed_from: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Detector spectrum of a photon state.
    Spectrum {
        /// Photon CSV (omega, N, gamma); the steady state is computed when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Detector resolution, rad/s.
        #[arg(long)]
        gamma_d: Option<f64>,
        /// Add the 1D blackbody curve.
        #[arg(long)]
        blackbody: bool,
        /// Add the ratio to the 1D blackbody curve.
        #[arg(long)]
        ratio: bool,
        #[arg(long, default_value_t = photherm_core::spectra::DETECTOR_SAMPLES)]
        samples: usize,
    },
    /// Run several stages, from a run manifest or a stage list.
    Pipeline {
        /// Run manifest (TOML); global parameter flags other than --param are ignored when given.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Comma-separated stages [default: all].
        #[arg(long, value_delimiter = ',')]
        stages: Vec<Stage>,
        #[command(flatten)]
        dynamics: DynamicsArgs,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let g = &cli.global;
    if g.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(g.threads).build_global().context("configuring thread pool")?;
    }
    let overrides = g.params.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;

    let mut manifest = match &cli.command {
        Command::Pipeline { manifest: Some(path), stages, .. } => {
            let mut m = RunManifest::load(path, &overrides)?;
            if !stages.is_empty() {
                m.stages = stages.clone();
            }
            m
        }
        _ => {
            let params = resolve_params(g.config.as_deref(), g.preset.as_deref(), &overrides, g.scale)?;
            let mut m = RunManifest::new(params, Vec::new(), "out");
            m.preset = g.preset.clone();
            m.scale = g.scale;
            m
        }
    };
    if let Some(dir) = &g.out_dir {
        manifest.out_dir = dir.clone();
    }
    if g.cache_dir.is_some() {
        manifest.cache_dir = g.cache_dir.clone();
    }

    let set_dynamics = |m: &mut RunManifest, d: &DynamicsArgs| {
        m.t_end = d.t_end;
        m.integrate.method = d.method;
        m.integrate.rtol = d.rtol;
        m.integrate.atol = d.atol;
    };
    match &cli.command {
        Command::Modes => manifest.stages = vec![Stage::Modes],
        Command::Bands => manifest.stages = vec![Stage::Bands],
        Command::Dynamics(d) => {
            manifest.stages = vec![Stage::Dynamics];
            set_dynamics(&mut manifest, d);
        }
        Command::Steady { seed_from, tol } => {
            manifest.stages = vec![Stage::Steady];
            manifest.seed_from = seed_from.clone();
            manifest.steady.tol = *tol;
        }
        Command::Spectrum { input, gamma_d, blackbody, ratio, samples } => {
            manifest.stages = vec![Stage::Spectrum];
            manifest.spectrum_input = input.clone();
            if let Some(gd) = gamma_d {
                if !(*gd > 0.0) {
                    bail!("--gamma-d must be positive");
                }
                manifest.params.gamma_d = *gd;
            }
            manifest.blackbody = *blackbody;
            manifest.ratio = *ratio;
            manifest.detector_samples = *samples;
        }
        Command::Pipeline { manifest: path, stages, dynamics } => {
            if path.is_none() {
                manifest.stages = if stages.is_empty() { Stage::ALL.to_vec() } else { stages.clone() };
                set_dynamics(&mut manifest, dynamics);
            }
        }
    }

    let outcome = run_pipeline(&mut manifest);
    for (k, v) in &manifest.metrics {
        println!("{k} = {v}");
    }
    outcome?;
    for p in &manifest.outputs {
        println!("wrote {}", manifest.out_dir.join(p).display());
    }
    Ok(())
}
