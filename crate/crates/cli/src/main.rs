//! Command-line entry point: one subcommand per experiment, each with a
//! reproducible configuration, CSV/JSON outputs, and a deterministic run
//! manifest.
//!
//! Exit status: 0 when all checks pass, 1 when a check fails (the failing
//! check is named on stderr), 2 when the configuration does not parse.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CmdError;
use homnl_core::bloch::WaveComparisonConfig;
use output::RunContext;

/// Alphabetized experiment catalog with section tags.
const CATALOG: &[(&str, &str)] = &[
    ("ac", "4.3"),
    ("bloch", "2.3"),
    ("cell", "1.2"),
    ("homog1d", "1.2"),
    ("lattice", "3.3"),
    ("mz", "3.5"),
    ("schur-lod", "3.1"),
    ("symbol", "2.2"),
    ("tartar", "2.1"),
    ("wave-compare", "2.3"),
];

#[derive(Parser)]
#[command(name = "homnl", version, about = "Effective-medium and coarse-graining experiments")]
struct Cli {
    /// Directory for data files and the run manifest.
    #[arg(long, default_value = "out", global = true)]
    out_dir: PathBuf,
    /// Seed for randomized sweeps (recorded in the manifest).
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the experiment catalog with section tags.
    List,
    /// Oscillatory two-point problems and the harmonic-mean limit.
    Homog1d {
        /// Coefficient: `const:<v>`, `two:<a>,<b>[@split]`, or `file:<path>`.
        #[arg(long, default_value = "two:1,2")]
        profile: String,
        /// Comma-separated oscillation scales.
        #[arg(long, default_value = "0.125,0.0625,0.03125,0.015625,0.0078125")]
        eps_list: String,
        /// Output / norm grid nodes.
        #[arg(long, default_value_t = 2049)]
        grid_n: usize,
    },
    /// Periodic cell problems and the effective tensor.
    Cell {
        /// Coefficient field: identity, or a profile spec (used directly
        /// in 1D, as the laminate diag(a(x), a(x)) in 2D).
        #[arg(long, default_value = "two:1,2")]
        coefficient: String,
        /// Cell dimension (1 or 2).
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 16)]
        start_mesh: usize,
        /// Mesh-convergence tolerance on the tensor.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Weak limits of oscillatory decay and their memory equations.
    Tartar {
        /// Atomic rate measure, weight@rate pairs.
        #[arg(long, default_value = "0.5@1,0.5@2")]
        atoms: String,
        #[arg(long, default_value_t = 5.0)]
        t_final: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Homogenized Fourier symbol and non-polynomiality certificate.
    Symbol {
        /// The two-valued profile takes values +/- this contrast (< 1).
        #[arg(long, default_value_t = 0.5)]
        contrast: f64,
        #[arg(long, default_value_t = 10.0)]
        k_max: f64,
        #[arg(long, default_value_t = 201)]
        k_count: usize,
        /// Max polynomial degree in k^2 for the certificate.
        #[arg(long, default_value_t = 6)]
        max_degree: usize,
        /// Series truncation order.
        #[arg(long, default_value_t = 12)]
        truncation: usize,
    },
    /// Band structure and kernel synthesis from the dispersion relation.
    Bloch {
        #[arg(long, default_value = "two:1,2")]
        profile: String,
        #[arg(long, default_value_t = 65)]
        k_count: usize,
        #[arg(long, default_value_t = 3)]
        n_modes: usize,
        #[arg(long, default_value_t = 64)]
        cell_mesh: usize,
        /// Mesh cap and tolerance for the band convergence loop.
        #[arg(long, default_value_t = 256)]
        max_mesh: usize,
        #[arg(long, default_value_t = 1e-6)]
        band_tol: f64,
        /// Transition band ends at this multiple of the zone edge.
        #[arg(long, default_value_t = 2.0)]
        k_cut_factor: f64,
        /// Amplitude window for bands exceeding 1.
        #[arg(long, default_value_t = 0.9)]
        window: f64,
        /// Transform grid spacing for the kernel synthesis.
        #[arg(long, default_value_t = 0.02)]
        dk: f64,
    },
    /// Resolved wave field versus local and nonlocal surrogates.
    WaveCompare {
        #[arg(long, default_value = "two:1,2")]
        profile: String,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Snapshot times.
        #[arg(long, default_value = "2,10,40")]
        times: String,
        /// Optional epsilon sweep for the surrogate-error order.
        #[arg(long)]
        sweep_eps: Option<String>,
        /// Fixed time for the sweep.
        #[arg(long, default_value_t = 10.0)]
        sweep_t: f64,
        #[arg(long, default_value_t = 4.0)]
        length: f64,
        #[arg(long, default_value_t = 32)]
        nodes_per_period: usize,
        #[arg(long, default_value_t = 5.0)]
        sigma_k: f64,
    },
    /// Coarse problems by elimination and by correctors, with decay
    /// profiling.
    SchurLod {
        /// Fine dimension of the random SPD instances.
        #[arg(long, default_value_t = 64)]
        size: usize,
        /// Coarse rank of the random instances.
        #[arg(long, default_value_t = 8)]
        rank: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Two-scale coefficient for the decay profile.
        #[arg(long, default_value = "two:1,2")]
        profile: String,
        #[arg(long, default_value_t = 255)]
        fine_n: usize,
        #[arg(long, default_value_t = 15)]
        coarse_n: usize,
        /// Oscillation scale of the two-scale coefficient.
        #[arg(long, default_value_t = 0.0625)]
        eps_cell: f64,
    },
    /// Chain coarse-graining to a nonlocal kernel with diagnostics.
    Lattice {
        #[arg(long, default_value_t = 1.0)]
        k1: f64,
        #[arg(long, default_value_t = 0.1)]
        k2: f64,
        /// Coarsening factors.
        #[arg(long, default_value = "2,4,8")]
        m_list: String,
        #[arg(long, default_value_t = 4096)]
        atoms: usize,
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
    },
    /// Rank-one reduction of a linear system: kernel, correlation,
    /// localization.
    Mz {
        /// Generator: `two-rate`, `oscillator`, or `file:<path>`.
        #[arg(long, default_value = "two-rate")]
        generator: String,
        /// Observable direction (defaults to all ones).
        #[arg(long, default_value = "")]
        observable: String,
        /// Inner-product weights (defaults to Euclidean).
        #[arg(long)]
        weights: Option<String>,
        #[arg(long, default_value_t = 5.0)]
        t_final: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Exponential modes for the localization step (0 to skip).
        #[arg(long, default_value_t = 1)]
        modes: usize,
    },
    /// Nonlocal diffusion with volume constraints and the joint-limit
    /// diagram.
    Ac {
        /// Kernel: `gaussian:<std>` or `file:<kernel.csv from bloch>`.
        #[arg(long, default_value = "gaussian:1")]
        kernel: String,
        #[arg(long, default_value = "0.125,0.0625,0.03125,0.015625")]
        eps_list: String,
        /// Use the manufactured local-limit solution as reference.
        #[arg(long, default_value_t = true)]
        manufactured: bool,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("HOMNL_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => homnl_core::par::configure_workers(n),
            _ => {
                eprintln!("error: HOMNL_THREADS must be a positive integer, got `{threads}`");
                return ExitCode::from(2);
            }
        }
    }

    let cli = Cli::parse();
    let out_dir = cli.out_dir.clone();
    let seed = cli.seed;

    let result = match &cli.command {
        Command::List => {
            for (name, section) in CATALOG {
                println!("{name:<14} {section}");
            }
            Ok(0)
        }
        Command::Homog1d { profile, eps_list, grid_n } => {
            let config = serde_json::json!({
                "profile": profile, "eps_list": eps_list, "grid_n": grid_n,
            });
            let ctx = RunContext::new(out_dir, "homog1d", "1.2", seed, config);
            commands::homog1d(ctx, profile, eps_list, *grid_n)
        }
        Command::Cell { coefficient, dim, start_mesh, tol } => {
            let config = serde_json::json!({
                "coefficient": coefficient, "dim": dim, "start_mesh": start_mesh, "tol": tol,
            });
            let ctx = RunContext::new(out_dir, "cell", "1.2", seed, config);
            commands::cell(ctx, coefficient, *dim, *start_mesh, *tol)
        }
        Command::Tartar { atoms, t_final, dt } => {
            let config = serde_json::json!({ "atoms": atoms, "t_final": t_final, "dt": dt });
            let ctx = RunContext::new(out_dir, "tartar", "2.1", seed, config);
            commands::tartar(ctx, atoms, *t_final, *dt)
        }
        Command::Symbol { contrast, k_max, k_count, max_degree, truncation } => {
            let config = serde_json::json!({
                "contrast": contrast, "k_max": k_max, "k_count": k_count,
                "max_degree": max_degree, "truncation": truncation,
            });
            let ctx = RunContext::new(out_dir, "symbol", "2.2", seed, config);
            commands::symbol(ctx, *contrast, *k_max, *k_count, *max_degree, *truncation)
        }
        Command::Bloch {
            profile,
            k_count,
            n_modes,
            cell_mesh,
            max_mesh,
            band_tol,
            k_cut_factor,
            window,
            dk,
        } => {
            let config = serde_json::json!({
                "profile": profile, "k_count": k_count, "n_modes": n_modes,
                "cell_mesh": cell_mesh, "max_mesh": max_mesh, "band_tol": band_tol,
                "k_cut_factor": k_cut_factor, "window": window, "dk": dk,
            });
            let ctx = RunContext::new(out_dir, "bloch", "2.3", seed, config);
            commands::bloch(
                ctx, profile, *k_count, *n_modes, *cell_mesh, *max_mesh, *band_tol,
                *k_cut_factor, *window, *dk,
            )
        }
        Command::WaveCompare {
            profile,
            epsilon,
            times,
            sweep_eps,
            sweep_t,
            length,
            nodes_per_period,
            sigma_k,
        } => {
            let config = serde_json::json!({
                "profile": profile, "epsilon": epsilon, "times": times,
                "sweep_eps": sweep_eps, "sweep_t": sweep_t, "length": length,
                "nodes_per_period": nodes_per_period, "sigma_k": sigma_k,
            });
            let wave_config = WaveComparisonConfig {
                length: *length,
                nodes_per_period: *nodes_per_period,
                sigma_k: *sigma_k,
                ..Default::default()
            };
            let ctx = RunContext::new(out_dir, "wave-compare", "2.3", seed, config);
            commands::wave_compare(
                ctx,
                profile,
                *epsilon,
                times,
                sweep_eps.as_deref(),
                *sweep_t,
                wave_config,
            )
        }
        Command::SchurLod { size, rank, trials, profile, fine_n, coarse_n, eps_cell } => {
            let config = serde_json::json!({
                "size": size, "rank": rank, "trials": trials, "profile": profile,
                "fine_n": fine_n, "coarse_n": coarse_n, "eps_cell": eps_cell,
            });
            let ctx = RunContext::new(out_dir, "schur-lod", "3.1", seed, config);
            commands::schur_lod(
                ctx, *size, *rank, *trials, seed, profile, *fine_n, *coarse_n, *eps_cell,
            )
        }
        Command::Lattice { k1, k2, m_list, atoms, spacing } => {
            let config = serde_json::json!({
                "k1": k1, "k2": k2, "m_list": m_list, "atoms": atoms, "spacing": spacing,
            });
            let ctx = RunContext::new(out_dir, "lattice", "3.3", seed, config);
            commands::lattice(ctx, *k1, *k2, m_list, *atoms, *spacing)
        }
        Command::Mz { generator, observable, weights, t_final, dt, modes } => {
            let config = serde_json::json!({
                "generator": generator, "observable": observable, "weights": weights,
                "t_final": t_final, "dt": dt, "modes": modes,
            });
            let ctx = RunContext::new(out_dir, "mz", "3.5", seed, config);
            commands::mz(ctx, generator, observable, weights.as_deref(), *t_final, *dt, *modes)
        }
        Command::Ac { kernel, eps_list, manufactured } => {
            let config = serde_json::json!({
                "kernel": kernel, "eps_list": eps_list, "manufactured": manufactured,
            });
            let ctx = RunContext::new(out_dir, "ac", "4.3", seed, config);
            commands::ac(ctx, kernel, eps_list, *manufactured)
        }
    };

    match result {
        Ok(code) => ExitCode::from(code),
        Err(CmdError::Setup(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CmdError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
