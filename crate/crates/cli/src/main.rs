//! Command-line driver: load a JSON experiment config, then run the
//! simulation, validate the config, or dump propagation-path / covariance
//! diagnostics.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mmrelay_core::channel::{cluster_cov, cluster_spatial_cov, temporal_cov};
use mmrelay_core::config::FileConfig;
use mmrelay_core::harness::{export, Experiment};
use mmrelay_core::linalg::Matrix;
use mmrelay_core::prediction::prior_pair;
use mmrelay_core::selection::{csi_overhead, Policy};
use mmrelay_core::topology::Side;
use mmrelay_core::Error;

#[derive(Parser)]
#[command(name = "mmrelay", version, about = "Urban mmWave two-hop relay network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write CSV/JSON outputs.
    Run(RunArgs),
    /// Parse and validate a config, reporting the derived structure.
    Validate(ConfigArg),
    /// Dump every cluster's propagation paths and the overhead counters.
    Paths(ConfigArg),
    /// Dump the channel covariance matrices and their minimum eigenvalues.
    Kernels(ConfigArg),
}

#[derive(Args)]
struct ConfigArg {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Override the number of Monte Carlo trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of SAA scenarios.
    #[arg(long)]
    scenarios: Option<usize>,
    /// Override the policy list (comma separated).
    #[arg(long)]
    policies: Option<String>,
    /// Override the conditioning window (0 = unbounded).
    #[arg(long)]
    window: Option<usize>,
    /// Output directory for the result files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Validate(args) => validate(&args.config),
        Command::Paths(args) => paths(&args.config),
        Command::Kernels(args) => kernels(&args.config),
    }
}

fn load(path: &PathBuf) -> Result<FileConfig, Error> {
    FileConfig::load(path)
}

fn run(args: RunArgs) -> Result<(), Error> {
    let mut cfg = load(&args.config.config)?;
    if let Some(trials) = args.trials {
        cfg.experiment.trials = trials;
    }
    if let Some(seed) = args.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(scenarios) = args.scenarios {
        cfg.experiment.scenarios = scenarios;
    }
    if let Some(window) = args.window {
        cfg.experiment.window = window;
    }
    if let Some(list) = args.policies {
        cfg.experiment.policies = list
            .split(',')
            .map(|s| s.trim().parse::<Policy>())
            .collect::<Result<Vec<_>, _>>()?;
    }
    cfg.validate()?;
    let experiment = Experiment::<f64>::new(cfg)?;
    eprintln!(
        "running {} trials x {} slots, {} policies, {} clusters (seed {})",
        experiment.file.experiment.trials,
        experiment.params.n_t,
        experiment.file.experiment.policies.len(),
        experiment.network.n_clusters(),
        experiment.file.experiment.seed,
    );
    let stats = experiment.run_experiment()?;
    let files = export(&stats, &experiment.file, &args.out)?;
    for (pi, policy) in stats.policies.iter().enumerate() {
        eprintln!(
            "  {policy}: grand mean SINR {:.3} dB, {} channel estimates/slot",
            stats.grand_mean_db[pi], stats.overhead_per_slot[pi]
        );
    }
    for f in &files {
        println!("{}", f.display());
    }
    Ok(())
}

fn validate(path: &PathBuf) -> Result<(), Error> {
    let cfg = load(path)?;
    let experiment = Experiment::<f64>::new(cfg)?;
    println!(
        "ok: {} intersections, {} segments, {} clusters, {} unique cluster-free segments",
        experiment.graph.intersections().len(),
        experiment.graph.segments().len(),
        experiment.network.n_clusters(),
        experiment.network.segment_union.len(),
    );
    Ok(())
}

fn paths(path: &PathBuf) -> Result<(), Error> {
    let cfg = load(path)?;
    let experiment = Experiment::<f64>::new(cfg)?;
    let net = &experiment.network;
    let graph = &experiment.graph;
    for c in &net.clusters {
        println!(
            "cluster {} on segment {} (delta {}, d_max {}):",
            c.placement.id, c.placement.segment, c.placement.delta, c.placement.d_max
        );
        for (label, side) in [("incoming", Side::Incoming), ("outgoing", Side::Outgoing)] {
            let sp = c.side(side);
            println!("  {label}: entry intersection {}, {} path(s)", sp.entry, sp.routes.len());
            for r in &sp.routes {
                println!(
                    "    segments {:?} los {} nlos {:?} n_between {} n_total {} route_length {}",
                    r.segments,
                    r.los,
                    r.nlos,
                    r.n_intersections,
                    r.n_intersections + 1,
                    r.length
                );
            }
            let terminal = if side == Side::Incoming { &net.source } else { &net.destination };
            let entry_loc = entry_location(graph, sp.entry)?;
            let l1 = graph.l1_distance(terminal, &entry_loc)?;
            println!("    unique segments {:?}; min along-street distance {}", sp.union, l1);
            for r in &sp.routes {
                if (r.length - l1).abs() > 1e-9 * (1.0 + l1) {
                    return Err(Error::Validation(format!(
                        "path length {} does not match minimum distance {l1}",
                        r.length
                    )));
                }
            }
        }
    }
    println!(
        "networkwide unique cluster-free segments: {} -> {:?}",
        net.segment_union.len(),
        net.segment_union
    );
    println!("csi overhead per slot: ideal {} proposed {}",
        csi_overhead(Policy::Ideal, net),
        csi_overhead(Policy::Saa, net));
    Ok(())
}

fn entry_location(
    graph: &mmrelay_core::Graph,
    node: u32,
) -> Result<mmrelay_core::topology::NodeLocation<f64>, Error> {
    let seg = graph
        .segments()
        .iter()
        .find(|s| s.a == node || s.b == node)
        .ok_or_else(|| Error::Validation(format!("intersection {node} has no segment")))?;
    Ok(mmrelay_core::topology::NodeLocation {
        segment: seg.id,
        offset: if seg.a == node { 0.0 } else { seg.length },
    })
}

fn kernels(path: &PathBuf) -> Result<(), Error> {
    let cfg = load(path)?;
    let experiment = Experiment::<f64>::new(cfg)?;
    let p = &experiment.params;
    let sigma_tau = temporal_cov(p.n_t, p.eta2, p.gamma, p.sigma_xi2);
    println!("sigma_tau ({0}x{0}), per cluster-free segment:", p.n_t);
    print_matrix(&sigma_tau);
    println!("sigma_tau min eigenvalue: {:.6e}", sigma_tau.min_eigenvalue_symmetric());
    println!("multipath term sigma_xi2 = {} (already on the diagonal above)", p.sigma_xi2);
    for c in &experiment.network.clusters {
        let geom = &c.geometry;
        let k = cluster_spatial_cov(geom, p);
        let kbar = prior_pair(geom, p);
        println!("cluster {}: spatial K ({}x{}), no multipath term:", c.placement.id, k.rows(), k.cols());
        print_matrix(&k);
        println!("cluster {} K min eigenvalue: {:.6e}", c.placement.id, k.min_eigenvalue_symmetric());
        println!(
            "cluster {} prior pair K_bar: [[{}, {}], [{}, {}]] (diagonal includes sigma_xi2)",
            c.placement.id, kbar[0][0], kbar[0][1], kbar[1][0], kbar[1][1]
        );
        if c.placement.delta * p.n_t <= 64 {
            let full = cluster_cov(geom, p);
            println!(
                "cluster {} full space-time covariance ({}x{}) min eigenvalue: {:.6e}",
                c.placement.id,
                full.rows(),
                full.cols(),
                full.min_eigenvalue_symmetric()
            );
        }
    }
    Ok(())
}

fn print_matrix(m: &Matrix<f64>) {
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| format!("{:.6}", m[(i, j)])).collect();
        println!("  {}", row.join(" "));
    }
}
