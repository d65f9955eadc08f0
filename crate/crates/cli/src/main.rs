//! `clb` — command-line driver for the Carleman lattice Boltzmann toolkit.
//!
//! Subcommands reproduce the toolkit's standard experiments as CSV data
//! files: direct LBM runs, CLB-versus-LBM error curves, the tensor-Pauli
//! expansion of the single-site relaxation matrix, block-encoding circuit
//! exports with gate-count tables, success-probability sweeps and the
//! logistic-equation ladder. Exit codes: 0 success, 2 invalid configuration,
//! 3 resource cap exceeded.

mod config;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand};
use clb_core::carleman::{compare_to_lbm, single_site_relaxation, CarlemanSystem, ErrorMetric};
use clb_core::circuit::gate_report;
use clb_core::lattice::{make_model, LatticeModel, ModelKind};
use clb_core::lbm::{
    kolmogorov_init_perturbed, lbm_step, reynolds_report, write_snapshot_csv, DistributionField,
};
use clb_core::logistic::{logistic_carleman, logistic_reference};
use clb_core::oracles::{assemble_block_encoding, streaming_circuit};
use clb_core::pauli::{truncation_curve, write_expansion_csv};
use clb_core::qsim::{
    success_probability_sim, sweep_omega, InitKind, MAX_SIM_QUBITS,
};
use clb_core::RegisterLayout;
use config::{path_with_suffix, write_atomic, ConfigMap, GridSpec, OmegaSpec};
use rand::prelude::*;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "clb",
    about = "Carleman lattice Boltzmann emulation and block-encoding circuits",
    version
)]
struct Cli {
    /// Optional flat key=value config file; explicit flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the classical LBM and export the final field snapshot.
    LbmRun(LbmRunArgs),
    /// Compare the truncated Carleman evolution against direct LBM.
    CarlemanCompare(CompareArgs),
    /// Expand the single-site relaxation matrix over tensor-Pauli words.
    Pauli(PauliArgs),
    /// Export block-encoding and streaming circuits with gate-count tables.
    BuildCircuit(BuildCircuitArgs),
    /// Sweep the post-selection success probability over omega.
    SuccessSweep(SweepArgs),
    /// Integrate the logistic-equation Carleman ladder.
    Logistic(LogisticArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<clb_core::Error>() {
        Some(clb_core::Error::ResourceCap { .. }) => 3,
        Some(clb_core::Error::Io(_)) => 1,
        Some(_) => 2,
        None => 2,
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = ConfigMap::load(cli.config.as_deref())?;
    match cli.command {
        Command::LbmRun(args) => cmd_lbm_run(args, &cfg),
        Command::CarlemanCompare(args) => cmd_carleman_compare(args, &cfg),
        Command::Pauli(args) => cmd_pauli(args, &cfg),
        Command::BuildCircuit(args) => cmd_build_circuit(args, &cfg),
        Command::SuccessSweep(args) => cmd_success_sweep(args, &cfg),
        Command::Logistic(args) => cmd_logistic(args, &cfg),
    }
}

fn parse_model(cfg: &ConfigMap, flag: Option<ModelKind>) -> Result<LatticeModel> {
    let kind: ModelKind = cfg.require(flag, "model")?;
    Ok(make_model(kind))
}

// ---------------------------------------------------------------------------
// lbm-run
// ---------------------------------------------------------------------------

#[derive(Args)]
struct LbmRunArgs {
    /// Lattice model: D1Q3, D2Q9 or D3Q27.
    #[arg(long)]
    model: Option<ModelKind>,
    /// Grid dimensions, e.g. 16x16.
    #[arg(long)]
    grid: Option<GridSpec>,
    /// Relaxation rate.
    #[arg(long)]
    omega: Option<f64>,
    /// Peak flow speed U.
    #[arg(long)]
    speed: Option<f64>,
    /// Shear wavenumber k.
    #[arg(long)]
    wavenumber: Option<u32>,
    /// Transverse seed amplitude (fraction of U) for the Kolmogorov profile.
    #[arg(long)]
    transverse: Option<f64>,
    /// Number of timesteps.
    #[arg(long)]
    steps: Option<usize>,
    /// Initial condition: kolmogorov, uniform or random.
    #[arg(long)]
    init: Option<String>,
    /// RNG seed for the random initial condition.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_lbm_run(args: LbmRunArgs, cfg: &ConfigMap) -> Result<()> {
    let model = parse_model(cfg, args.model)?;
    let grid = cfg.require(args.grid, "grid")?.0;
    let omega: f64 = cfg.require(args.omega, "omega")?;
    let speed: f64 = cfg.resolve(args.speed, "speed", 0.1)?;
    let wavenumber: u32 = cfg.resolve(args.wavenumber, "wavenumber", 1)?;
    let transverse: f64 = cfg.resolve(args.transverse, "transverse", 0.0)?;
    let steps: usize = cfg.resolve(args.steps, "steps", 100)?;
    let init = cfg.resolve(args.init.clone(), "init", "kolmogorov".to_string())?;
    let seed: u64 = cfg.resolve(args.seed, "seed", 0)?;
    let out: PathBuf = cfg.require(args.out, "out")?;

    let mut field = match init.as_str() {
        "kolmogorov" => kolmogorov_init_perturbed(&grid, speed, wavenumber, transverse, &model)
            .map_err(anyhow::Error::from)?,
        "uniform" => {
            let n: usize = grid.iter().product();
            let values: Vec<f64> = (0..n).flat_map(|_| model.weights().to_vec()).collect();
            DistributionField::from_values(model.clone(), grid.clone(), values)?
        }
        "random" => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n: usize = grid.iter().product();
            let values: Vec<f64> = (0..n * model.velocity_count())
                .map(|_| rng.gen_range(0.5..1.5) / model.velocity_count() as f64)
                .collect();
            DistributionField::from_values(model.clone(), grid.clone(), values)?
        }
        other => bail!("unknown init `{other}` (expected kolmogorov, uniform or random)"),
    };

    let mass_before = field.total_mass();
    for _ in 0..steps {
        field = lbm_step(&field, omega)?;
    }
    let mass_after = field.total_mass();
    write_atomic(&out, |buf| {
        write_snapshot_csv(&field, buf)?;
        Ok(())
    })?;

    let macroscale = grid.iter().copied().max().unwrap_or(1) as f64;
    if omega > 0.0 && omega < 2.0 {
        let rep = reynolds_report(omega, speed, macroscale)?;
        println!(
            "omega={omega} nu={:.6} Re={:.4} L_k={:.4} (U={speed}, L={macroscale})",
            rep.viscosity, rep.reynolds, rep.kolmogorov_scale
        );
    }
    println!(
        "steps={steps} mass_drift={:.3e} out={}",
        ((mass_after - mass_before) / mass_before).abs(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// carleman-compare
// ---------------------------------------------------------------------------

#[derive(Args)]
struct CompareArgs {
    /// Lattice model (2D required).
    #[arg(long)]
    model: Option<ModelKind>,
    /// Grid dimensions, e.g. 16x16.
    #[arg(long)]
    grid: Option<GridSpec>,
    /// Relaxation rate(s): value, comma list or start:end:step.
    #[arg(long)]
    omega: Option<OmegaSpec>,
    /// Peak flow speed U.
    #[arg(long)]
    speed: Option<f64>,
    /// Shear wavenumber.
    #[arg(long)]
    wavenumber: Option<u32>,
    /// Transverse seed amplitude (fraction of U); 0 disables the coupling.
    #[arg(long)]
    transverse: Option<f64>,
    /// Number of timesteps.
    #[arg(long)]
    steps: Option<usize>,
    /// Error metric: population or velocity.
    #[arg(long)]
    metric: Option<String>,
    /// Output CSV path (suffix _w<omega> added when several omegas run).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_carleman_compare(args: CompareArgs, cfg: &ConfigMap) -> Result<()> {
    let model = parse_model(cfg, args.model)?;
    if model.dimension() != 2 {
        return Err(anyhow::Error::from(clb_core::Error::InvalidInput(
            "carleman-compare requires a 2D model".into(),
        )));
    }
    let grid = cfg.require(args.grid, "grid")?.0;
    let omegas = cfg.require(args.omega, "omega")?.0;
    let speed: f64 = cfg.resolve(args.speed, "speed", 0.1)?;
    let wavenumber: u32 = cfg.resolve(args.wavenumber, "wavenumber", 1)?;
    let transverse: f64 = cfg.resolve(args.transverse, "transverse", 1.0)?;
    let steps: usize = cfg.resolve(args.steps, "steps", 100)?;
    let metric = match cfg
        .resolve(args.metric.clone(), "metric", "population".to_string())?
        .as_str()
    {
        "population" => ErrorMetric::Population,
        "velocity" => ErrorMetric::Velocity,
        other => bail!("unknown metric `{other}` (expected population or velocity)"),
    };
    let out: PathBuf = cfg.require(args.out, "out")?;
    for &omega in &omegas {
        if !(0.0..2.0).contains(&omega) {
            return Err(anyhow::Error::from(clb_core::Error::InvalidInput(format!(
                "omega = {omega} outside [0, 2)"
            ))));
        }
    }

    let field0 = kolmogorov_init_perturbed(&grid, speed, wavenumber, transverse, &model)?;
    let macroscale = grid.iter().copied().max().unwrap_or(1) as f64;
    for &omega in &omegas {
        let outcome = compare_to_lbm(&field0, omega, steps, metric)?;
        let path = if omegas.len() > 1 {
            path_with_suffix(&out, &format!("_w{omega}"))
        } else {
            out.clone()
        };
        write_atomic(&path, |buf| {
            clb_core::carleman::write_error_csv(&outcome.steps, buf)?;
            Ok(())
        })?;
        let final_mean = outcome.steps.last().map_or(0.0, |s| s.mean);
        let reynolds = if omega > 0.0 {
            reynolds_report(omega, speed, macroscale)?.reynolds
        } else {
            0.0
        };
        println!(
            "omega={omega} Re={reynolds:.4} mean_eps_final={final_mean:.6e} \
             excluded_sites={} out={}",
            outcome.excluded_sites.len(),
            path.display()
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// pauli
// ---------------------------------------------------------------------------

#[derive(Args)]
struct PauliArgs {
    /// Lattice model.
    #[arg(long)]
    model: Option<ModelKind>,
    /// Relaxation rate (default 1.0).
    #[arg(long)]
    omega: Option<f64>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_pauli(args: PauliArgs, cfg: &ConfigMap) -> Result<()> {
    let model = parse_model(cfg, args.model)?;
    let omega: f64 = cfg.resolve(args.omega, "omega", 1.0)?;
    let out: PathBuf = cfg.require(args.out, "out")?;

    let r1 = single_site_relaxation(&model, omega)?;
    let report = truncation_curve(&r1)?;
    // harness-side re-check before anything is written
    if !report.distances.windows(2).all(|w| w[1] <= w[0]) {
        bail!("internal error: truncation distances are not non-increasing");
    }
    write_atomic(&out, |buf| {
        write_expansion_csv(&report, buf)?;
        Ok(())
    })?;
    println!(
        "model={} omega={omega} terms={} qubits={} final_distance={:.3e} out={}",
        model.kind(),
        report.terms.len(),
        report.n_qubits,
        report.distances.last().unwrap(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// build-circuit
// ---------------------------------------------------------------------------

#[derive(Args)]
struct BuildCircuitArgs {
    /// Lattice model (D1Q3 or D2Q9; D3Q27 has no circuit synthesis).
    #[arg(long)]
    model: Option<ModelKind>,
    /// Grid for the exported circuit instance, e.g. 4x2 (power-of-two axes).
    #[arg(long)]
    grid: Option<GridSpec>,
    /// Relaxation rate.
    #[arg(long)]
    omega: Option<f64>,
    /// Output path prefix; writes <prefix>.relaxation.txt/.json etc.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also emit gate-count tables for total position widths q_N, e.g. 2..6.
    #[arg(long)]
    qn_range: Option<String>,
}

fn qn_grid(dimension: usize, q: usize) -> Vec<usize> {
    match dimension {
        1 => vec![1 << q],
        _ => {
            let hi = q.div_ceil(2);
            let lo = q / 2;
            vec![1 << hi, 1 << lo]
        }
    }
}

fn counts_csv(rows: &[(usize, clb_core::GateCountReport)]) -> String {
    let mut text = String::from("q_N,kind,count,two_qubit_estimate\n");
    for (q, report) in rows {
        for (kind, count) in &report.per_kind {
            let tq = report.per_kind_two_qubit.get(kind).copied().unwrap_or(0);
            writeln!(text, "{q},{kind},{count},{tq}").unwrap();
        }
        writeln!(text, "{q},all,{},{}", report.total, report.two_qubit_estimate).unwrap();
    }
    text
}

fn cmd_build_circuit(args: BuildCircuitArgs, cfg: &ConfigMap) -> Result<()> {
    let model = parse_model(cfg, args.model)?;
    let omega: f64 = cfg.resolve(args.omega, "omega", 1.0)?;
    let out: PathBuf = cfg.require(args.out, "out")?;
    let grid = cfg.require(args.grid, "grid")?.0;
    let qn_range = cfg.resolve_opt(args.qn_range, "qn_range")?;

    let range: Option<(usize, usize)> = match qn_range {
        None => None,
        Some(text) => {
            let (a, b) = text
                .split_once("..")
                .ok_or_else(|| anyhow!("qn-range must look like 2..6"))?;
            let lo: usize = a.trim().parse()?;
            let hi: usize = b.trim().parse()?;
            if lo > hi {
                return Err(anyhow::Error::from(clb_core::Error::InvalidInput(
                    "empty q_N range".into(),
                )));
            }
            Some((lo, hi))
        }
    };

    let system = CarlemanSystem::new(&model, omega, &grid)?;
    let relaxation = assemble_block_encoding(&system)?;
    let streaming = streaming_circuit(&model, &grid)?;
    for (circ, tag) in [(&relaxation, "relaxation"), (&streaming, "streaming")] {
        let txt = PathBuf::from(format!("{}.{tag}.txt", out.display()));
        write_atomic(&txt, |buf| {
            circ.write_text(buf)?;
            Ok(())
        })?;
        let json = PathBuf::from(format!("{}.{tag}.json", out.display()));
        write_atomic(&json, |buf| {
            circ.write_json(buf)?;
            Ok(())
        })?;
    }
    println!(
        "model={} omega={omega} grid={grid:?} qubits={} relaxation_gates={} streaming_gates={}",
        model.kind(),
        relaxation.n_qubits(),
        relaxation.gates.len(),
        streaming.gates.len()
    );

    if let Some((lo, hi)) = range {
        let mut relax_rows = Vec::new();
        let mut stream_rows = Vec::new();
        for q in lo..=hi {
            let dims = qn_grid(model.dimension(), q);
            let system = CarlemanSystem::new(&model, omega, &dims)?;
            relax_rows.push((q, gate_report(&assemble_block_encoding(&system)?)));
            stream_rows.push((q, gate_report(&streaming_circuit(&model, &dims)?)));
        }
        for (rows, tag) in [(&relax_rows, "relaxation"), (&stream_rows, "streaming")] {
            let path = PathBuf::from(format!("{}.{tag}_counts.csv", out.display()));
            write_atomic(&path, |buf| {
                buf.write_all(counts_csv(rows).as_bytes())?;
                Ok(())
            })?;
            println!("counts[{tag}]={path}", path = path.display());
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// success-sweep
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SweepArgs {
    /// Lattice model.
    #[arg(long)]
    model: Option<ModelKind>,
    /// Number of lattice sites (analytic path).
    #[arg(long)]
    sites: Option<usize>,
    /// Grid for the simulated path (power-of-two axes).
    #[arg(long)]
    grid: Option<GridSpec>,
    /// Initial profile: uniform or equilibrium.
    #[arg(long)]
    init: Option<InitKind>,
    /// Omega grid: value, comma list or start:end:step.
    #[arg(long)]
    omega: Option<OmegaSpec>,
    /// Simulate each point by statevector evolution where the qubit budget
    /// permits (falls back to the analytic value with a warning).
    #[arg(long)]
    simulate: bool,
    /// Statevector qubit budget for --simulate.
    #[arg(long)]
    qubit_budget: Option<usize>,
    /// Debug: dump the final simulated statevector as index,re,im CSV.
    #[arg(long)]
    dump_state: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_success_sweep(args: SweepArgs, cfg: &ConfigMap) -> Result<()> {
    let model = parse_model(cfg, args.model)?;
    let init: InitKind = cfg.resolve(args.init, "init", InitKind::Uniform)?;
    let omegas = cfg.require(args.omega, "omega")?.0;
    let out: PathBuf = cfg.require(args.out, "out")?;
    let budget: usize = cfg.resolve(args.qubit_budget, "qubit_budget", MAX_SIM_QUBITS)?;
    let grid = cfg.resolve_opt(args.grid, "grid")?.map(|g| g.0);
    let sites: usize = match (cfg.resolve_opt(args.sites, "sites")?, &grid) {
        (Some(n), _) => n,
        (None, Some(g)) => g.iter().product(),
        (None, None) => bail!("missing required parameter `sites` (or `grid`)"),
    };
    for &omega in &omegas {
        if !(omega > 0.0 && omega <= 2.0) {
            return Err(anyhow::Error::from(clb_core::Error::InvalidInput(format!(
                "omega = {omega} outside (0, 2]"
            ))));
        }
    }

    let curve = sweep_omega(&model, sites, init, &omegas)?;
    let mut methods = vec!["analytic"; omegas.len()];
    let mut probabilities = curve.probabilities.clone();

    if args.simulate {
        let grid = grid.ok_or_else(|| anyhow!("--simulate needs --grid"))?;
        let feasible = RegisterLayout::clb(&model, &grid, false)
            .map(|l| l.total_qubits() <= budget && model.kind() != ModelKind::D3Q27)
            .unwrap_or(false);
        if !feasible {
            log::warn!(
                "simulation beyond the {budget}-qubit budget; keeping analytic values"
            );
            println!("# warning: simulation infeasible for grid {grid:?}; analytic values kept");
        } else {
            let phi = init.profile(&model);
            let n: usize = grid.iter().product();
            let values: Vec<f64> = (0..n).flat_map(|_| phi.clone()).collect();
            let field = DistributionField::from_values(model.clone(), grid.clone(), values)?;
            for (i, &omega) in omegas.iter().enumerate() {
                let system = CarlemanSystem::new(&model, omega, &grid)?;
                let circuit = assemble_block_encoding(&system)?;
                probabilities[i] = success_probability_sim(&circuit, &field, omega)?;
                methods[i] = "simulated";
            }
            if let Some(dump) = cfg.resolve_opt(args.dump_state, "dump_state")? {
                let omega = *omegas.last().unwrap();
                let system = CarlemanSystem::new(&model, omega, &grid)?;
                let circuit = assemble_block_encoding(&system)?;
                let (encoded, _) =
                    clb_core::qsim::encode_carleman_state(&clb_core::carleman::lift(&field), &circuit.layout)?;
                let evolved = clb_core::qsim::apply(&circuit, &encoded)?;
                write_atomic(&dump, |buf| {
                    clb_core::qsim::write_state_csv(&evolved, buf)?;
                    Ok(())
                })?;
                println!("# state dump (omega={omega}): {}", dump.display());
            }
        }
    }

    write_atomic(&out, |buf| {
        writeln!(buf, "omega,p_s,init_kind,n_sites,method")?;
        for ((w, p), method) in omegas.iter().zip(&probabilities).zip(&methods) {
            writeln!(buf, "{w},{p:.16e},{},{sites},{method}", init.name())?;
        }
        Ok(())
    })?;
    let (argmax, peak) = omegas
        .iter()
        .zip(&probabilities)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(w, p)| (*w, *p))
        .unwrap();
    println!(
        "model={} init={} sites={sites} points={} argmax_omega={argmax} peak={peak:.6e} out={}",
        model.kind(),
        init.name(),
        omegas.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// logistic
// ---------------------------------------------------------------------------

#[derive(Args)]
struct LogisticArgs {
    /// Initial value u(0).
    #[arg(long)]
    u0: Option<f64>,
    /// Nonlinearity strength R.
    #[arg(long)]
    nonlinearity: Option<f64>,
    /// Largest truncation order; columns cover K = 1 ..= kmax.
    #[arg(long)]
    kmax: Option<usize>,
    /// Final time.
    #[arg(long)]
    tmax: Option<f64>,
    /// Euler step of the ladder integration.
    #[arg(long)]
    dt: Option<f64>,
    /// Fine step of the reference integration.
    #[arg(long)]
    dt_ref: Option<f64>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_logistic(args: LogisticArgs, cfg: &ConfigMap) -> Result<()> {
    let u0: f64 = cfg.require(args.u0, "u0")?;
    let nonlinearity: f64 = cfg.resolve(args.nonlinearity, "nonlinearity", 0.0)?;
    let kmax: usize = cfg.resolve(args.kmax, "kmax", 5)?;
    let tmax: f64 = cfg.resolve(args.tmax, "tmax", 1.0)?;
    let dt: f64 = cfg.resolve(args.dt, "dt", 1e-3)?;
    let dt_ref: f64 = cfg.resolve(args.dt_ref, "dt_ref", 1e-6)?;
    let out: PathBuf = cfg.require(args.out, "out")?;
    if kmax == 0 {
        return Err(anyhow::Error::from(clb_core::Error::InvalidInput(
            "kmax must be at least 1".into(),
        )));
    }

    let ladders: Vec<_> = (1..=kmax)
        .map(|k| logistic_carleman(u0, nonlinearity, k, tmax, dt))
        .collect::<clb_core::Result<_>>()?;
    let reference = logistic_reference(u0, nonlinearity, tmax, dt, dt_ref)?;

    write_atomic(&out, |buf| {
        let mut header = String::from("t");
        for k in 1..=kmax {
            write!(header, ",u1_K{k}").unwrap();
        }
        header.push_str(",u_ref");
        writeln!(buf, "{header}")?;
        for (i, r) in reference.iter().enumerate() {
            write!(buf, "{:.16e}", i as f64 * dt)?;
            for ladder in &ladders {
                write!(buf, ",{:.16e}", ladder.trajectory[i])?;
            }
            writeln!(buf, ",{r:.16e}")?;
        }
        Ok(())
    })?;
    let errors: Vec<f64> = ladders
        .iter()
        .map(|l| (l.final_value() - reference.last().unwrap()).abs())
        .collect();
    println!(
        "u0={u0} R={nonlinearity} tmax={tmax} final_errors={errors:?} out={}",
        out.display()
    );
    Ok(())
}
