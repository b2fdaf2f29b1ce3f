use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use berryloop::avqite::avqite_run;
use berryloop::berry::principal_value;
use berryloop::ed::{wilson_loop_berry, DenseFamily, SectorSolver, DEFAULT_WILSON_GRID};
use berryloop::io::{
    execute, result_json, summary_csv, to_json_string, write_results, Format, RunConfig,
    RunOutput, SweepAxis, SweepSpec,
};
use berryloop::model::{
    build_sshh, ground_prep_reference, hamiltonian_pool, qubit_excitation_pool,
};
use berryloop::{Error, ModelParams};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_FLAGGED: u8 = 3;

/// Berry phases of the dimerized Hubbard chain from adaptive variational loops.
#[derive(Parser, Debug)]
#[command(name = "berryloop", version, allow_negative_numbers = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Imaginary-time ground-state preparation at zero twist.
    Ground(GroundArgs),
    /// One forward-and-back loop with its Berry phase.
    Loop(LoopArgs),
    /// Loops over a list of values of one parameter.
    Sweep(SweepArgs),
    /// Exact Berry phase from a discretized Wilson loop.
    EdBerry(EdArgs),
    /// Operator pool sizes and elements.
    Pools(PoolArgs),
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    /// Number of sites.
    #[arg(long)]
    sites: Option<usize>,
    /// Mean hopping amplitude.
    #[arg(long)]
    hopping: Option<f64>,
    /// Dimerization.
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// On-site interaction.
    #[arg(long = "u")]
    interaction: Option<f64>,
}

impl ModelArgs {
    fn apply(&self, m: &mut ModelParams) {
        if let Some(v) = self.sites {
            m.n_sites = v;
        }
        if let Some(v) = self.hopping {
            m.hopping = v;
        }
        if let Some(v) = self.delta {
            m.delta = v;
        }
        if let Some(v) = self.interaction {
            m.interaction = v;
        }
    }

    fn params(&self) -> Result<ModelParams, Error> {
        let mut m = default_model();
        self.apply(&mut m);
        m.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(m)
    }
}

fn default_model() -> ModelParams {
    ModelParams::four_site(-0.3, 0.0)
}

#[derive(Args, Debug)]
struct GroundArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Exit with status 3 if preparation did not converge.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Loop period.
    #[arg(long = "T", allow_negative_numbers = true)]
    period: Option<f64>,
    /// McLachlan distance threshold for ansatz growth.
    #[arg(long)]
    l2_cut: Option<f64>,
    /// Largest parameter change per step.
    #[arg(long)]
    dtheta_max: Option<f64>,
    /// Largest time step; defaults to T/200.
    #[arg(long)]
    dt_max: Option<f64>,
    /// Cap on the first time step.
    #[arg(long)]
    dt_init: Option<f64>,
    /// Constant time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Tikhonov regularization of the equations of motion.
    #[arg(long)]
    lambda: Option<f64>,
    /// Weight of the phase-velocity penalty.
    #[arg(long)]
    phase_weight: Option<f64>,
    /// Step of the exact propagation used for the infidelity columns.
    #[arg(long)]
    ed_dt: Option<f64>,
    /// Skip the exact propagation; infidelity columns stay empty.
    #[arg(long, conflicts_with = "ed_dt")]
    no_ed: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output formats.
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Vec<FormatArg>,
    /// Exit with status 3 on flagged results.
    #[arg(long)]
    strict: bool,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Csv,
    Json,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::new(default_model()),
        };
        self.model.apply(&mut c.model);
        let p = &mut c.protocol;
        if let Some(v) = self.period {
            p.period = v;
        }
        let d = &mut p.dynamics;
        if let Some(v) = self.l2_cut {
            d.l2_cut = v;
        }
        if let Some(v) = self.dtheta_max {
            d.dtheta_max = v;
        }
        if self.dt_max.is_some() {
            d.dt_max = self.dt_max;
        }
        if self.dt_init.is_some() {
            d.dt_init = self.dt_init;
        }
        if self.dt.is_some() {
            d.fixed_dt = self.dt;
        }
        if let Some(v) = self.lambda {
            d.lambda_reg = v;
        }
        if let Some(v) = self.phase_weight {
            d.phase_weight = v;
        }
        if self.ed_dt.is_some() {
            c.ed_dt = self.ed_dt;
        }
        if self.no_ed {
            c.ed_dt = None;
        }
        if let Some(dir) = &self.out {
            c.output.dir = dir.clone();
        }
        if !self.format.is_empty() {
            c.output.formats = self
                .format
                .iter()
                .map(|f| match f {
                    FormatArg::Csv => Format::Csv,
                    FormatArg::Json => Format::Json,
                })
                .collect();
        }
        Ok(c)
    }
}

#[derive(Args, Debug)]
struct LoopArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Swept parameter: delta, T, dt_max, dt or l2_cut.
    #[arg(long)]
    axis: Option<String>,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct EdArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Points on the twist grid.
    #[arg(long, default_value_t = DEFAULT_WILSON_GRID)]
    points: usize,
}

#[derive(Args, Debug)]
struct PoolArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Print every pool element.
    #[arg(long)]
    list: bool,
}

enum Outcome {
    Done,
    Flagged,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Ground(a) => ground(&a),
        Command::Loop(a) => run_loop(&a),
        Command::Sweep(a) => sweep(&a),
        Command::EdBerry(a) => ed_berry(&a),
        Command::Pools(a) => pools(&a),
    };
    match outcome {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Flagged) => ExitCode::from(EXIT_FLAGGED),
        Err(e) => {
            eprintln!("berryloop: {e}");
            match e {
                Error::Config(_) | Error::InvalidParameter(_) => ExitCode::from(EXIT_CONFIG),
                _ => ExitCode::from(EXIT_FAILURE),
            }
        }
    }
}

fn print(text: &str) -> Result<(), Error> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|source| Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })
}

fn ground(a: &GroundArgs) -> Result<Outcome, Error> {
    let mut c = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(default_model()),
    };
    a.model.apply(&mut c.model);
    c.validate()?;
    let params = c.model;
    let h = build_sshh(&params, 0.0)?;
    let (ansatz, report) = avqite_run(
        &h,
        &ground_prep_reference(&params)?,
        &c.ground_prep,
        &qubit_excitation_pool(params.n_qubits())?,
    )?;
    let state = ansatz.evaluate();
    let family = DenseFamily::from_params(&params)?;
    let (exact_energy, exact) = SectorSolver::new(&family, &state)?.ground_state(0.0)?;
    let out = json!({
        "params": params,
        "energy": report.energy,
        "exact_energy": exact_energy,
        "infidelity": state.infidelity(&exact)?,
        "n_theta": report.n_theta,
        "cnot": report.cnot,
        "depth": report.depth,
        "steps": report.steps,
        "converged": report.converged,
        "saturated": report.saturated,
    });
    print(&to_json_string(&out)?)?;
    Ok(if a.strict && !report.converged {
        Outcome::Flagged
    } else {
        Outcome::Done
    })
}

fn run_loop(a: &LoopArgs) -> Result<Outcome, Error> {
    let c = a.run.config()?;
    if c.sweep.is_some() {
        return Err(Error::Config(
            "configuration describes a sweep; use the sweep subcommand".into(),
        ));
    }
    let run = execute(&c, None)?;
    write_results(std::slice::from_ref(&run), &c)?;
    print(&result_json(&run)?)?;
    Ok(if a.run.strict && run.result.is_flagged() {
        Outcome::Flagged
    } else {
        Outcome::Done
    })
}

fn worker_count(points: usize) -> usize {
    let cap = std::env::var("BERRYLOOP_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    cap.min(points).max(1)
}

/// Runs every point on a worker pool; results come back in input order.
fn run_points(points: &[(Option<f64>, RunConfig)]) -> Result<Vec<RunOutput>, Error> {
    let slots: Vec<Mutex<Option<Result<RunOutput, Error>>>> =
        points.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..worker_count(points.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some((value, cfg)) = points.get(k) else {
                    break;
                };
                let mut out = execute(cfg, *value);
                if let Ok(run) = &mut out {
                    run.result.trajectory.snapshots.clear();
                }
                *slots[k].lock().unwrap_or_else(|e| e.into_inner()) = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .unwrap_or_else(|e| e.into_inner())
                .unwrap_or_else(|| Err(Error::Internal("sweep point was not run".into())))
        })
        .collect()
}

fn sweep(a: &SweepArgs) -> Result<Outcome, Error> {
    let mut c = a.run.config()?;
    if let Some(axis) = &a.axis {
        let axis: SweepAxis = axis.parse()?;
        let values = a.values.clone().unwrap_or_default();
        c.sweep = Some(SweepSpec { axis, values });
    } else if let Some(values) = &a.values {
        match &mut c.sweep {
            Some(sw) => sw.values = values.clone(),
            None => return Err(Error::Config("--values needs --axis".into())),
        }
    }
    let Some(spec) = c.sweep.clone() else {
        return Err(Error::Config(
            "no sweep given; pass --axis and --values or a config with a sweep".into(),
        ));
    };
    c.validate()?;
    let runs = run_points(&c.points()?)?;
    write_results(&runs, &c)?;
    print(&summary_csv(spec.axis, &runs))?;
    Ok(if a.run.strict && runs.iter().any(|r| r.result.is_flagged()) {
        Outcome::Flagged
    } else {
        Outcome::Done
    })
}

fn ed_berry(a: &EdArgs) -> Result<Outcome, Error> {
    let params = a.model.params()?;
    let phi = wilson_loop_berry(&params, a.points)?;
    let out = json!({
        "params": params,
        "points": a.points,
        "phi_b_principal": principal_value(phi),
    });
    print(&to_json_string(&out)?)?;
    Ok(Outcome::Done)
}

fn pools(a: &PoolArgs) -> Result<Outcome, Error> {
    let params = a.model.params()?;
    let ham = hamiltonian_pool(&params)?;
    let exc = qubit_excitation_pool(params.n_qubits())?;
    let mut text = format!(
        "hamiltonian pool size {}\nexcitation pool size {}\n",
        ham.len(),
        exc.len()
    );
    if a.list {
        text.push_str("# hamiltonian\n");
        for p in &ham.elements {
            text.push_str(&format!("{p}\n"));
        }
        text.push_str("# excitation\n");
        for p in &exc.elements {
            text.push_str(&format!("{p}\n"));
        }
    }
    print(&text)?;
    Ok(Outcome::Done)
}
