mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use feshbach::dynamics::{trapping_analysis, ResonanceEnsemble};
use feshbach::oracle::{default_initial_state, discretize_full, extract_width};
use feshbach::scattering::smatrix_grid;
use feshbach::spectra::{
    eigendecompose, locate_exceptional_point, solve_fixed_point, sweep_eigenvalues, BranchSeed, EpSearchOptions,
    FixedPointOptions, Tracker,
};
use feshbach::Error;

use output::{write_atomic, Cell, Table};
use scenario::{Grid, LoadError, Scenario};

#[derive(Debug, Parser)]
#[command(name = "feshbach", version, about = "Resonance spectra, S-matrices and decay rates of open quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Complex eigenvalues and phase rigidities at the probe energy
    Spectrum,
    /// Self-consistent resonance energy of one state
    Fixedpoint,
    /// Eigenvalue trajectories over the alpha grid
    Sweep,
    /// Exceptional point inside the configured parameter box
    EpLocate,
    /// S-matrix and unitarity residual over the energy grid
    Smatrix,
    /// Population and group decay rate over the time grid
    Decay,
    /// Group and individual decay rates over the time grid
    Rates,
    /// Broad and trapped widths over the alpha grid
    Trap,
    /// Fixed-point width against the discretized full-space model
    OracleCompare,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, clap::Args)]
struct Options {
    /// Scenario file (JSON)
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; standard output when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    e_min: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    e_max: Option<f64>,
    #[arg(long, global = true)]
    e_count: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    t_max: Option<f64>,
    #[arg(long, global = true)]
    t_count: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha_min: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha_max: Option<f64>,
    #[arg(long, global = true)]
    alpha_count: Option<usize>,
    /// Bins per channel for the full-space oracle
    #[arg(long, global = true)]
    bins: Option<usize>,
}

enum Failure {
    Validation(String, String),
    Numerical(String, String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() || matches!(e, Error::DomainError { .. }) {
            Failure::Validation(e.name().into(), e.to_string())
        } else {
            Failure::Numerical(e.name().into(), e.to_string())
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io(e) => Failure::Validation("ScenarioUnreadable".into(), e.to_string()),
            LoadError::Parse(e) => Failure::Validation("ScenarioParseError".into(), e.to_string()),
            LoadError::Invalid(e) => e.into(),
        }
    }
}

fn grid(base: Option<Grid>, min: Option<f64>, max: Option<f64>, count: Option<usize>, name: &str) -> Result<Grid, Error> {
    let g = match (base, min, max, count) {
        (Some(b), _, _, _) => Grid { min: min.unwrap_or(b.min), max: max.unwrap_or(b.max), count: count.unwrap_or(b.count) },
        (None, Some(min), Some(max), Some(count)) => Grid { min, max, count },
        _ => return Err(Error::InvalidInput(format!("no {name} grid in the scenario or on the command line"))),
    };
    g.validate(name)?;
    Ok(g)
}

struct Context {
    scenario: Scenario,
    opts: Options,
}

impl Context {
    fn energies(&self) -> Result<Vec<f64>, Error> {
        let o = &self.opts;
        Ok(grid(self.scenario.grids.energy, o.e_min, o.e_max, o.e_count, "energy")?.points())
    }

    fn times(&self) -> Result<Vec<f64>, Error> {
        let o = &self.opts;
        let base = self.scenario.grids.time;
        let min = if base.is_none() { Some(0.0) } else { None };
        Ok(grid(base, min, o.t_max, o.t_count, "time")?.points())
    }

    fn alphas(&self) -> Result<Vec<f64>, Error> {
        let o = &self.opts;
        Ok(grid(self.scenario.grids.alpha, o.alpha_min, o.alpha_max, o.alpha_count, "alpha")?.points())
    }
}

fn spectrum(ctx: &Context) -> Result<Table, Error> {
    let sys = ctx.scenario.system()?;
    let states = eigendecompose(&sys.effective_hamiltonian(ctx.scenario.probe_energy)?)?;
    let mut t = Table::new(["index", "re_z", "im_z", "gamma", "a_norm", "rigidity"]);
    for (i, s) in states.iter().enumerate() {
        t.push(vec![i.into(), s.z.re.into(), s.z.im.into(), s.width().into(), s.a_norm.into(), s.rigidity.into()]);
    }
    Ok(t)
}

fn fixed_point_seed(scn: &Scenario) -> BranchSeed {
    let spec = scn.fixed_point.as_ref();
    BranchSeed {
        energy: spec.and_then(|f| f.seed_energy).unwrap_or(scn.probe_energy),
        tracker: Tracker::Index(spec.map(|f| f.state).unwrap_or(0)),
    }
}

fn fixedpoint(ctx: &Context) -> Result<Table, Error> {
    let sys = ctx.scenario.system()?;
    let seed = fixed_point_seed(&ctx.scenario);
    let state = match seed.tracker {
        Tracker::Index(i) => i,
        Tracker::Vector(_) => 0,
    };
    let r = solve_fixed_point(&sys, &seed, &FixedPointOptions::default())?;
    let mut t = Table::new(["state", "energy", "width", "re_z", "im_z", "iterations", "converged"]).single();
    t.push(vec![
        state.into(),
        r.energy.into(),
        r.width.into(),
        r.z.re.into(),
        r.z.im.into(),
        r.iterations.into(),
        r.converged.into(),
    ]);
    Ok(t)
}

fn sweep(ctx: &Context) -> Result<Table, Error> {
    let sys = ctx.scenario.system()?;
    let traj = sweep_eigenvalues(&sys, ctx.scenario.probe_energy, &ctx.alphas()?)?;
    let mut t = Table::new(["alpha", "index", "re_z", "im_z", "gamma", "a_norm", "min_overlap", "branch_lost"]);
    for p in &traj.points {
        for (i, s) in p.states.iter().enumerate() {
            t.push(vec![
                p.parameter.into(),
                i.into(),
                s.z.re.into(),
                s.z.im.into(),
                s.width().into(),
                s.a_norm.into(),
                p.min_overlap.into(),
                p.branch_lost.into(),
            ]);
        }
    }
    Ok(t)
}

fn ep_locate(ctx: &Context) -> Result<Table, Error> {
    let sys = ctx.scenario.system()?;
    let spec = ctx
        .scenario
        .ep_search
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("scenario has no ep_search block".into()))?;
    let axes = [spec.params[0].axis()?, spec.params[1].axis()?];
    let mut options = EpSearchOptions::default();
    if let Some(g) = spec.grid {
        options.grid = g;
    }
    let ep = locate_exceptional_point(&sys, axes, ctx.scenario.probe_energy, &options)?;
    let mut t = Table::new([
        spec.params[0].label(),
        spec.params[1].label(),
        "re_z".into(),
        "im_z".into(),
        "residual".into(),
        "self_orthogonality".into(),
    ])
    .single();
    t.push(vec![
        ep.params[0].into(),
        ep.params[1].into(),
        ep.z.re.into(),
        ep.z.im.into(),
        ep.residual.into(),
        ep.self_orthogonality.into(),
    ]);
    Ok(t)
}

fn smatrix(ctx: &Context) -> Result<Table, Error> {
    let sys = ctx.scenario.system()?;
    let k = sys.channels.len();
    let mut columns = vec!["energy".to_string()];
    for i in 0..k {
        for j in 0..k {
            columns.push(format!("re_s_{i}_{j}"));
            columns.push(format!("im_s_{i}_{j}"));
        }
    }
    columns.push("unitarity_residual".into());
    let mut t = Table::new(columns);
    for s in smatrix_grid(&sys, &ctx.energies()?)? {
        let mut row: Vec<Cell> = vec![s.energy.into()];
        for i in 0..k {
            for j in 0..k {
                row.push(s.s[(i, j)].re.into());
                row.push(s.s[(i, j)].im.into());
            }
        }
        row.push(s.unitarity_residual().into());
        t.push(row);
    }
    Ok(t)
}

fn ensemble(ctx: &Context) -> Result<ResonanceEnsemble, Error> {
    let sys = ctx.scenario.system()?;
    ResonanceEnsemble::new(&sys, ctx.scenario.probe_energy, &ctx.scenario.excitation()?)
}

fn decay(ctx: &Context) -> Result<Table, Error> {
    let times = ctx.times()?;
    let ens = ensemble(ctx)?;
    let mut t = Table::new(["t", "population", "k_gr"]);
    for &time in &times {
        t.push(vec![time.into(), ens.population(time)?.into(), ens.group_rate(time)?.into()]);
    }
    Ok(t)
}

fn rates(ctx: &Context) -> Result<Table, Error> {
    let times = ctx.times()?;
    let ens = ensemble(ctx)?;
    let n = ens.states.len();
    let mut columns = vec!["t".to_string(), "k_gr".to_string()];
    columns.extend((0..n).map(|i| format!("k_{i}")));
    let mut t = Table::new(columns);
    for &time in &times {
        let mut row: Vec<Cell> = vec![time.into(), ens.group_rate(time)?.into()];
        for l in 0..n {
            // a norm that has no logarithm is written as NaN
            let k = match ens.individual_rate(l, time) {
                Ok(k) => k,
                Err(Error::Underflow { .. }) => f64::NAN,
                Err(e) => return Err(e),
            };
            row.push(k.into());
        }
        t.push(row);
    }
    Ok(t)
}

fn trap(ctx: &Context) -> Result<Table, Error> {
    let sys = ctx.scenario.system()?;
    let report = trapping_analysis(&sys, &ctx.alphas()?, ctx.scenario.probe_energy)?;
    let n = sys.dim();
    let mut columns: Vec<String> =
        ["alpha", "gamma_av", "k_av", "dominant_fraction", "after_onset"].iter().map(|s| s.to_string()).collect();
    columns.extend((0..n).map(|i| format!("gamma_{i}")));
    let mut t = Table::new(columns);
    for (i, &a) in report.alphas.iter().enumerate() {
        let after = report.onset.is_some_and(|o| a >= o);
        let mut row: Vec<Cell> = vec![
            a.into(),
            report.gamma_av[i].into(),
            report.k_av[i].into(),
            report.dominant_fraction(i).into(),
            after.into(),
        ];
        row.extend(report.widths[i].iter().map(|&w| Cell::from(w)));
        t.push(row);
    }
    Ok(t)
}

fn oracle_compare(ctx: &Context) -> Result<Table, Error> {
    let scn = &ctx.scenario;
    let sys = scn.system()?;
    let spec = scn.oracle.clone().unwrap_or_default();
    let mut seed = fixed_point_seed(scn);
    if let Some(s) = spec.state {
        seed.tracker = Tracker::Index(s);
    }
    let state = match seed.tracker {
        Tracker::Index(i) => i,
        Tracker::Vector(_) => 0,
    };
    let fp = solve_fixed_point(&sys, &seed, &FixedPointOptions::default())?;
    let bins = ctx.opts.bins.or(spec.bins).unwrap_or(2000);
    let model = discretize_full(&sys, bins, &scn.windows())?;
    let states = eigendecompose(&sys.effective_hamiltonian(fp.energy)?)?;
    let target = states
        .get(state)
        .ok_or_else(|| Error::InvalidInput(format!("state {state} out of range")))?;
    let psi0 = default_initial_state(target)?;
    if !(fp.width > 0.0) {
        return Err(Error::InvalidInput("fixed-point width is zero; nothing to compare".into()));
    }
    let lifetime = sys.hbar / fp.width;
    let (lo, hi) = spec.fit_window.unwrap_or((0.2 * lifetime, 2.0 * lifetime));
    let samples = spec.samples.unwrap_or(201).max(2);
    let spectrum = model.eigen()?;
    let horizon = spectrum.horizon;
    let times: Vec<f64> = Grid { min: lo, max: hi, count: samples }.points();
    let curve = spectrum.survival(&psi0, &times)?;
    let fit = extract_width(&curve, (lo, hi))?;
    let late = spectrum.survival(&psi0, &[horizon])?.probability[0];
    let tail_ratio = late / (-fp.width * horizon / sys.hbar).exp();
    let mut t = Table::new([
        "state",
        "bins",
        "gamma_fixed_point",
        "gamma_fit",
        "relative_error",
        "fit_residual",
        "horizon",
        "tail_ratio",
    ])
    .single();
    t.push(vec![
        state.into(),
        bins.into(),
        fp.width.into(),
        fit.gamma.into(),
        ((fit.gamma - fp.width).abs() / fp.width).into(),
        fit.residual.into(),
        horizon.into(),
        tail_ratio.into(),
    ]);
    Ok(t)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let path = cli
        .opts
        .scenario
        .clone()
        .ok_or_else(|| Failure::Validation("MissingScenario".into(), "--scenario is required".into()))?;
    let scenario = Scenario::load(&path)?;
    let ctx = Context { scenario, opts: cli.opts };
    let table = match cli.command {
        Command::Spectrum => spectrum(&ctx),
        Command::Fixedpoint => fixedpoint(&ctx),
        Command::Sweep => sweep(&ctx),
        Command::EpLocate => ep_locate(&ctx),
        Command::Smatrix => smatrix(&ctx),
        Command::Decay => decay(&ctx),
        Command::Rates => rates(&ctx),
        Command::Trap => trap(&ctx),
        Command::OracleCompare => oracle_compare(&ctx),
    }?;
    let text = match ctx.opts.format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    };
    match &ctx.opts.out {
        Some(p) => write_atomic(p, &text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Io(e.to_string()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(name, msg)) => {
            eprintln!("{name}: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(name, msg)) => {
            eprintln!("{name}: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("IoError: {msg}");
            ExitCode::from(1)
        }
    }
}
