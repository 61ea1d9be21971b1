mod config;

use clap::{Args, Parser, Subcommand};
use config::{ConfigError, Manifest, RunConfig};
use entwit_core::io::{
    self, import_table, load_dataset, load_sidecar, load_witness, save_dataset, save_witness,
    TableFormat, TrajectoryWriter, WitnessFile, WitnessSidecar,
};
use entwit_core::{
    concurrence, ed_dataset, evaluate_witness, fit_separable_with, piew_value, qfi,
    separable_bound, witness_from_couplings, witness_from_gradient, Axis, Error, SpinModel,
    ThermalState, Verdict, WitnessMode,
};
use serde::Serialize;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;

/// Data-driven entanglement witnesses from one- and two-point spin correlations.
#[derive(Parser, Debug)]
#[command(name = "entwit", version, about)]
struct Cli {
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: $ENTWIT_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Where to write the run manifest (each command has its own default).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact-diagonalization correlations of a small spin ring.
    GenData(GenDataArgs),
    /// Fit a separable rotator model to a dataset.
    Fit(FitArgs),
    /// Anneal the separable bound of a witness.
    Bound(BoundArgs),
    /// Evaluate a witness on a dataset.
    Evaluate(EvaluateArgs),
    /// Standard entanglement criteria on a dataset.
    Compare(CompareArgs),
    /// Convert a published coefficient table into a witness file.
    ImportSmTable(ImportArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[arg(long)]
    model: Option<SpinModel>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    g: Option<f64>,
    #[arg(long)]
    rmax: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    mode: Option<WitnessMode>,
    /// Skip annealing the separable bound of a detected witness.
    #[arg(long)]
    no_bound: bool,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long)]
    witness: PathBuf,
    /// Ring size (default: the witness sidecar).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    beta_end: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    witness: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Extensive separable bound.
    #[arg(long, conflicts_with = "bound_per_site", allow_hyphen_values = true)]
    bound: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    bound_per_site: Option<f64>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    data: PathBuf,
    /// Model of the generating state; enables quantum Fisher information.
    #[arg(long)]
    ed_model: Option<SpinModel>,
    #[arg(long, requires = "ed_model")]
    ed_temperature: Option<f64>,
    #[arg(long, requires = "ed_model")]
    ed_g: Option<f64>,
}

#[derive(Args, Debug)]
struct ImportArgs {
    #[arg(long)]
    format: TableFormat,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::DimensionOverflow { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Some(t) = cfg.thread_count()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let manifest = cli.manifest;
    match cli.command {
        Command::GenData(a) => gen_data(a, cfg, manifest),
        Command::Fit(a) => fit(a, cfg, manifest),
        Command::Bound(a) => bound(a, cfg, manifest),
        Command::Evaluate(a) => evaluate(a, cfg, manifest),
        Command::Compare(a) => compare(a, cfg, manifest),
        Command::ImportSmTable(a) => import(a, cfg, manifest),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_manifest(path: &Path, command: &str, cfg: &RunConfig) -> Result<(), Failure> {
    io::write_json(path, &Manifest::new(command, cfg))?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable report")
    );
}

fn gen_data(a: GenDataArgs, mut cfg: RunConfig, manifest: Option<PathBuf>) -> Outcome {
    let m = &mut cfg.model;
    if let Some(v) = a.model {
        m.model = v;
    }
    if let Some(v) = a.n {
        m.n_sites = v;
    }
    if let Some(v) = a.temperature {
        m.temperature = v;
    }
    if let Some(v) = a.g {
        m.g = v;
    }
    if let Some(v) = a.rmax {
        m.r_max = v;
    }
    let ds = ed_dataset(&m.spec())?;
    save_dataset(&a.out, &ds)?;
    write_manifest(
        &manifest.unwrap_or_else(|| with_suffix(&a.out, ".manifest.json")),
        "gen-data",
        &cfg,
    )?;
    log::info!("wrote {} observables to {}", ds.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn fit(a: FitArgs, mut cfg: RunConfig, manifest: Option<PathBuf>) -> Outcome {
    if a.seed.is_some() {
        cfg.seed = a.seed;
    }
    cfg.apply_seed();
    if a.eta.is_some() {
        cfg.fit.eta = a.eta;
    }
    if let Some(v) = a.epsilon {
        cfg.fit.epsilon = v;
    }
    if let Some(v) = a.max_iters {
        cfg.fit.max_iterations = v;
    }
    if let Some(v) = a.mode {
        cfg.witness_mode = v;
    }
    if a.out_dir.is_some() {
        cfg.out_dir = a.out_dir;
    }
    let out_dir = cfg
        .out_dir
        .clone()
        .ok_or_else(|| Failure::Usage("fit needs --out-dir or out_dir in the config".into()))?;
    let ds = load_dataset(&a.data)?;
    fs::create_dir_all(&out_dir)?;
    write_manifest(
        &manifest.unwrap_or_else(|| out_dir.join("manifest.json")),
        "fit",
        &cfg,
    )?;

    let mut traj_out = TrajectoryWriter::new(fs::File::create(out_dir.join("trajectory.csv"))?)?;
    let mut write_err = None;
    let (verdict, traj) = fit_separable_with(&ds, &cfg.fit, &cfg.sampler, |r| {
        if let Err(e) = traj_out.write(r) {
            write_err.get_or_insert(e);
        }
        log::debug!(
            "iter {} |g| {:.5} |K| {:.3}",
            r.iter,
            r.grad_norm,
            r.coupling_norm
        );
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    traj_out.flush()?;

    let mut witness_report = None;
    if verdict.verdict == Verdict::WitnessFound {
        let coefficients = match cfg.witness_mode {
            WitnessMode::FromCouplings => witness_from_couplings(&traj.final_couplings)?,
            WitnessMode::FromGradient => witness_from_gradient(&traj.final_gradient)?,
        };
        let observables = ds.observables().to_vec();
        let wf = WitnessFile::new(observables, coefficients.clone())?;
        let mut sidecar = WitnessSidecar {
            norm: wf.norm(),
            mode: cfg.witness_mode,
            n_sites: Some(ds.n_sites()),
            separable_bound: None,
            separable_bound_per_site: None,
        };
        if !a.no_bound {
            let b = separable_bound(&coefficients, ds.set(), &cfg.anneal)?;
            sidecar.separable_bound = Some(b.bound);
            sidecar.separable_bound_per_site = Some(b.bound_per_site());
            witness_report = Some(evaluate_witness(
                &coefficients,
                &ds,
                b.bound,
                cfg.witness_mode,
            )?);
        }
        save_witness(&out_dir.join("witness.csv"), &wf, &sidecar)?;
    }
    let report = json!({
        "verdict": verdict,
        "final_couplings": traj.final_couplings.as_slice(),
        "final_gradient": traj.final_gradient,
        "final_errors": traj.final_errors,
        "witness": witness_report,
    });
    io::write_json(&out_dir.join("verdict.json"), &report)?;
    print_json(&report);
    Ok(if verdict.verdict == Verdict::Inconclusive {
        ExitCode::from(EXIT_INCONCLUSIVE)
    } else {
        ExitCode::SUCCESS
    })
}

fn unit_coefficients(w: &WitnessFile) -> Result<Vec<f64>, Failure> {
    let norm = w.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Failure::Data("witness has zero norm".into()));
    }
    if (norm - 1.0).abs() > 1e-3 {
        log::warn!("witness norm {norm:.6} rescaled to 1");
    }
    Ok(w.coefficients.iter().map(|c| c / norm).collect())
}

fn bound(a: BoundArgs, mut cfg: RunConfig, manifest: Option<PathBuf>) -> Outcome {
    if a.seed.is_some() {
        cfg.seed = a.seed;
    }
    cfg.apply_seed();
    if let Some(v) = a.beta_end {
        cfg.anneal.beta_end = v;
    }
    if let Some(v) = a.restarts {
        cfg.anneal.restarts = v;
    }
    let wf = load_witness(&a.witness)?;
    let sidecar = load_sidecar(&a.witness)?;
    let n =
        a.n.or(sidecar.as_ref().and_then(|s| s.n_sites))
            .ok_or_else(|| Failure::Usage("ring size unknown: pass --n".into()))?;
    let coefficients = unit_coefficients(&wf)?;
    let set = wf.set(n)?;
    write_manifest(
        &manifest.unwrap_or_else(|| with_suffix(&a.witness, ".bound.manifest.json")),
        "bound",
        &cfg,
    )?;
    let out = separable_bound(&coefficients, &set, &cfg.anneal)?;
    let updated = WitnessSidecar {
        norm: wf.norm(),
        mode: sidecar.map(|s| s.mode).unwrap_or_default(),
        n_sites: Some(n),
        separable_bound: Some(out.bound),
        separable_bound_per_site: Some(out.bound_per_site()),
    };
    io::write_json(&io::sidecar_path(&a.witness), &updated)?;
    print_json(&json!({
        "n_sites": n,
        "separable_bound": out.bound,
        "separable_bound_per_site": out.bound_per_site(),
        "annealed_min": out.annealed_min,
        "annealed_min_per_site": out.annealed_min / n as f64,
        "restart_minima": out.restart_minima,
    }));
    Ok(ExitCode::SUCCESS)
}

fn evaluate(a: EvaluateArgs, cfg: RunConfig, manifest: Option<PathBuf>) -> Outcome {
    let wf = load_witness(&a.witness)?;
    let sidecar = load_sidecar(&a.witness)?;
    let ds = load_dataset(&a.data)?;
    let n = ds.n_sites() as f64;
    let b = a
        .bound
        .or(a.bound_per_site.map(|b| b * n))
        .or_else(|| {
            let s = sidecar.as_ref()?;
            match s.n_sites {
                Some(m) if m == ds.n_sites() => s.separable_bound,
                _ => s.separable_bound_per_site.map(|b| b * n),
            }
        })
        .ok_or_else(|| {
            Failure::Usage("no separable bound: pass --bound or run `bound` first".into())
        })?;
    let coefficients = unit_coefficients(&wf)?;
    let aligned = WitnessFile::new(wf.observables.clone(), coefficients)?.aligned_to(ds.set())?;
    let mode = sidecar.map(|s| s.mode).unwrap_or_default();
    let report = evaluate_witness(&aligned, &ds, b, mode)?;
    if let Some(p) = manifest {
        write_manifest(&p, "evaluate", &cfg)?;
    }
    print_json(&json!({
        "report": report,
        "separable_bound_per_site": report.bound_per_site(),
        "quantum_value_per_site": report.quantum_value_per_site(),
        "violation_per_site": report.violation_per_site(),
        "violated": report.violated(),
    }));
    Ok(ExitCode::SUCCESS)
}

fn compare(a: CompareArgs, mut cfg: RunConfig, manifest: Option<PathBuf>) -> Outcome {
    let ds = load_dataset(&a.data)?;
    let piew = piew_value(&ds).ok();
    let conc = concurrence(&ds, 1).ok();
    let mut fisher = None;
    if let Some(model) = a.ed_model {
        let m = &mut cfg.model;
        m.model = model;
        m.n_sites = ds.n_sites();
        m.r_max = ds.n_sites() / 2;
        if let Some(t) = a.ed_temperature {
            m.temperature = t;
        }
        if let Some(g) = a.ed_g {
            m.g = g;
        }
        let state = ThermalState::thermal(&m.spec())?;
        let n = ds.n_sites() as f64;
        let per_axis: Vec<_> = Axis::CARTESIAN
            .iter()
            .map(|&ax| {
                let f = qfi(&state, ax);
                json!({ "axis": ax.to_string(), "qfi": f, "qfi_per_site": f / n, "entangled": f > n })
            })
            .collect();
        fisher = Some(per_axis);
    }
    if let Some(p) = manifest {
        write_manifest(&p, "compare", &cfg)?;
    }
    print_json(&json!({
        "n_sites": ds.n_sites(),
        "piew": piew,
        "concurrence_r1": conc,
        "qfi": fisher,
    }));
    Ok(ExitCode::SUCCESS)
}

fn import(a: ImportArgs, cfg: RunConfig, manifest: Option<PathBuf>) -> Outcome {
    let text = fs::read_to_string(&a.input)?;
    let wf = import_table(&text, a.format)?;
    let sidecar = WitnessSidecar {
        norm: wf.norm(),
        mode: WitnessMode::FromCouplings,
        n_sites: None,
        separable_bound: None,
        separable_bound_per_site: None,
    };
    save_witness(&a.out, &wf, &sidecar)?;
    write_manifest(
        &manifest.unwrap_or_else(|| with_suffix(&a.out, ".manifest.json")),
        "import-sm-table",
        &cfg,
    )?;
    print_json(&json!({ "terms": wf.coefficients.len(), "norm": wf.norm() }));
    Ok(ExitCode::SUCCESS)
}
