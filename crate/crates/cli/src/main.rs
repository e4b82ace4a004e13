use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use adsim::bench::{self, BenchResult, SweepSpec};
use adsim::cohort::{self, LabeledCohort, RawCohort};
use adsim::estim::{
    s_learner, score, seq_t_learner, t_learner, Estimator, FeatureView, Observational, OracleTruth, RnnOptions,
    SequenceView, ViewOptions,
};
use adsim::genmodel::{fit_bank, FitOptions, ModelBank};
use adsim::intervene::PolicyKind;
use adsim::reference;
use adsim::sim::{self, Provenance, SimConfig};
use adsim::{CausalGraph, Effect, Error, ExitCode};
use clap::{Args, Parser, Subcommand};

macro_rules! out {
    ($($arg:tt)*) => {
        write!(std::io::stdout().lock(), $($arg)*)?
    };
}

macro_rules! outln {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout().lock(), $($arg)*)?
    };
}

#[derive(Parser)]
#[command(name = "adsim", version, about = "Longitudinal Alzheimer's disease trajectory simulator and CATE benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GraphArg {
    /// Causal graph JSON; defaults to the built-in graph.
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
}

impl GraphArg {
    fn load(&self) -> Result<CausalGraph, Error> {
        match &self.graph {
            Some(p) => {
                let g = CausalGraph::load(p)?;
                g.validate()?;
                Ok(g)
            }
            None => Ok(reference::default_graph()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Inspect causal graphs.
    Graph {
        #[command(subcommand)]
        action: GraphCmd,
    },
    /// Cohort ingestion and preparation.
    Cohort {
        #[command(subcommand)]
        action: CohortCmd,
    },
    /// Fit a model bank on a cohort.
    Fit(FitArgs),
    /// Sample trajectories from a model bank.
    Simulate(SimulateArgs),
    /// Train an estimator on an observational export and score it.
    Estimate(EstimateArgs),
    /// Run knob sweeps.
    Sweep(SweepArgs),
    /// Print reports.
    Report {
        #[command(subcommand)]
        action: ReportCmd,
    },
    /// Write the shipped reference bank or cohort.
    Reference {
        #[command(subcommand)]
        action: ReferenceCmd,
    },
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Validate a graph and print its variables.
    Check {
        #[command(flatten)]
        graph: GraphArg,
    },
    /// Print the built-in graph.
    Default,
}

#[derive(Subcommand)]
enum CohortCmd {
    /// Infer subtypes, impute missing cells and write a labeled cohort.
    Prepare {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        graph: GraphArg,
    },
}

#[derive(Args)]
struct FitArgs {
    /// Cohort CSV; unlabeled or incomplete cohorts are prepared first.
    #[arg(long)]
    cohort: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
    /// Write the fit table (tab separated) here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Report on training patients instead of the holdout.
    #[arg(long)]
    report_on_train: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    graph: GraphArg,
}

#[derive(Args)]
struct SimulateArgs {
    /// Model bank JSON; defaults to the shipped reference bank.
    #[arg(long)]
    bank: Option<PathBuf>,
    /// Simulation config JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_parser = parse_policy)]
    policy: Option<PolicyKind>,
    #[arg(long)]
    noise_scale: Option<f64>,
    #[arg(long)]
    clamp: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    graph: GraphArg,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    oracle: PathBuf,
    #[arg(long, value_parser = parse_estimator)]
    estimator: Estimator,
    /// Evaluation step; defaults to the last step.
    #[arg(long)]
    ts: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Withhold the subtype from the features.
    #[arg(long)]
    hide_z: bool,
    /// Provenance JSON; defaults to `provenance.json` beside the oracle.
    #[arg(long)]
    provenance: Option<PathBuf>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    graph: GraphArg,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep spec JSON (one spec or a list).
    #[arg(long, conflicts_with = "defaults")]
    spec: Option<PathBuf>,
    /// Run the shipped sweeps.
    #[arg(long)]
    defaults: bool,
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    graph: GraphArg,
}

#[derive(Subcommand)]
enum ReportCmd {
    /// First-visit statistics of a cohort CSV or of a fresh simulation.
    Cohort {
        #[arg(long, conflicts_with = "bank")]
        cohort: Option<PathBuf>,
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        graph: GraphArg,
    },
    /// Fit a bank on a cohort and print the fit table.
    Fit {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        graph: GraphArg,
    },
    /// Median and IQR per grid cell of a sweep's records.
    Sweep {
        #[arg(long)]
        records: PathBuf,
    },
    /// The action table with average effects.
    Ate,
}

#[derive(Subcommand)]
enum ReferenceCmd {
    Bank {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Cohort {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    match s {
        "random" => Ok(PolicyKind::Random),
        "covariate" => Ok(PolicyKind::Covariate),
        _ => Err(format!("unknown policy `{s}` (expected random or covariate)")),
    }
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    s.parse()
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => out!("{text}"),
    }
    Ok(())
}

fn load_bank(path: Option<&Path>, graph: &CausalGraph) -> Result<ModelBank, Error> {
    Ok(match path {
        Some(p) => ModelBank::load(p, graph)?,
        None => {
            let bank = reference::shipped_reference_bank();
            bank.validate(graph)?;
            bank
        }
    })
}

/// A cohort ready for fitting: labeled and complete as given, or prepared.
fn labeled(raw: &RawCohort, graph: &CausalGraph, seed: u64) -> Result<LabeledCohort, Error> {
    let subtypes = cohort::infer_subtypes(raw, seed)?;
    if raw.patients.iter().all(|p| p.z.is_some()) && raw.missing_cells(graph) == 0 {
        let mask = raw.patients.iter().map(|p| p.visits.iter().map(|v| vec![false; v.len()]).collect()).collect();
        return Ok(LabeledCohort { patients: raw.patients.clone(), mask, gmm: subtypes.gmm });
    }
    log::info!("cohort is unlabeled or incomplete; inferring subtypes and imputing");
    Ok(cohort::prepare(raw, graph, seed)?.cohort)
}

fn fit_cohort(path: &Path, graph: &CausalGraph, opts: &FitOptions) -> Result<(ModelBank, adsim::genmodel::FitTable), Error> {
    let raw = cohort::ingest_path(path, graph)?;
    let cohort = labeled(&raw, graph, opts.seed)?;
    Ok(fit_bank(&cohort, graph, opts)?)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Graph { action: GraphCmd::Check { graph } } => {
            let g = graph.load()?;
            outln!("graph ok: {} variables, {} edges, hash {}", g.variables.len(), g.edges.len(), g.hash());
            for v in &g.variables {
                let parents = g.parents_of(&v.name);
                outln!("  {:<16} {:<10} {:<8} <- [{}]", v.name, v.role, if v.is_dynamic() { "dynamic" } else { "static" }, parents.join(", "));
            }
        }
        Command::Graph { action: GraphCmd::Default } => out!("{}", reference::DEFAULT_GRAPH_JSON),
        Command::Cohort { action: CohortCmd::Prepare { input, out, seed, graph } } => {
            let g = graph.load()?;
            let raw = cohort::ingest_path(&input, &g)?;
            let missing = raw.missing_cells(&g);
            let prepared = cohort::prepare(&raw, &g, seed)?;
            cohort::write_csv(create(&out)?, &g, &prepared.cohort.patients)?;
            let ones = prepared.subtypes.labels.iter().filter(|z| **z == 1).count();
            outln!(
                "{} patients, {} imputed cells ({} missing on input), subtype 1: {} ({:.1}%)",
                raw.len(),
                prepared.cohort.imputed_cells(),
                missing,
                ones,
                100.0 * ones as f64 / raw.len() as f64
            );
        }
        Command::Fit(a) => {
            let g = a.graph.load()?;
            let opts = FitOptions {
                holdout_fraction: a.holdout,
                seed: a.seed,
                report_on_train: a.report_on_train,
                ..FitOptions::default()
            };
            let (bank, table) = fit_cohort(&a.cohort, &g, &opts)?;
            bank.save(&a.out)?;
            let text = table.to_delimited('\t');
            match &a.report {
                Some(p) => write_or_print(Some(p), &text)?,
                None => out!("{text}"),
            }
        }
        Command::Simulate(a) => {
            let g = a.graph.load()?;
            let bank = load_bank(a.bank.as_deref(), &g)?;
            let mut config: SimConfig = match &a.config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => SimConfig::default(),
            };
            config.n_patients = a.n.unwrap_or(config.n_patients);
            config.horizon = a.horizon.unwrap_or(config.horizon);
            config.gamma = a.gamma.unwrap_or(config.gamma);
            config.epsilon = a.epsilon.unwrap_or(config.epsilon);
            config.policy = a.policy.unwrap_or(config.policy);
            config.outcome_noise_scale = a.noise_scale.unwrap_or(config.outcome_noise_scale);
            config.seed = a.seed.unwrap_or(config.seed);
            config.clamp_adas |= a.clamp;
            let ds = sim::sample_dataset(&config, &bank, &g)?;
            sim::export_dir(&ds, &g, &a.out)?;
            outln!(
                "{} trajectories x {} steps written to {} (config {})",
                ds.len(),
                ds.horizon(),
                a.out.display(),
                ds.provenance.config_hash
            );
        }
        Command::Estimate(a) => estimate(a)?,
        Command::Sweep(a) => {
            let g = a.graph.load()?;
            let bank = load_bank(a.bank.as_deref(), &g)?;
            let specs = match (&a.spec, a.defaults) {
                (Some(p), _) => SweepSpec::from_json(&std::fs::read_to_string(p)?)?,
                (None, true) => bench::default_sweeps(),
                (None, false) => return Err(Error::Config("pass --spec <file> or --defaults".into())),
            };
            let mut all = BenchResult::default();
            for spec in &specs {
                log::info!("sweeping {} over {} values x {} seeds", spec.knob.name(), spec.grid.len(), spec.seeds.len());
                all.records.extend(bench::run_sweep(spec, &bank, &g)?.records);
            }
            std::fs::create_dir_all(&a.out)?;
            all.write_csv(create(&a.out.join("records.csv"))?, true)?;
            let summary = bench::summarize(&all)?;
            bench::write_summary(create(&a.out.join("summary.csv"))?, &summary)?;
            out!("{}", bench::summary_text(&summary));
        }
        Command::Report { action } => report(action)?,
        Command::Reference { action: ReferenceCmd::Bank { out } } => {
            write_or_print(out.as_deref(), reference::REFERENCE_BANK_JSON)?;
        }
        Command::Reference { action: ReferenceCmd::Cohort { out } } => {
            let g = reference::default_graph();
            match out {
                Some(p) => cohort::write_csv(create(&p)?, &g, &reference::reference_cohort())?,
                None => cohort::write_csv(std::io::stdout().lock(), &g, &reference::reference_cohort())?,
            }
        }
    }
    Ok(())
}

fn estimate(a: EstimateArgs) -> Result<(), Error> {
    let g = a.graph.load()?;
    let prov_path = a.provenance.clone().or_else(|| {
        let p = a.oracle.parent().unwrap_or(Path::new(".")).join(sim::PROVENANCE_JSON);
        p.exists().then_some(p)
    });
    let provenance: Option<Provenance> = match &prov_path {
        Some(p) => Some(serde_json::from_str(&std::fs::read_to_string(p)?)?),
        None => None,
    };
    let effect: Effect = provenance.as_ref().map(|p| p.effect.clone()).unwrap_or_default();
    let config_hash = match &provenance {
        Some(p) => p.config_hash.clone(),
        None => sim::sha256_hex(&std::fs::read(&a.train)?),
    };
    let trajectories = sim::read_oracle(File::open(&a.oracle)?, &g)?;
    let obs = Observational::read_csv(File::open(&a.train)?, &g, effect.n_actions())?;
    let t_s = a.ts.unwrap_or(obs.horizon().saturating_sub(1));
    let oracle = OracleTruth::from_trajectories(&trajectories, t_s)?;
    let view = ViewOptions { t_s, include_z: !a.hide_z };
    let estimate = match a.estimator {
        Estimator::S => s_learner(&FeatureView::build(&obs, &g, view)?)?,
        Estimator::T => t_learner(&FeatureView::build(&obs, &g, view)?)?,
        Estimator::SeqT => {
            let d = RnnOptions::default();
            let opts = RnnOptions {
                hidden: a.hidden.unwrap_or(d.hidden),
                epochs: a.epochs.unwrap_or(d.epochs),
                learning_rate: a.lr.unwrap_or(d.learning_rate),
                seed: a.seed,
                ..d
            };
            seq_t_learner(&SequenceView::build(&obs, &g, view)?, &opts)?
        }
    };
    let rows = score(a.estimator.name(), &estimate, &oracle, &effect)?;
    let mut w = create(&a.out)?;
    writeln!(w, "estimator,action,pehe,ate_error,n,config_hash")?;
    for r in &rows {
        writeln!(w, "{},{},{},{},{},{}", r.estimator, r.action, r.pehe, r.ate_error, r.n, config_hash)?;
    }
    w.flush()?;
    let finite: Vec<f64> = rows.iter().map(|r| r.pehe).filter(|v| v.is_finite()).collect();
    outln!(
        "{} at t_s={t_s}: macro PEHE {:.4} over {} arms{}",
        a.estimator,
        finite.iter().sum::<f64>() / finite.len().max(1) as f64,
        finite.len(),
        if estimate.skipped.is_empty() { String::new() } else { format!(", skipped {:?}", estimate.skipped) }
    );
    Ok(())
}

fn report(action: ReportCmd) -> Result<(), Error> {
    match action {
        ReportCmd::Cohort { cohort: Some(path), graph, .. } => {
            let g = graph.load()?;
            let raw = cohort::ingest_path(&path, &g)?;
            out!("{}", bench::cohort_report(&g, &raw.patients).to_text());
        }
        ReportCmd::Cohort { cohort: None, bank, n, seed, graph } => {
            let g = graph.load()?;
            let bank = load_bank(bank.as_deref(), &g)?;
            let config = SimConfig { n_patients: n, horizon: 1, seed, ..SimConfig::default() };
            let ds = sim::sample_dataset(&config, &bank, &g)?;
            out!("{}", bench::cohort_report(&g, &ds.to_patients()).to_text());
        }
        ReportCmd::Fit { cohort, holdout, seed, graph } => {
            let g = graph.load()?;
            let opts = FitOptions { holdout_fraction: holdout, seed, ..FitOptions::default() };
            let (_, table) = fit_cohort(&cohort, &g, &opts)?;
            out!("{}", table.to_delimited('\t'));
        }
        ReportCmd::Sweep { records } => {
            let result = BenchResult::read_csv(File::open(records)?)?;
            out!("{}", bench::summary_text(&bench::summarize(&result)?));
        }
        ReportCmd::Ate => out!("{}", bench::ate_report(&Effect::default())),
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var(bench::WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|n| *n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::Config as i32 } else { ExitCode::Ok as i32 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code() as i32);
    }
}
