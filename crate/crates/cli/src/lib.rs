//! Command-line front end: exact bands, VQD bands, QPE refinement and
//! long-format plot data.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qbands::backend::{rng_from_seed, Tier};
use qbands::bands::{BandEnergy, BandRow, BandTable, Provenance};
use qbands::config::{KFrame, KPathConfig, ModelFile, RunFile};
use qbands::pauli::map_hamiltonian;
use qbands::qpe::{refine_level, QpeConfig};
use qbands::seed::{job_seed, Stream};
use qbands::tightbinding::{exact_bands, KAnchor, KPath, KPoint, TightBindingModel};
use qbands::vqd::{band_structure, KRecord};

pub mod plot;

pub const EXACT_FILE: &str = "exact_bands.csv";
pub const VQD_FILE: &str = "vqd_bands.csv";
pub const TRIALS_FILE: &str = "vqd_trials.json";
pub const REFINED_FILE: &str = "refined_bands.csv";
pub const REFINE_DETAILS_FILE: &str = "refine_details.json";
pub const PLOT_FILE: &str = "plot_data.csv";

/// Bounds narrower than this are widened before phase estimation.
const MIN_WINDOW: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "qbands", version, about = "Tight-binding band structures on a simulated quantum computer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Diagonalize the Bloch matrix along the k-path.
    Exact(JobArgs),
    /// Run variational quantum deflation at every k-point.
    Vqd(JobArgs),
    /// Refine the VQD states of a previous run with phase estimation.
    Refine {
        #[command(flatten)]
        job: JobArgs,
        /// Trials sidecar from `vqd`; defaults to the one in --out.
        #[arg(long)]
        trials: Option<PathBuf>,
    },
    /// Merge band tables (CSV) and trial sidecars (JSON) into one long-format CSV.
    Plotdata {
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct JobArgs {
    /// Model file; overrides the run config's `model` entry.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed; overrides the run config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub tier: Option<Tier>,
}

/// A failed command, split by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, files or configuration; exit code 1.
    Config(anyhow::Error),
    /// The computation itself failed; exit code 2.
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "configuration error: {e:#}"),
            Failure::Runtime(e) => write!(f, "runtime error: {e:#}"),
        }
    }
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn runtime_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

pub fn execute(cmd: &Command) -> Result<(), Failure> {
    match cmd {
        Command::Exact(job) => cmd_exact(job),
        Command::Vqd(job) => cmd_vqd(job),
        Command::Refine { job, trials } => cmd_refine(job, trials.as_deref()),
        Command::Plotdata { inputs, out } => cmd_plotdata(inputs, out),
    }
}

/// Everything a subcommand needs from its files and flags.
struct Job {
    model: TightBindingModel,
    run: Option<RunFile>,
    tier: Option<Tier>,
    hash: String,
    seed: u64,
    out: PathBuf,
}

impl Job {
    fn load(args: &JobArgs, need_run: bool) -> Result<Self, Failure> {
        let mut hasher = Sha256::new();
        let run = match &args.run {
            Some(p) => {
                let text = fs::read(p).with_context(|| format!("reading {}", p.display())).map_err(config_err)?;
                hasher.update(b"run\0");
                hasher.update(&text);
                Some(RunFile::load(p).map_err(config_err)?)
            }
            None if need_run => return Err(config_err(anyhow!("--run is required"))),
            None => None,
        };
        let model_path = args
            .model
            .clone()
            .or_else(|| run.as_ref().and_then(|r| r.model.clone()))
            .ok_or_else(|| config_err(anyhow!("no model: pass --model or set `model` in the run config")))?;
        let text = fs::read(&model_path)
            .with_context(|| format!("reading {}", model_path.display()))
            .map_err(config_err)?;
        hasher.update(b"\0model\0");
        hasher.update(&text);
        let model = ModelFile::load(&model_path)
            .and_then(|m| m.build())
            .map_err(config_err)?;
        let tier = args.tier.or(run.as_ref().map(|r| r.tier));
        if let Some(t) = args.tier {
            hasher.update(b"\0tier\0");
            hasher.update(t.as_str().as_bytes());
        }
        let seed = args.seed.or(run.as_ref().map(|r| r.seed)).unwrap_or(0);
        fs::create_dir_all(&args.out)
            .with_context(|| format!("creating output directory {}", args.out.display()))
            .map_err(config_err)?;
        Ok(Self {
            model,
            run,
            tier,
            hash: hex::encode(hasher.finalize()),
            seed,
            out: args.out.clone(),
        })
    }

    fn header(&self, command: &str) -> Vec<String> {
        let mut h = vec![
            format!("qbands {} {command}", env!("CARGO_PKG_VERSION")),
            format!("config_hash: sha256:{}", self.hash),
            format!("seed: {}", self.seed),
        ];
        if let Some(t) = self.tier {
            h.push(format!("tier: {t}"));
        }
        h
    }

    /// Run config with the tier override applied.
    fn effective_run(&self) -> RunFile {
        let mut run = self.run.clone().expect("checked at load");
        if let Some(t) = self.tier {
            run.tier = t;
        }
        run
    }

    fn path(&self) -> Result<KPath, Failure> {
        let cfg = match &self.run {
            Some(r) => r.kpath.clone(),
            None => default_kpath(),
        };
        cfg.resolve(&self.model).map_err(config_err)
    }
}

/// X, M and Gamma of the first reciprocal-lattice cell with five interior
/// points per segment; used when no run config is given.
pub fn default_kpath() -> KPathConfig {
    KPathConfig {
        anchors: vec![
            KAnchor::new("X", [0.5, 0.0, 0.0]),
            KAnchor::new("M", [0.5, 0.5, 0.0]),
            KAnchor::new("G", [0.0, 0.0, 0.0]),
        ],
        frame: KFrame::Fractional,
        interior_points: 5,
    }
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(runtime_err)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_exact(args: &JobArgs) -> Result<(), Failure> {
    let job = Job::load(args, false)?;
    let path = job.path()?;
    let table = exact_bands(&job.model, &path).map_err(runtime_err)?;
    write(&job.out.join(EXACT_FILE), &table.to_csv(&job.header("exact")))
}

/// Trials sidecar written by `vqd`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialsFile {
    pub config_hash: String,
    pub seed: u64,
    pub tier: Tier,
    pub n_bands: usize,
    pub records: Vec<KRecord>,
}

pub fn cmd_vqd(args: &JobArgs) -> Result<(), Failure> {
    let job = Job::load(args, true)?;
    let run = job.effective_run();
    let backend = run.backend().map_err(config_err)?;
    let path = job.path()?;
    let result = band_structure(&job.model, &path, backend, &run.vqd(), job.seed, args.workers).map_err(runtime_err)?;

    for rec in &result.records {
        println!("{}", summary_line(rec));
    }
    let header = job.header("vqd");
    write(&job.out.join(VQD_FILE), &result.table.to_csv(&header))?;
    let sidecar = TrialsFile {
        config_hash: job.hash.clone(),
        seed: job.seed,
        tier: run.tier,
        n_bands: job.model.n_orbitals(),
        records: result.records,
    };
    let json = serde_json::to_string_pretty(&sidecar).map_err(runtime_err)?;
    write(&job.out.join(TRIALS_FILE), &json)?;

    let failed = sidecar.records.iter().filter(|r| r.error.is_some()).count();
    if failed == sidecar.records.len() && failed > 0 {
        return Err(runtime_err(anyhow!("every k-point failed")));
    }
    if failed > 0 {
        log::warn!("{failed} of {} k-points failed and were left empty", sidecar.records.len());
    }
    Ok(())
}

fn summary_line(rec: &KRecord) -> String {
    let label = rec.label.as_deref().unwrap_or("-");
    match &rec.solution {
        Some(sol) => {
            let medians: Vec<String> = sol.bands.iter().map(|b| format!("{:.6}", b.median_energy())).collect();
            let means: Vec<String> = sol.bands.iter().map(|b| format!("{:.6}", b.stats().mean)).collect();
            format!(
                "k {:>3} {label:>2} d={:.4} median [{}] mean [{}]",
                rec.k_index,
                rec.distance,
                medians.join(", "),
                means.join(", ")
            )
        }
        None => format!(
            "k {:>3} {label:>2} d={:.4} failed: {}",
            rec.k_index,
            rec.distance,
            rec.error.as_deref().unwrap_or("unknown")
        ),
    }
}

/// Per-band output of `refine`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedBand {
    pub band: usize,
    pub energy: f64,
    pub phase: f64,
    pub bits: Vec<u8>,
    pub confidence: Vec<f64>,
    pub grid_spacing: f64,
    pub trotter_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedPoint {
    pub k_index: usize,
    pub bounds: (f64, f64),
    pub bands: Vec<RefinedBand>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineFile {
    pub config_hash: String,
    pub seed: u64,
    pub tier: Tier,
    pub qpe: QpeConfig,
    pub points: Vec<RefinedPoint>,
}

pub fn cmd_refine(args: &JobArgs, trials: Option<&Path>) -> Result<(), Failure> {
    let job = Job::load(args, true)?;
    let run = job.effective_run();
    let qpe = run
        .qpe
        .clone()
        .ok_or_else(|| config_err(anyhow!("the run config has no [qpe] block")))?;
    qpe.validate().map_err(config_err)?;
    if run.tier.is_noisy() {
        return Err(config_err(anyhow!(
            "phase estimation runs on the statevector or sampling tier, not '{}'",
            run.tier
        )));
    }
    let trials_path = trials.map(Path::to_path_buf).unwrap_or_else(|| job.out.join(TRIALS_FILE));
    let text = fs::read_to_string(&trials_path)
        .with_context(|| format!("trials file {} (run `qbands vqd` first)", trials_path.display()))
        .map_err(config_err)?;
    let sidecar: TrialsFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", trials_path.display()))
        .map_err(config_err)?;
    if sidecar.n_bands != job.model.n_orbitals() {
        return Err(config_err(anyhow!(
            "trials file has {} bands but the model has {} orbitals",
            sidecar.n_bands,
            job.model.n_orbitals()
        )));
    }

    let tier = run.tier;
    let seed = job.seed;
    let model = &job.model;
    let points: Vec<RefinedPoint> = parallel_map(&sidecar.records, args.workers, |rec| refine_point(model, rec, &qpe, tier, seed));

    let rows: Vec<BandRow> = sidecar
        .records
        .iter()
        .zip(&points)
        .map(|(rec, p)| {
            let point = KPoint {
                k: rec.k,
                distance: rec.distance,
                label: rec.label.clone(),
            };
            match &p.error {
                None => BandRow::new(
                    rec.k_index,
                    &point,
                    p.bands.iter().map(|b| BandEnergy::plain(b.energy, Provenance::QpeRefined)).collect(),
                ),
                Some(e) => BandRow::failed(rec.k_index, &point, e.clone()),
            }
        })
        .collect();
    let table = BandTable::new(sidecar.n_bands, rows);
    write(&job.out.join(REFINED_FILE), &table.to_csv(&job.header("refine")))?;
    let details = RefineFile {
        config_hash: job.hash.clone(),
        seed,
        tier,
        qpe,
        points,
    };
    write(
        &job.out.join(REFINE_DETAILS_FILE),
        &serde_json::to_string_pretty(&details).map_err(runtime_err)?,
    )?;
    if details.points.iter().all(|p| p.error.is_some()) && !details.points.is_empty() {
        return Err(runtime_err(anyhow!("every k-point failed")));
    }
    Ok(())
}

fn refine_point(model: &TightBindingModel, rec: &KRecord, qpe: &QpeConfig, tier: Tier, seed: u64) -> RefinedPoint {
    let mut out = RefinedPoint {
        k_index: rec.k_index,
        bounds: (0.0, 0.0),
        bands: Vec::new(),
        error: None,
    };
    let Some(sol) = &rec.solution else {
        out.error = Some(format!("no VQD solution: {}", rec.error.as_deref().unwrap_or("unknown")));
        return out;
    };
    let (mut lo, mut hi) = (sol.beta.e_min, sol.beta.e_max);
    if hi - lo < MIN_WINDOW {
        lo -= 0.5;
        hi += 0.5;
    }
    out.bounds = (lo, hi);
    let result = (|| -> qbands::Result<Vec<RefinedBand>> {
        let h = map_hamiltonian(&model.bloch_matrix(rec.k)?)?;
        sol.bands
            .iter()
            .map(|band| {
                let mut rng = rng_from_seed(job_seed(seed, Stream::Qpe, rec.k_index, band.band, 0));
                let r = refine_level(&band.representative_trial().params, &h, (lo, hi), qpe, tier, &mut rng)?;
                Ok(RefinedBand {
                    band: band.band,
                    energy: r.energy,
                    phase: r.estimate.phase,
                    bits: r.estimate.bits,
                    confidence: r.estimate.confidence,
                    grid_spacing: r.grid_spacing,
                    trotter_bound: r.trotter_bound,
                })
            })
            .collect()
    })();
    match result {
        Ok(bands) => out.bands = bands,
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

pub fn cmd_plotdata(inputs: &[PathBuf], out: &Path) -> Result<(), Failure> {
    if inputs.is_empty() {
        return Err(config_err(anyhow!("plotdata needs at least one input table")));
    }
    let mut rows = Vec::new();
    let mut hasher = Sha256::new();
    let mut seeds = Vec::new();
    for p in inputs {
        let text = fs::read_to_string(p)
            .with_context(|| format!("reading {}", p.display()))
            .map_err(config_err)?;
        hasher.update(text.as_bytes());
        hasher.update(b"\0");
        let parsed = if p.extension().is_some_and(|e| e == "json") {
            let t: TrialsFile = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", p.display()))
                .map_err(config_err)?;
            seeds.push(t.seed.to_string());
            plot::rows_from_trials(&t.records)
        } else {
            let table = BandTable::from_csv(&text)
                .with_context(|| format!("parsing {}", p.display()))
                .map_err(config_err)?;
            if let Some(s) = plot::header_value(&text, "seed") {
                seeds.push(s);
            }
            plot::rows_from_table(&table)
        };
        rows.extend(parsed);
    }
    seeds.dedup();
    let seed = match seeds.as_slice() {
        [] => "none".to_string(),
        [s] => s.clone(),
        _ => "mixed".to_string(),
    };
    fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))
        .map_err(config_err)?;
    let header = vec![
        format!("qbands {} plotdata", env!("CARGO_PKG_VERSION")),
        format!("config_hash: sha256:{}", hex::encode(hasher.finalize())),
        format!("seed: {seed}"),
    ];
    write(&out.join(PLOT_FILE), &plot::to_csv(&rows, &header))
}

/// Applies `f` to every item on up to `workers` threads; results keep input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every item ran"))
        .collect()
}
