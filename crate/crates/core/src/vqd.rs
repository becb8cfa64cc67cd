//! Variational deflation: levels are found one at a time, each new search
//! penalized by its overlap with the states already found.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::backend::{rng_from_seed, Backend, Rng64, DEFAULT_SHOTS};
use crate::bands::{median, BandEnergy, BandRow, BandTable, Provenance, TrialStats};
use crate::circuit::{adjoint, build_ansatz, AnsatzSpec, Circuit};
use crate::error::{Error, Result};
use crate::estimation::{EnergyEstimate, Estimator, MeasuredOperator};
use crate::mitigation::ZneSchedule;
use crate::optimize::{maximize, minimize, OptimizationResult, OptimizerConfig};
use crate::pauli::{map_hamiltonian, omega0, PauliSum};
use crate::seed::{fold, job_seed, Stream};
use crate::tightbinding::{KPath, TightBindingModel, Vec3};

/// Penalty weight used when the spectrum looks flat.
pub const FALLBACK_BETA: f64 = 1.0;
const FLAT_SPECTRUM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqdConfig {
    pub shots: u64,
    pub trials: usize,
    /// beta = beta_factor * (E_max - E_0).
    pub beta_factor: f64,
    pub optimizer: OptimizerConfig,
    pub zne: ZneSchedule,
    pub trial_mode: TrialMode,
}

impl Default for VqdConfig {
    fn default() -> Self {
        Self {
            shots: DEFAULT_SHOTS,
            trials: 1,
            beta_factor: 2.0,
            optimizer: OptimizerConfig::default(),
            zne: ZneSchedule::default(),
            trial_mode: TrialMode::default(),
        }
    }
}

impl VqdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.beta_factor >= 1.0) {
            return Err(Error::Config(format!("beta_factor must be >= 1, got {}", self.beta_factor)));
        }
        if self.shots == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        self.zne.validate()?;
        self.optimizer.validate(0)
    }
}

/// A level already found, with the inverse of its preparation circuit.
#[derive(Debug, Clone)]
pub struct FoundLevel {
    pub params: Vec<f64>,
    pub energy: f64,
    unprepare: Circuit,
}

/// Base Hamiltonian plus the deflation terms accumulated so far.
#[derive(Debug, Clone)]
pub struct DeflationState {
    base: MeasuredOperator,
    omega: MeasuredOperator,
    levels: Vec<FoundLevel>,
    beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostBreakdown {
    pub total: f64,
    pub base: EnergyEstimate,
    pub overlaps: Vec<EnergyEstimate>,
}

impl CostBreakdown {
    /// Measurement ensembles used by this evaluation.
    pub fn groups(&self) -> usize {
        self.base.groups + self.overlaps.iter().map(|o| o.groups).sum::<usize>()
    }
}

impl DeflationState {
    pub fn new(h: PauliSum, beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        let n = h.n_qubits();
        Ok(Self {
            base: MeasuredOperator::new(h),
            omega: MeasuredOperator::new(omega0(n)),
            levels: Vec::new(),
            beta,
        })
    }

    pub fn n_orbitals(&self) -> usize {
        self.base.sum().n_qubits()
    }

    pub fn base(&self) -> &MeasuredOperator {
        &self.base
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn levels(&self) -> &[FoundLevel] {
        &self.levels
    }

    pub fn push_level(&mut self, params: Vec<f64>, energy: f64) -> Result<()> {
        let spec = AnsatzSpec::new(self.n_orbitals(), params.clone())?;
        self.levels.push(FoundLevel {
            params,
            energy,
            unprepare: adjoint(&build_ansatz(&spec)),
        });
        Ok(())
    }

    /// Base energy plus `beta * |<psi_l|psi(theta)>|^2` for every found level.
    pub fn cost(&self, theta: &[f64], est: &Estimator, rng: &mut Rng64) -> Result<CostBreakdown> {
        let prep = build_ansatz(&AnsatzSpec::new(self.n_orbitals(), theta.to_vec())?);
        let base = est.estimate(&prep, &self.base, rng)?;
        let mut total = base.value;
        let mut overlaps = Vec::with_capacity(self.levels.len());
        for level in &self.levels {
            let o = est.estimate(&prep.then(&level.unprepare)?, &self.omega, rng)?;
            total += self.beta * o.value;
            overlaps.push(o);
        }
        Ok(CostBreakdown { total, base, overlaps })
    }

    /// Base-Hamiltonian energy only.
    pub fn energy(&self, theta: &[f64], est: &Estimator, rng: &mut Rng64) -> Result<EnergyEstimate> {
        let prep = build_ansatz(&AnsatzSpec::new(self.n_orbitals(), theta.to_vec())?);
        est.estimate(&prep, &self.base, rng)
    }
}

/// Runs the optimizer on a fallible objective; the first error aborts the
/// search and is returned.
fn optimize_checked(
    mut objective: impl FnMut(&[f64]) -> Result<f64>,
    dim: usize,
    config: &OptimizerConfig,
    maximizing: bool,
) -> Result<OptimizationResult> {
    let mut failure: Option<Error> = None;
    let f = |x: &[f64]| {
        if failure.is_some() {
            return f64::NAN;
        }
        match objective(x) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        }
    };
    let r = if maximizing {
        maximize(f, dim, config)?
    } else {
        minimize(f, dim, config)?
    };
    match failure {
        Some(e) => Err(e),
        None => Ok(r),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaCalibration {
    pub e_max: f64,
    pub e_min: f64,
    pub beta: f64,
    /// The spectrum looked flat and the fallback weight was used.
    pub fallback: bool,
}

/// Seeds for one k-point job.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JobSeeds {
    pub master: u64,
    pub k_index: usize,
}

impl JobSeeds {
    pub fn seed(&self, stream: Stream, level: usize, trial: usize) -> u64 {
        job_seed(self.master, stream, self.k_index, level, trial)
    }
}

/// Maximizes, then minimizes, the undeflated energy and sets
/// `beta = beta_factor * (E_max - E_0)`.
pub fn calibrate_beta(h: &PauliSum, est: &Estimator, config: &VqdConfig, seeds: JobSeeds) -> Result<BetaCalibration> {
    let state = DeflationState::new(h.clone(), FALLBACK_BETA)?;
    let dim = AnsatzSpec::n_params(h.n_qubits());
    let extreme = |stream: Stream, maximizing: bool| -> Result<f64> {
        let mut rng = rng_from_seed(seeds.seed(stream, 0, 1));
        let opt = OptimizerConfig {
            seed: seeds.seed(stream, 0, 0),
            stochastic: !est.backend().tier.is_exact(),
            ..config.optimizer.clone()
        };
        let r = optimize_checked(|x| Ok(state.energy(x, est, &mut rng)?.value), dim, &opt, maximizing)?;
        Ok(state.energy(&r.x, est, &mut rng)?.value)
    };
    let e_max = extreme(Stream::BetaMax, true)?;
    let e_min = extreme(Stream::BetaMin, false)?;
    let delta = e_max - e_min;
    if delta <= FLAT_SPECTRUM {
        warn!("spectral width {delta:e} is not positive; using beta = {FALLBACK_BETA} eV");
        return Ok(BetaCalibration {
            e_max,
            e_min,
            beta: FALLBACK_BETA,
            fallback: true,
        });
    }
    Ok(BetaCalibration {
        e_max,
        e_min,
        beta: config.beta_factor * delta,
        fallback: false,
    })
}

/// How repeated optimizations are organized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialMode {
    /// Every trial is a complete deflation run over all levels; each run's
    /// energies are sorted and band statistics are taken across runs.
    #[default]
    Chains,
    /// Every level runs all trials and deflates with the lowest-cost one.
    BestOfLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// Position in the deflation sequence where this state was found.
    pub level: usize,
    /// Seed of the initial point that produced `params`.
    pub seed: u64,
    /// Fresh starts taken because earlier optimizations settled on a found
    /// level.
    #[serde(default)]
    pub restarts: usize,
    pub params: Vec<f64>,
    /// Deflated cost as recorded by the optimizer.
    pub cost: f64,
    /// Fresh base-Hamiltonian estimate at `params`.
    pub energy: f64,
    pub variance: f64,
    /// Summed over all starts.
    pub evaluations: usize,
    pub converged: bool,
    /// Measurement ensembles per cost evaluation at this level.
    pub groups: usize,
}

/// All trial results attributed to one band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRecord {
    pub band: usize,
    /// Index into `trials` of the state used downstream (refinement).
    pub representative: usize,
    pub trials: Vec<TrialRecord>,
}

impl BandRecord {
    pub fn representative_trial(&self) -> &TrialRecord {
        &self.trials[self.representative]
    }

    pub fn energies(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.energy).collect()
    }

    pub fn stats(&self) -> TrialStats {
        TrialStats::from_samples(&self.energies()).expect("at least one trial")
    }

    /// Median over trials; the value reported for the band.
    pub fn median_energy(&self) -> f64 {
        median(&self.energies())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSolution {
    pub beta: BetaCalibration,
    /// Ascending by median energy.
    pub bands: Vec<BandRecord>,
}

/// Finds all `M` levels of `h`.
pub fn solve_k(h: &PauliSum, est: &Estimator, config: &VqdConfig, seeds: JobSeeds) -> Result<KSolution> {
    config.validate()?;
    let beta = calibrate_beta(h, est, config, seeds)?;
    solve_k_with_beta(h, est, config, seeds, beta)
}

pub fn solve_k_with_beta(
    h: &PauliSum,
    est: &Estimator,
    config: &VqdConfig,
    seeds: JobSeeds,
    beta: BetaCalibration,
) -> Result<KSolution> {
    let m = h.n_qubits();
    let groups: Vec<Vec<TrialRecord>> = match config.trial_mode {
        TrialMode::Chains => {
            let mut bands = vec![Vec::with_capacity(config.trials); m];
            for trial in 0..config.trials {
                let mut state = DeflationState::new(h.clone(), beta.beta)?;
                let mut chain = Vec::with_capacity(m);
                for level in 0..m {
                    let r = run_trial(&state, est, config, seeds, level, trial)?;
                    state.push_level(r.params.clone(), r.energy)?;
                    chain.push(r);
                }
                chain.sort_by(|a, b| a.energy.total_cmp(&b.energy));
                for (b, r) in chain.into_iter().enumerate() {
                    bands[b].push(r);
                }
            }
            bands
        }
        TrialMode::BestOfLevel => {
            let mut state = DeflationState::new(h.clone(), beta.beta)?;
            let mut levels = Vec::with_capacity(m);
            for level in 0..m {
                let trials = (0..config.trials)
                    .map(|t| run_trial(&state, est, config, seeds, level, t))
                    .collect::<Result<Vec<_>>>()?;
                let best = lowest_cost(&trials);
                state.push_level(trials[best].params.clone(), trials[best].energy)?;
                levels.push(trials);
            }
            levels
        }
    };
    let mut bands: Vec<BandRecord> = groups
        .into_iter()
        .map(|trials| {
            let representative = match config.trial_mode {
                TrialMode::Chains => closest_to_median(&trials),
                TrialMode::BestOfLevel => lowest_cost(&trials),
            };
            BandRecord {
                band: 0,
                representative,
                trials,
            }
        })
        .collect();
    bands.sort_by(|a, b| a.median_energy().total_cmp(&b.median_energy()));
    bands.iter_mut().enumerate().for_each(|(i, b)| b.band = i);
    Ok(KSolution {
        beta,
        bands,
    })
}

// A level whose optimum still overlaps the found levels this much has
// settled on one of them: with all weight on an earlier orbital the
// downstream angles drop out and every local move raises the penalty.
const TRAPPED_OVERLAP: f64 = 0.5;
const MAX_RESTARTS: usize = 4;

fn run_trial(
    state: &DeflationState,
    est: &Estimator,
    config: &VqdConfig,
    seeds: JobSeeds,
    level: usize,
    trial: usize,
) -> Result<TrialRecord> {
    let dim = AnsatzSpec::n_params(state.n_orbitals());
    let first_seed = seeds.seed(Stream::TrialInit, level, trial);
    let mut rng = rng_from_seed(seeds.seed(Stream::TrialEval, level, trial));
    let mut evaluations = 0;
    let mut kept: Option<TrialRecord> = None;
    for restart in 0..=MAX_RESTARTS {
        let init_seed = if restart == 0 { first_seed } else { fold(first_seed, &[restart as u64]) };
        let opt = OptimizerConfig {
            seed: init_seed,
            stochastic: !est.backend().tier.is_exact(),
            ..config.optimizer.clone()
        };
        let r = optimize_checked(|x| Ok(state.cost(x, est, &mut rng)?.total), dim, &opt, false)?;
        if !r.converged {
            log::debug!("k {} level {level} trial {trial}: evaluation budget exhausted", seeds.k_index);
        }
        evaluations += r.evaluations;
        let fresh = state.cost(&r.x, est, &mut rng)?;
        let overlap: f64 = fresh.overlaps.iter().map(|o| o.value).sum();
        let record = TrialRecord {
            trial,
            level,
            seed: init_seed,
            restarts: restart,
            params: r.x,
            cost: r.value,
            energy: fresh.base.value,
            variance: fresh.base.variance,
            evaluations,
            converged: r.converged,
            groups: fresh.groups(),
        };
        if kept.as_ref().is_none_or(|k| record.cost < k.cost) {
            kept = Some(record);
        }
        if overlap <= TRAPPED_OVERLAP {
            break;
        }
        log::debug!("k {} level {level} trial {trial}: overlap {overlap:.3} with found levels, restarting", seeds.k_index);
    }
    let mut kept = kept.expect("at least one attempt");
    kept.evaluations = evaluations;
    Ok(kept)
}

fn lowest_cost(trials: &[TrialRecord]) -> usize {
    trials
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost))
        .map(|(i, _)| i)
        .expect("trials >= 1")
}

fn closest_to_median(trials: &[TrialRecord]) -> usize {
    let m = median(&trials.iter().map(|t| t.energy).collect::<Vec<_>>());
    trials
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.energy - m).abs().total_cmp(&(b.1.energy - m).abs()))
        .map(|(i, _)| i)
        .expect("trials >= 1")
}

/// Raw per-k output, written next to the band table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KRecord {
    pub k_index: usize,
    pub k: Vec3,
    pub distance: f64,
    pub label: Option<String>,
    pub solution: Option<KSolution>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BandRun {
    pub table: BandTable,
    pub records: Vec<KRecord>,
}

/// Band energies in ascending order, each the median over its trials.
pub fn band_row(k_index: usize, point: &crate::tightbinding::KPoint, sol: &KSolution) -> BandRow {
    let energies: Vec<BandEnergy> = sol
        .bands
        .iter()
        .map(|l| BandEnergy {
            value: l.median_energy(),
            provenance: Provenance::Optimized,
            stats: Some(l.stats()),
        })
        .collect();
    BandRow::new(k_index, point, energies)
}

/// Builds the estimator for one k-point job.
pub fn job_estimator(backend: Backend, config: &VqdConfig, n_qubits: usize, seeds: JobSeeds) -> Result<Estimator> {
    let mut rng = rng_from_seed(seeds.seed(Stream::Calibration, 0, 0));
    Estimator::for_tier(backend, config.shots, config.zne.clone(), n_qubits, &mut rng)
}

/// Runs every k-point of `path` on `workers` threads; failures become gaps.
pub fn band_structure(
    model: &TightBindingModel,
    path: &KPath,
    backend: Backend,
    config: &VqdConfig,
    master_seed: u64,
    workers: usize,
) -> Result<BandRun> {
    config.validate()?;
    let m = model.n_orbitals();
    let points = path.points();
    let job = |k_index: usize| -> Result<KSolution> {
        let seeds = JobSeeds {
            master: master_seed,
            k_index,
        };
        let h = map_hamiltonian(&model.bloch_matrix(points[k_index].k)?)?;
        let est = job_estimator(backend, config, m, seeds)?;
        solve_k(&h, &est, config, seeds)
    };

    let results: Mutex<Vec<Option<Result<KSolution>>>> = Mutex::new((0..points.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers.max(1).min(points.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= points.len() {
                    break;
                }
                let r = job(i);
                results.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });

    let mut rows = Vec::with_capacity(points.len());
    let mut records = Vec::with_capacity(points.len());
    for (i, r) in results.into_inner().expect("no poisoned workers").into_iter().enumerate() {
        let p = &points[i];
        let mut rec = KRecord {
            k_index: i,
            k: p.k,
            distance: p.distance,
            label: p.label.clone(),
            solution: None,
            error: None,
        };
        match r.expect("every job ran") {
            Ok(sol) => {
                rows.push(band_row(i, p, &sol));
                rec.solution = Some(sol);
            }
            Err(e) => {
                warn!("k-point {i} failed: {e}");
                rows.push(BandRow::failed(i, p, e.to_string()));
                rec.error = Some(e.to_string());
            }
        }
        records.push(rec);
    }
    Ok(BandRun {
        table: BandTable::new(m, rows),
        records,
    })
}
