//! TOML model and run files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, NoiseDescriptor, Tier, DEFAULT_SHOTS};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::mitigation::ZneSchedule;
use crate::optimize::OptimizerConfig;
use crate::qpe::QpeConfig;
use crate::tightbinding::{Hopping, KAnchor, KPath, Orbital, TightBindingModel, Vec3};
use crate::vqd::{TrialMode, VqdConfig};

/// An orbital referenced by index or by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrbitalRef {
    Index(usize),
    Label(String),
}

/// A hopping amplitude, real or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Real(f64),
    Complex([f64; 2]),
}

impl Amplitude {
    pub fn value(&self) -> C64 {
        match *self {
            Amplitude::Real(re) => C64::new(re, 0.0),
            Amplitude::Complex([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoppingEntry {
    pub from: OrbitalRef,
    pub to: OrbitalRef,
    /// Displacement in length units; zero for onsite terms.
    #[serde(default)]
    pub delta: Vec3,
    pub t: Amplitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_energy_unit")]
    pub energy_unit: String,
    #[serde(default = "default_length_unit")]
    pub length_unit: String,
    pub lattice_vectors: [Vec3; 3],
    pub orbitals: Vec<Orbital>,
    #[serde(default)]
    pub hoppings: Vec<HoppingEntry>,
    /// Add the conjugate partner of every listed hopping.
    #[serde(default)]
    pub close_hermitian: bool,
}

fn default_energy_unit() -> String {
    "eV".into()
}

fn default_length_unit() -> String {
    "angstrom".into()
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    fn resolve(&self, r: &OrbitalRef) -> Result<usize> {
        match r {
            OrbitalRef::Index(i) if *i < self.orbitals.len() => Ok(*i),
            OrbitalRef::Index(i) => Err(Error::InvalidModel(format!("orbital index {i} out of range"))),
            OrbitalRef::Label(l) => self
                .orbitals
                .iter()
                .position(|o| &o.label == l)
                .ok_or_else(|| Error::InvalidModel(format!("unknown orbital '{l}'"))),
        }
    }

    pub fn build(&self) -> Result<TightBindingModel> {
        if self.energy_unit != "eV" {
            return Err(Error::InvalidModel(format!("unsupported energy unit '{}'", self.energy_unit)));
        }
        if !matches!(self.length_unit.as_str(), "angstrom" | "Å" | "A") {
            return Err(Error::InvalidModel(format!("unsupported length unit '{}'", self.length_unit)));
        }
        let hoppings = self
            .hoppings
            .iter()
            .map(|h| Ok(Hopping::new(self.resolve(&h.to)?, self.resolve(&h.from)?, h.delta, h.t.value())))
            .collect::<Result<Vec<_>>>()?;
        let model = TightBindingModel::new(self.lattice_vectors, self.orbitals.clone(), hoppings)?;
        if self.close_hermitian {
            model.close_hermitian()
        } else if !model.is_closed() {
            Err(Error::NotClosed)
        } else {
            Ok(model)
        }
    }
}

/// How k-point anchors are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KFrame {
    /// Multiples of the reciprocal lattice vectors.
    #[default]
    Fractional,
    /// Cartesian components in inverse length units.
    Cartesian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KPathConfig {
    pub anchors: Vec<KAnchor>,
    #[serde(default)]
    pub frame: KFrame,
    /// Points strictly between consecutive anchors.
    pub interior_points: usize,
}

impl KPathConfig {
    pub fn resolve(&self, model: &TightBindingModel) -> Result<KPath> {
        let anchors = match self.frame {
            KFrame::Cartesian => self.anchors.clone(),
            KFrame::Fractional => {
                let b = model.reciprocal_vectors()?;
                self.anchors
                    .iter()
                    .map(|a| {
                        let k: Vec3 = std::array::from_fn(|i| (0..3).map(|j| a.k[j] * b[j][i]).sum());
                        KAnchor::new(a.label.clone(), k)
                    })
                    .collect()
            }
        };
        KPath::with_interior_points(anchors, self.interior_points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MitigationConfig {
    #[serde(default = "default_scales")]
    pub zne_scales: Vec<usize>,
}

fn default_scales() -> Vec<usize> {
    ZneSchedule::default().scales
}

impl Default for MitigationConfig {
    fn default() -> Self {
        Self {
            zne_scales: default_scales(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    /// Model file, relative to the run file's directory.
    pub model: Option<PathBuf>,
    pub tier: Tier,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_beta_factor")]
    pub beta_factor: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trial_mode: TrialMode,
    pub kpath: KPathConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub noise: Option<NoiseDescriptor>,
    #[serde(default)]
    pub mitigation: MitigationConfig,
    pub qpe: Option<QpeConfig>,
}

fn default_shots() -> u64 {
    DEFAULT_SHOTS
}

fn default_trials() -> usize {
    1
}

fn default_beta_factor() -> f64 {
    2.0
}

impl RunFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut run: Self = toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if let (Some(m), Some(dir)) = (&run.model, path.parent()) {
            if m.is_relative() {
                run.model = Some(dir.join(m));
            }
        }
        Ok(run)
    }

    pub fn vqd(&self) -> VqdConfig {
        VqdConfig {
            shots: self.shots,
            trials: self.trials,
            beta_factor: self.beta_factor,
            optimizer: self.optimizer.clone(),
            zne: ZneSchedule {
                scales: self.mitigation.zne_scales.clone(),
            },
            trial_mode: self.trial_mode,
        }
    }

    /// Checks cross-field rules and builds the backend.
    pub fn backend(&self) -> Result<Backend> {
        self.vqd().validate()?;
        let noise = match (self.tier.is_noisy(), self.noise) {
            (true, None) => {
                return Err(Error::Config(format!("tier '{}' needs a [noise] block", self.tier)))
            }
            (true, Some(n)) => n,
            (false, _) => NoiseDescriptor::NOISELESS,
        };
        if let Some(q) = &self.qpe {
            q.validate()?;
        }
        Backend::new(self.tier, noise)
    }
}
