//! Run configuration, read from TOML.
//!
//! ```toml
//! electrons = 2
//! seed = 7
//! output_dir = "out"
//!
//! [system]
//! kind = "hubbard"          # hubbard | pairing | fcidump
//! sites = 2
//! hopping = 1.0
//! repulsion = 4.0
//!
//! [partition]
//! auto-homo-lumo = [1, 1]   # or occ-inactive / occ-active / virt-active / virt-inactive
//!
//! [[tasks]]
//! name = "fci"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use downfold::fock_space::{build_basis, FockBasis, SpinOrbitalPartition};
use downfold::imaginary_time::{Stepper, DEFAULT_MAX_STEPS, DEFAULT_TOLERANCE};
use downfold::operators::{hamiltonian_from_integrals, read_fcidump, IntegralSet, QOperator};
use downfold::sweeps::SweepOrdering;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub electrons: usize,
    pub partition: PartitionConfig,
    #[serde(default)]
    pub tasks: Vec<TaskConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitalBasis {
    /// Tight-binding eigenorbitals, ordered by energy.
    #[default]
    Mo,
    Site,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemConfig {
    Hubbard {
        sites: usize,
        hopping: f64,
        repulsion: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        onsite: Vec<f64>,
        #[serde(default)]
        basis: OrbitalBasis,
    },
    Pairing {
        levels: usize,
        coupling: f64,
    },
    /// Spatial-orbital FCIDUMP; a relative path is resolved against the
    /// directory of the configuration file.
    Fcidump {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PartitionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto_homo_lumo: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occ_inactive: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occ_active: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub virt_active: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub virt_inactive: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FciParams {
    pub roots: usize,
}

impl Default for FciParams {
    fn default() -> Self {
        Self { roots: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterParams {
    pub round_trip_tolerance: f64,
    pub residual_tolerance: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            round_trip_tolerance: 1e-10,
            residual_tolerance: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub ordering: SweepOrdering,
    pub tolerance: f64,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            ordering: SweepOrdering::default(),
            tolerance: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DownfoldParams {
    pub tolerance: f64,
}

impl Default for DownfoldParams {
    fn default() -> Self {
        Self { tolerance: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagateParams {
    pub dt: f64,
    pub nsteps: usize,
    /// Truncation order of the derivative-of-exponential series.
    #[serde(alias = "K")]
    pub order: usize,
    /// Strength of the occupied–virtual one-body coupling whose removal
    /// starts the dynamics (the initial state is the coupled ground state).
    pub bias: f64,
    pub tolerance: f64,
}

impl Default for PropagateParams {
    fn default() -> Self {
        Self {
            dt: 0.01,
            nsteps: 500,
            order: 12,
            bias: 1.0,
            tolerance: 1e-5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImagtimeParams {
    pub dtau: f64,
    pub tolerance: f64,
    pub max_steps: usize,
    pub stepper: Stepper,
    pub energy_tolerance: f64,
}

impl Default for ImagtimeParams {
    fn default() -> Self {
        Self {
            dtau: 0.1,
            tolerance: DEFAULT_TOLERANCE,
            max_steps: DEFAULT_MAX_STEPS,
            stepper: Stepper::default(),
            energy_tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EccParams {
    pub configurations: usize,
    /// Bound on real and imaginary parts of every random amplitude.
    pub scale: f64,
    pub tolerance: f64,
}

impl Default for EccParams {
    fn default() -> Self {
        Self {
            configurations: 100,
            scale: 0.07,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyParams {
    /// Random configurations per randomized identity.
    pub configurations: usize,
}

impl Default for VerifyParams {
    fn default() -> Self {
        Self { configurations: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum TaskConfig {
    Fci(FciParams),
    Cluster(ClusterParams),
    Sweep(SweepParams),
    Downfold(DownfoldParams),
    Propagate(PropagateParams),
    Imagtime(ImagtimeParams),
    Ecc(EccParams),
    VerifyAll(VerifyParams),
}

impl TaskConfig {
    pub fn name(&self) -> &'static str {
        match self {
            TaskConfig::Fci(_) => "fci",
            TaskConfig::Cluster(_) => "cluster",
            TaskConfig::Sweep(_) => "sweep",
            TaskConfig::Downfold(_) => "downfold",
            TaskConfig::Propagate(_) => "propagate",
            TaskConfig::Imagtime(_) => "imagtime",
            TaskConfig::Ecc(_) => "ecc",
            TaskConfig::VerifyAll(_) => "verify-all",
        }
    }
}

/// Problems with the configuration or its inputs; the driver exits with 2.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Syntax(#[from] toml::de::Error),
    #[error("no tasks")]
    NoTasks,
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    System(#[from] downfold::Error),
}

/// Everything a task needs about the physical system.
#[derive(Clone, Debug)]
pub struct SystemData {
    pub integrals: IntegralSet,
    pub basis: FockBasis,
    pub h: QOperator,
    pub part: SpinOrbitalPartition,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        if cfg.tasks.is_empty() {
            return Err(ConfigError::NoTasks);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        if let SystemConfig::Fcidump { path: p } = &mut cfg.system {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Builds integrals, basis, Hamiltonian and partition, checking that
    /// they fit together.
    pub fn build_system(&self) -> Result<SystemData, ConfigError> {
        let integrals = match &self.system {
            SystemConfig::Hubbard {
                sites,
                hopping,
                repulsion,
                onsite,
                basis,
            } => match basis {
                OrbitalBasis::Mo => IntegralSet::hubbard_mo(*sites, *hopping, *repulsion, onsite)?,
                OrbitalBasis::Site => IntegralSet::hubbard(*sites, *hopping, *repulsion, onsite)?,
            },
            SystemConfig::Pairing { levels, coupling } => IntegralSet::pairing(*levels, *coupling)?,
            SystemConfig::Fcidump { path } => {
                let (ints, header) = read_fcidump(path)?;
                if header.nelec != 0 && header.nelec != self.electrons {
                    return Err(ConfigError::Invalid(format!(
                        "FCIDUMP declares NELEC={} but the configuration asks for {} electrons",
                        header.nelec, self.electrons
                    )));
                }
                ints
            }
        };
        let m = integrals.n_orbitals();
        if self.electrons > m {
            return Err(ConfigError::Invalid(format!("{} electrons do not fit in {m} spin-orbitals", self.electrons)));
        }
        let basis = build_basis(m, self.electrons)?;
        let part = self.build_partition(m)?;
        let h = hamiltonian_from_integrals(&integrals, &basis)?;
        Ok(SystemData {
            integrals,
            basis,
            h,
            part,
        })
    }

    fn build_partition(&self, m: usize) -> Result<SpinOrbitalPartition, ConfigError> {
        let p = &self.partition;
        let explicit = [&p.occ_inactive, &p.occ_active, &p.virt_active, &p.virt_inactive];
        match (p.auto_homo_lumo, explicit.iter().any(|x| x.is_some())) {
            (Some([no, nv]), false) => Ok(SpinOrbitalPartition::auto_homo_lumo(m, self.electrons, no, nv)?),
            (None, true) => {
                let get = |x: &Option<Vec<usize>>| x.clone().unwrap_or_default();
                let part = SpinOrbitalPartition::new_unordered(
                    m,
                    get(&p.occ_inactive),
                    get(&p.occ_active),
                    get(&p.virt_active),
                    get(&p.virt_inactive),
                )?;
                if part.n_electrons() != self.electrons {
                    return Err(ConfigError::Invalid(format!(
                        "partition holds {} occupied spin-orbitals but the system has {} electrons",
                        part.n_electrons(),
                        self.electrons
                    )));
                }
                Ok(part)
            }
            (Some(_), true) => Err(ConfigError::Invalid(
                "partition gives both auto-homo-lumo and explicit index sets".into(),
            )),
            (None, false) => Err(ConfigError::Invalid("partition is empty".into())),
        }
    }
}
