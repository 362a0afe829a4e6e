//! Scene files and resolved run configurations.
//!
//! A scene is a TOML document:
//!
//! ```toml
//! order = 10
//!
//! [material]
//! kappa_p = 1.0471975511965976
//! kappa_s = 1.9634954084936207
//! # omega = 1.0
//!
//! [[particle]]
//! center = [5.0, 0.0, 0.0]
//! radius = 0.5
//! # smatrix = "blocks.esmx"   (relative to the scene file)
//!
//! [incident]                 # forward task
//! direction = [0.0, 0.0, 1.0]
//! polarization = [1.0, 0.0, 0.0]
//!
//! [imaging]                  # image task, all optional
//! lo = [-1.0, -4.0, -4.0]
//! hi = [9.0, 4.0, 4.0]
//! spacing = 0.2
//! slice_z = 0.0
//!
//! [asymptotics]              # asymptotics task
//! radius = 0.02
//! orders = [0, 1, 2]
//!
//! [selective]                # selective task
//! separations = [5.0, 10.0, 20.0]   # in shear wavelengths
//! polarizabilities = [[1.0, 2.0, 3.0], [2.0, 1.5, 0.5]]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Forward,
    Operator,
    Image,
    Asymptotics,
    Selective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub kappa_p: f64,
    pub kappa_s: f64,
    #[serde(default = "one")]
    pub omega: f64,
}

fn one() -> f64 {
    1.0
}

fn default_order() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSpec {
    pub center: [f64; 3],
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smatrix: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidentSpec {
    pub direction: [f64; 3],
    pub polarization: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ImagingSpec {
    pub lo: Option<[f64; 3]>,
    pub hi: Option<[f64; 3]>,
    pub spacing: Option<f64>,
    pub slice_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsSpec {
    pub radius: f64,
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
}

fn default_orders() -> Vec<usize> {
    vec![0, 1, 2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectiveSpec {
    pub separations: Vec<f64>,
    pub polarizabilities: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub material: MaterialSpec,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default, rename = "particle")]
    pub particles: Vec<ParticleSpec>,
    pub incident: Option<IncidentSpec>,
    #[serde(default)]
    pub imaging: ImagingSpec,
    pub asymptotics: Option<AsymptoticsSpec>,
    pub selective: Option<SelectiveSpec>,
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("scene: {e}")))
    }
}

/// Everything a run depends on, after defaults and flag overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scene_path: PathBuf,
    pub scene: SceneFile,
    pub task: Task,
    pub tol: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    pub noise: f64,
    pub seed: u64,
    pub cutoff: f64,
    pub out: PathBuf,
}

impl RunConfig {
    /// Reads the scene file and checks task-specific requirements.
    #[allow(clippy::too_many_arguments)]
    pub fn load(
        scene_path: &Path,
        task: Task,
        tol: f64,
        n_theta: usize,
        n_phi: usize,
        noise: f64,
        seed: u64,
        cutoff: f64,
        out: PathBuf,
    ) -> Result<Self, CliError> {
        if !scene_path.is_file() {
            return Err(CliError::Config(format!("scene file {} not found", scene_path.display())));
        }
        let text = std::fs::read_to_string(scene_path).map_err(|e| CliError::io(scene_path, e))?;
        let cfg = RunConfig {
            scene_path: scene_path.to_path_buf(),
            scene: SceneFile::parse(&text)?,
            task,
            tol,
            n_theta,
            n_phi,
            noise,
            seed,
            cutoff,
            out,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad("--tol must lie in (0, 1)");
        }
        if self.n_theta < 2 || self.n_phi < 3 {
            return bad("direction grid needs at least 2 polar and 3 azimuthal points");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("--noise must be a nonnegative number");
        }
        if !self.cutoff.is_finite() {
            return bad("--cutoff must be finite");
        }
        let m = &self.scene.material;
        if !(m.kappa_p > 0.0 && m.kappa_s > m.kappa_p && m.omega > 0.0) {
            return bad("material needs 0 < kappa_p < kappa_s and omega > 0");
        }
        if self.scene.order < 1 {
            return bad("order must be at least 1");
        }
        for (l, p) in self.scene.particles.iter().enumerate() {
            if let Some(f) = &p.smatrix {
                let path = self.resolve(f);
                if !path.is_file() {
                    return Err(CliError::Config(format!(
                        "particle {l}: scattering-matrix file {} not found",
                        path.display()
                    )));
                }
            }
        }
        match self.task {
            Task::Forward if self.scene.incident.is_none() => bad("task forward needs an [incident] table"),
            Task::Forward | Task::Operator | Task::Image if self.scene.particles.is_empty() => {
                bad("this task needs at least one [[particle]]")
            }
            Task::Asymptotics if self.scene.asymptotics.is_none() => {
                bad("task asymptotics needs an [asymptotics] table")
            }
            Task::Selective => match &self.scene.selective {
                None => bad("task selective needs a [selective] table"),
                Some(s) if s.polarizabilities.len() < 2 || s.separations.is_empty() => {
                    bad("[selective] needs two or more polarizabilities and at least one separation")
                }
                _ => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Path relative to the scene file's directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.scene_path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }

    /// SHA-256 over the canonical JSON of the run-relevant settings (the
    /// output directory and scene path are excluded).
    pub fn hash(&self) -> String {
        let canon = serde_json::json!({
            "scene": self.scene,
            "task": self.task,
            "tol": self.tol,
            "n_theta": self.n_theta,
            "n_phi": self.n_phi,
            "noise": self.noise,
            "seed": self.seed,
            "cutoff": self.cutoff,
        });
        hex::encode(Sha256::digest(canon.to_string().as_bytes()))
    }
}
