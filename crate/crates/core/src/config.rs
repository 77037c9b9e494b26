//! Run configuration in TOML.
//!
//! A file names a preset and overrides any subset of its keys:
//!
//! ```toml
//! preset = "example_1d"      # example_1d | example_2d | custom
//!
//! [problem]                  # alpha, beta, gamma, p, s, a
//! gamma = 5.0
//!
//! [discretization]           # dim, domain, n, m, t_final, target, mesh_file
//! n = 65
//! m = 65
//!
//! [quadrature]               # regular, singular (Gauss points per direction)
//! [mm]                       # outer loop; [mm.newton] for the inner solver
//! [sweep]                    # support = "gamma" | "p", gamma, p, n, n_ref, checkpoints
//! [output]                   # dir, dump_fields
//! ```
//!
//! Every key is checked; unknown keys are rejected. `custom` has no
//! defaults, so every section except `sweep` and `output` must be complete.

use std::path::{Path, PathBuf};

use crate::analysis::{Experiment, PresetName, SweepParam, Target};
use crate::error::{Error, Result};
use crate::fracnorm::QuadConfig;
use crate::mm::MmConfig;
use crate::problem::Params;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    pub dim: usize,
    pub domain: (f64, f64),
    pub n: usize,
    pub m: usize,
    pub t_final: f64,
    pub target: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    pub support: SweepParam,
    pub gamma: Vec<f64>,
    pub p: Vec<f64>,
    pub n: Vec<usize>,
    pub n_ref: usize,
    pub checkpoints: Vec<usize>,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            support: SweepParam::Gamma,
            gamma: Vec::new(),
            p: Vec::new(),
            n: Vec::new(),
            n_ref: 0,
            checkpoints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub dir: PathBuf,
    pub dump_fields: bool,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            dump_fields: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: PresetName,
    pub problem: Params,
    pub discretization: Discretization,
    pub quadrature: QuadConfig,
    pub mm: MmConfig,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub output: Output,
}

impl RunConfig {
    pub fn for_preset(name: PresetName) -> Result<Self> {
        let e = Experiment::preset(name)?;
        let sweep = match name {
            PresetName::Example1d => Sweep {
                support: SweepParam::Gamma,
                gamma: vec![0.0, 1.0, 5.0, 10.0],
                n: vec![33, 65, 125],
                n_ref: 257,
                checkpoints: vec![10, 20, 30, 40, 50, 55],
                ..Sweep::default()
            },
            _ => Sweep {
                support: SweepParam::P,
                p: vec![1.0, 0.9, 0.7, 0.3, 0.1, 0.05],
                ..Sweep::default()
            },
        };
        Ok(Self::from_experiment(&e, MmConfig::default(), sweep))
    }

    pub fn from_experiment(e: &Experiment, mm: MmConfig, sweep: Sweep) -> Self {
        Self {
            preset: e.preset,
            problem: e.params,
            discretization: Discretization {
                dim: e.dim,
                domain: e.domain,
                n: e.n,
                m: e.m,
                t_final: e.t_final,
                target: e.target,
                mesh_file: e.mesh_file.clone(),
            },
            quadrature: e.quad,
            mm,
            sweep,
            output: Output::default(),
        }
    }

    pub fn experiment(&self) -> Experiment {
        let d = &self.discretization;
        Experiment {
            preset: self.preset,
            params: self.problem,
            dim: d.dim,
            domain: d.domain,
            n: d.n,
            m: d.m,
            t_final: d.t_final,
            target: d.target,
            mesh_file: d.mesh_file.clone(),
            quad: self.quadrature,
        }
    }

    /// Parse a configuration, filling unspecified keys from the preset.
    pub fn parse(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let preset = match user.get("preset") {
            None => return Err(Error::Parse("missing key `preset`".into())),
            Some(v) => PresetName::deserialize_value(v.clone())?,
        };
        let mut merged = match preset {
            PresetName::Custom => toml::Table::new(),
            name => toml::Table::try_from(Self::for_preset(name)?).map_err(|e| Error::Parse(e.to_string()))?,
        };
        merge(&mut merged, user);
        let cfg: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.mm.validate()?;
        let d = &self.discretization;
        if d.mesh_file.is_none() && !(d.dim == 1 || d.dim == 2) {
            return Err(Error::InvalidArgument(format!("discretization.dim = {} must be 1 or 2", d.dim)));
        }
        if d.n < 2 || d.m < 2 {
            return Err(Error::InvalidArgument("discretization.n and discretization.m must be at least 2".into()));
        }
        if !(d.t_final > 0.0) {
            return Err(Error::InvalidArgument("discretization.t_final must be positive".into()));
        }
        Ok(())
    }

    /// Fully explicit TOML; parsing it yields the same configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable in TOML")
    }
}

impl PresetName {
    fn deserialize_value(v: toml::Value) -> Result<Self> {
        v.try_into()
            .map_err(|e: toml::de::Error| Error::Parse(format!("key `preset`: {e}")))
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
