//! Experiment files.
//!
//! ```toml
//! pipeline = "med"        # oracle | med | rounding | end_to_end | scans
//! seed = 7
//! out = "out/tfim"        # relative to the config file
//!
//! [model]
//! family = "tfim"         # tfim | commuting_ising | random | free
//! # path = "chain6.toml"  # or a model file, see `lattice::parse_hamiltonian`
//!
//! [sweep]
//! radii = [1, 2, 3]
//! betas = [0.5, 1.0]
//! sites = [6]             # families only
//!
//! [solver]                # med::SolverOptions
//! tol = 1e-9
//!
//! [quadrature]            # petz::PetzOptions
//! tol = 1e-9
//!
//! [rounding]
//! mode = "oracle"         # or "med"
//! regularization = 1e-10
//!
//! [scan]
//! region = [2, 3]         # decay-scan region, default the middle half
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::lattice::{LocalHamiltonian, ModelSpec};
use crate::med::SolverOptions;
use crate::models::{commuting_ising_chain, free_chain, random_two_local_chain, transverse_ising};
use crate::petz::PetzOptions;
use crate::rounding::MarginalMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Oracle,
    Med,
    Rounding,
    EndToEnd,
    Scans,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Oracle => "oracle",
            Pipeline::Med => "med",
            Pipeline::Rounding => "rounding",
            Pipeline::EndToEnd => "end_to_end",
            Pipeline::Scans => "scans",
        }
    }

    fn uses_radii(self) -> bool {
        matches!(
            self,
            Pipeline::Med | Pipeline::Rounding | Pipeline::EndToEnd
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Tfim,
    CommutingIsing,
    Random,
    Free,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub path: Option<PathBuf>,
    pub family: Option<Family>,
    #[serde(default = "one")]
    pub coupling: f64,
    /// Defaults to 1 for tfim and 0.3 for commuting_ising.
    pub field: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub radii: Option<Vec<usize>>,
    pub betas: Option<Vec<f64>>,
    pub sites: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundingSection {
    pub mode: MarginalMode,
    pub regularization: Option<f64>,
    pub measure_doubled: bool,
}

impl Default for RoundingSection {
    fn default() -> Self {
        Self {
            mode: MarginalMode::Oracle,
            regularization: Some(1e-10),
            measure_doubled: true,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub region: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Pipeline,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub model: ModelSection,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub quadrature: PetzOptions,
    #[serde(default)]
    pub rounding: RoundingSection,
    #[serde(default)]
    pub scan: ScanSection,
    /// Write the solver convergence trace of every MED point.
    #[serde(default)]
    pub write_trace: bool,
}

fn one() -> f64 {
    1.0
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// One model instance of a sweep.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub model_id: String,
    pub beta: f64,
    pub hamiltonian: LocalHamiltonian,
}

impl SweepPoint {
    pub fn sites(&self) -> usize {
        self.hamiltonian.num_sites()
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config and resolves its relative paths against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = &cfg.model.path {
            if p.is_relative() {
                cfg.model.path = Some(base.join(p));
            }
        }
        if cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match (&self.model.path, self.model.family) {
            (Some(_), Some(_)) => {
                return bad("[model] takes either `path` or `family`, not both".into())
            }
            (None, None) => return bad("[model] needs `path` or `family`".into()),
            (Some(p), None) => {
                if !p.is_file() {
                    return bad(format!("model file {} does not exist", p.display()));
                }
                if self.sweep.sites.is_some() {
                    return bad("`sweep.sites` only applies to model families".into());
                }
            }
            (None, Some(_)) => {
                if self.sweep.sites.is_none() {
                    return bad("model families need `sweep.sites`".into());
                }
            }
        }
        for (name, empty) in [
            (
                "radii",
                self.sweep.radii.as_ref().is_some_and(Vec::is_empty),
            ),
            (
                "betas",
                self.sweep.betas.as_ref().is_some_and(Vec::is_empty),
            ),
            (
                "sites",
                self.sweep.sites.as_ref().is_some_and(Vec::is_empty),
            ),
        ] {
            if empty {
                return bad(format!("sweep list `{name}` is empty"));
            }
        }
        if self.pipeline.uses_radii() && self.sweep.radii.is_none() {
            return bad(format!(
                "pipeline {} needs `sweep.radii`",
                self.pipeline.name()
            ));
        }
        if self.radii().contains(&0) {
            return bad("shield radii must be positive".into());
        }
        if let Some(b) = self.betas().iter().find(|b| !b.is_finite() || **b < 0.0) {
            return bad(format!("invalid beta {b}"));
        }
        Ok(())
    }

    pub fn radii(&self) -> Vec<usize> {
        self.sweep.radii.clone().unwrap_or_default()
    }

    fn betas(&self) -> Vec<f64> {
        self.sweep.betas.clone().unwrap_or_default()
    }

    /// Every (N, β) model of the sweep.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        if let Some(path) = &self.model.path {
            let text = std::fs::read_to_string(path)?;
            let spec: ModelSpec = toml::from_str(&text)?;
            let stem = path
                .file_stem()
                .map_or_else(|| "model".to_string(), |s| s.to_string_lossy().into_owned());
            let betas = self.sweep.betas.clone().unwrap_or_else(|| vec![spec.beta]);
            return betas
                .into_iter()
                .map(|beta| {
                    let spec = ModelSpec {
                        beta,
                        ..spec.clone()
                    };
                    Ok(SweepPoint {
                        model_id: format!("{stem}_b{beta}"),
                        beta,
                        hamiltonian: spec.build()?,
                    })
                })
                .collect();
        }
        let family = self.model.family.expect("validated");
        let betas = self.sweep.betas.clone().unwrap_or_else(|| vec![1.0]);
        let mut out = Vec::new();
        for &n in self.sweep.sites.as_deref().unwrap_or_default() {
            for &beta in &betas {
                let (name, h) = match family {
                    Family::Tfim => (
                        "tfim",
                        transverse_ising(
                            crate::lattice::Lattice::chain(n)?,
                            beta,
                            self.model.coupling,
                            self.model.field.unwrap_or(1.0),
                        )?,
                    ),
                    Family::CommutingIsing => (
                        "ising",
                        commuting_ising_chain(
                            n,
                            beta,
                            self.model.coupling,
                            self.model.field.unwrap_or(0.3),
                        )?,
                    ),
                    Family::Random => ("random", random_two_local_chain(n, beta, self.seed)?),
                    Family::Free => ("free", free_chain(n)?),
                };
                out.push(SweepPoint {
                    model_id: format!("{name}_n{n}_b{beta}"),
                    beta,
                    hamiltonian: h,
                });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn family(pipeline: &str, sweep: &str) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig::parse(&format!(
            "pipeline = \"{pipeline}\"\n[model]\nfamily = \"tfim\"\n[sweep]\n{sweep}\n"
        ))?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn family_sweep_expands() {
        let cfg = family("med", "radii = [1, 2]\nbetas = [0.5, 1.0]\nsites = [4, 6]").unwrap();
        let ids: Vec<_> = cfg
            .points()
            .unwrap()
            .into_iter()
            .map(|p| p.model_id)
            .collect();
        assert_eq!(
            ids,
            ["tfim_n4_b0.5", "tfim_n4_b1", "tfim_n6_b0.5", "tfim_n6_b1"]
        );
    }

    #[test]
    fn empty_lists_are_rejected() {
        assert!(matches!(
            family("med", "radii = []\nsites = [4]"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            family("oracle", "sites = []"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            family("med", "sites = [4]"),
            Err(Error::Config(_))
        ));
        assert!(family("oracle", "sites = [4]").is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "pipeline = \"oracle\"\nbogus = 1\n[model]\nfamily = \"free\"\n";
        assert!(matches!(
            ExperimentConfig::parse(text),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn model_file_beta_override() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("pair.toml"),
            "beta = 2.0\n[lattice]\nextents = [2]\n[[term]]\nsites = [0, 1]\npauli = \"ZZ\"\n",
        )
        .unwrap();
        let cfg_path = dir.path().join("run.toml");
        std::fs::write(
            &cfg_path,
            "pipeline = \"oracle\"\n[model]\npath = \"pair.toml\"\n[sweep]\nbetas = [0.5]\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::load(&cfg_path).unwrap();
        let pts = cfg.points().unwrap();
        assert_eq!(pts[0].model_id, "pair_b0.5");
        let z = pts[0].hamiltonian.terms()[0].matrix()[(0, 0)].re;
        assert!((z - 0.5).abs() < 1e-15);
        assert_eq!(cfg.out, dir.path().join("out"));
    }
}
