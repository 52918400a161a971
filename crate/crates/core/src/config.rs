//! Plain-text configuration shared by the CLI subcommands.
//!
//! The file is TOML. Every section and key is optional; unknown keys are
//! rejected.
//!
//! ```toml
//! [disorder]
//! kind = "uniform"          # or "tabulated"
//! a = -0.5
//! b = 0.5
//! # knots = [-1.0, 0.0, 1.0]
//! # density = [0.0, 1.0, 0.0]
//!
//! [operator]
//! convention = "hopping_only"   # or "with_diagonal"
//!
//! [resolvent]
//! direct_max_sites = 20000
//! residual_tol = 1e-10
//! gmres_restart = 60
//! max_iterations = 20000
//!
//! [moments]
//! n_samples = 2000
//! n_blocks = 20
//! seed = 1
//!
//! [criteria]
//! theorem = "theorem1"          # theorem2, single_site
//! s = 0.3333333333333333
//! c_s = 1.0
//! c_tilde_s = 1.0
//! constants_source = "..."      # required for a certified verdict
//! subsets = "auto"              # exhaustive, subboxes
//! max_exhaustive_sites = 16
//!
//! [region]
//! spec = "box:d=1,L=3"          # or "sites:0,0;1,0"
//!
//! [scan]
//! dim = 1
//! lambda = [10.0, 100.0]
//! energy = [0.0]
//! s = [0.3333333333333333]
//! L = [1, 2]
//! eta = 0.0
//! master_seed = 1
//! parallelism = 1
//!
//! [output]
//! csv = "scan.csv"
//! json = "scan.json"
//! checkpoint = "scan.checkpoint.jsonl"
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::criteria::{Criterion, CriterionConstants, SubsetStrategy};
use crate::disorder::{DisorderModel, Distribution};
use crate::error::{Error, Result};
use crate::lattice::{Region, RegionSpec};
use crate::moments::{EvalOptions, SamplingPlan};
use crate::operator::LaplacianConvention;
use crate::resolvent::SolverOptions;

/// Environment variable that overrides `scan.parallelism`.
pub const PARALLELISM_ENV: &str = "ANDERSON_CERTIFY_THREADS";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub disorder: DisorderSection,
    pub operator: OperatorSection,
    pub resolvent: SolverOptions,
    pub moments: MomentsSection,
    pub criteria: CriteriaSection,
    pub region: RegionSection,
    pub scan: ScanSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisorderSection {
    pub kind: String,
    pub a: f64,
    pub b: f64,
    pub knots: Vec<f64>,
    pub density: Vec<f64>,
}

impl Default for DisorderSection {
    fn default() -> Self {
        DisorderSection {
            kind: "uniform".into(),
            a: -0.5,
            b: 0.5,
            knots: Vec::new(),
            density: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSection {
    pub convention: LaplacianConvention,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentsSection {
    pub n_samples: usize,
    pub n_blocks: usize,
    pub seed: u64,
}

impl Default for MomentsSection {
    fn default() -> Self {
        MomentsSection {
            n_samples: 2000,
            n_blocks: SamplingPlan::DEFAULT_BLOCKS,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriteriaSection {
    pub theorem: String,
    pub s: f64,
    pub c_s: f64,
    pub c_tilde_s: f64,
    pub constants_source: Option<String>,
    pub subsets: String,
    pub max_exhaustive_sites: usize,
}

impl Default for CriteriaSection {
    fn default() -> Self {
        CriteriaSection {
            theorem: "theorem1".into(),
            s: 1.0 / 3.0,
            c_s: 1.0,
            c_tilde_s: 1.0,
            constants_source: None,
            subsets: "auto".into(),
            max_exhaustive_sites: SubsetStrategy::DEFAULT_MAX_EXHAUSTIVE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionSection {
    pub spec: String,
}

impl Default for RegionSection {
    fn default() -> Self {
        RegionSection {
            spec: "box:d=1,L=0".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub dim: usize,
    pub lambda: Vec<f64>,
    pub energy: Vec<f64>,
    pub s: Vec<f64>,
    #[serde(rename = "L")]
    pub l: Vec<u32>,
    pub eta: f64,
    pub master_seed: u64,
    pub parallelism: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection {
            dim: 1,
            lambda: Vec::new(),
            energy: Vec::new(),
            s: Vec::new(),
            l: Vec::new(),
            eta: 0.0,
            master_seed: 1,
            parallelism: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub checkpoint: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            csv: "scan.csv".into(),
            json: "scan.json".into(),
            checkpoint: "scan.checkpoint.jsonl".into(),
        }
    }
}

impl FromStr for Config {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        text.parse()
    }

    /// Loads `path` when given, defaults otherwise.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::from_path(p),
            None => Ok(Config::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.distribution()?;
        self.plan().validate()?;
        self.criterion()?;
        self.subset_kind()?;
        if !(self.resolvent.residual_tol > 0.0) || self.resolvent.gmres_restart == 0 {
            return Err(Error::Config("resolvent tolerances must be positive".into()));
        }
        let sc = &self.scan;
        if sc.dim == 0 {
            return Err(Error::Config("scan.dim must be at least 1".into()));
        }
        if sc.lambda.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Config("scan.lambda entries must be positive".into()));
        }
        if sc.s.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
            return Err(Error::Config("scan.s entries must lie in (0, 1)".into()));
        }
        if sc.energy.iter().any(|e| !e.is_finite()) || !sc.eta.is_finite() {
            return Err(Error::Config("scan energies must be finite".into()));
        }
        Ok(())
    }

    pub fn distribution(&self) -> Result<Distribution> {
        let d = &self.disorder;
        let dist = match d.kind.as_str() {
            "uniform" => Distribution::Uniform { a: d.a, b: d.b },
            "tabulated" => Distribution::Tabulated {
                knots: d.knots.clone(),
                density: d.density.clone(),
            },
            other => return Err(Error::Config(format!("unknown disorder kind '{other}'"))),
        };
        DisorderModel::new(dist.clone(), 1.0).map_err(|e| Error::Config(e.to_string()))?;
        Ok(dist)
    }

    pub fn model(&self, lambda: f64) -> Result<DisorderModel> {
        DisorderModel::new(self.distribution()?, lambda)
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            convention: self.operator.convention,
            solver: self.resolvent.clone(),
        }
    }

    pub fn plan(&self) -> SamplingPlan {
        SamplingPlan {
            n_samples: self.moments.n_samples,
            n_blocks: self.moments.n_blocks,
            seed: self.moments.seed,
        }
    }

    pub fn criterion(&self) -> Result<Criterion> {
        self.criteria.theorem.parse()
    }

    pub fn constants(&self, s: f64) -> Result<CriterionConstants> {
        let c = CriterionConstants::new(self.criteria.c_s, self.criteria.c_tilde_s, s)?;
        Ok(match &self.criteria.constants_source {
            Some(src) => c.with_source(src.clone()),
            None => c,
        })
    }

    fn subset_kind(&self) -> Result<Option<SubsetStrategy>> {
        let mut strategy = match self.criteria.subsets.as_str() {
            "auto" => return Ok(None),
            "exhaustive" => SubsetStrategy::exhaustive(),
            "subboxes" => SubsetStrategy::subboxes(),
            other => return Err(Error::Config(format!("unknown subset strategy '{other}'"))),
        };
        strategy.max_exhaustive_sites = self.criteria.max_exhaustive_sites;
        Ok(Some(strategy))
    }

    pub fn subset_strategy(&self, region: &Region) -> Result<SubsetStrategy> {
        Ok(self.subset_kind()?.unwrap_or_else(|| {
            let mut s = SubsetStrategy::automatic(region);
            s.max_exhaustive_sites = self.criteria.max_exhaustive_sites;
            s
        }))
    }

    pub fn region(&self) -> Result<Region> {
        self.region.spec.parse::<RegionSpec>()?.build()
    }

    /// Worker count: the environment override, else `scan.parallelism`.
    pub fn parallelism(&self) -> usize {
        std::env::var(PARALLELISM_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(self.scan.parallelism)
            .max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c: Config = "".parse().unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.plan().n_samples, 2000);
        assert_eq!(c.criterion().unwrap(), Criterion::Bulk);
    }

    #[test]
    fn doc_example_parses() {
        let text = r#"
[disorder]
kind = "tabulated"
knots = [-1.0, 0.0, 1.0]
density = [0.0, 1.0, 0.0]

[operator]
convention = "with_diagonal"

[moments]
n_samples = 200
n_blocks = 10
seed = 9

[criteria]
theorem = "theorem2"
subsets = "exhaustive"
constants_source = "table 3"

[region]
spec = "sites:0;1"

[scan]
lambda = [10.0]
energy = [0.0, 0.5]
s = [0.5]
L = [1, 2]
"#;
        let c: Config = text.parse().unwrap();
        assert_eq!(c.operator.convention, LaplacianConvention::WithDiagonal);
        assert_eq!(c.scan.l, vec![1, 2]);
        assert_eq!(c.region().unwrap().len(), 2);
        assert_eq!(c.constants(0.5).unwrap().source.as_deref(), Some("table 3"));
        assert_eq!(c.subset_strategy(&c.region().unwrap()).unwrap(), SubsetStrategy::exhaustive());
    }

    #[test]
    fn schema_errors() {
        for bad in [
            "[moments]\nn_samples = 50\n",
            "[disorder]\nkind = \"cauchy\"\n",
            "[disorder]\nwidth = 1.0\n",
            "[criteria]\ntheorem = \"theorem7\"\n",
            "[scan]\ns = [1.5]\n",
            "[scan]\nlambda = [-1.0]\n",
            "not toml at all [",
        ] {
            assert!(matches!(bad.parse::<Config>(), Err(Error::Config(_)) | Err(Error::InvalidParameter(_))), "{bad}");
        }
    }
}
