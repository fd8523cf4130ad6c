use std::path::{Path, PathBuf};

use mfirank::data::{LoanType, SchemaConfig};
use mfirank::eval::DEFAULT_MIN_SUPPORT;
use mfirank::features::{DurationPatterns, FeatureSet};
use mfirank::rank::{PageConstraint, TIE_EPS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::Failure;

/// Everything a run depends on. Loaded from JSON; every key is optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub conversions: Option<PathBuf>,
    pub products: Option<PathBuf>,
    pub clicks: Option<PathBuf>,
    pub loan_types: Vec<LoanType>,
    /// Features for the `features` and `rank` commands.
    pub features: FeatureSet,
    /// Features of the ranking replayed by `evaluate`.
    pub vra_features: FeatureSet,
    pub tie_eps: f64,
    pub damping: f64,
    pub min_support: u64,
    /// Only "iso" (Monday 00:00) is supported.
    pub week: String,
    pub out: PathBuf,
    pub schema: SchemaConfig,
    pub durations: DurationPatterns,
    pub page_constraints: Vec<PageConstraint>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            conversions: None,
            products: None,
            clicks: None,
            loan_types: vec![LoanType::Standard],
            features: FeatureSet::all(),
            vra_features: "rating,lar,epc".parse().expect("valid feature list"),
            tie_eps: TIE_EPS,
            damping: 0.0,
            min_support: DEFAULT_MIN_SUPPORT,
            week: "iso".into(),
            out: PathBuf::from("out"),
            schema: SchemaConfig::default(),
            durations: DurationPatterns::default(),
            page_constraints: Vec::new(),
        }
    }
}

/// Command-line values that win over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub features: Option<FeatureSet>,
    pub min_support: Option<u64>,
    pub damping: Option<f64>,
    pub loan_types: Option<Vec<LoanType>>,
    pub out: Option<PathBuf>,
}

impl PipelineConfig {
    /// Load `path` (or defaults), resolve relative paths in the file against
    /// its directory, apply overrides and check invariants.
    pub fn load(path: Option<&Path>, overrides: &Overrides, features_for_vra: bool) -> Result<Self, Failure> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", p.display())))?;
                let mut c: PipelineConfig = serde_json::from_str(&text)
                    .map_err(|e| Failure::usage(format!("invalid config {}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new(""));
                for slot in [&mut c.conversions, &mut c.products, &mut c.clicks] {
                    if let Some(rel) = slot.as_ref().filter(|q| q.is_relative()) {
                        *slot = Some(base.join(rel));
                    }
                }
                if c.out.is_relative() {
                    c.out = base.join(&c.out);
                }
                c
            }
            None => PipelineConfig::default(),
        };
        if let Some(f) = &overrides.features {
            if features_for_vra {
                config.vra_features = f.clone();
            } else {
                config.features = f.clone();
            }
        }
        if let Some(m) = overrides.min_support {
            config.min_support = m;
        }
        if let Some(d) = overrides.damping {
            config.damping = d;
        }
        if let Some(l) = &overrides.loan_types {
            config.loan_types = l.clone();
        }
        if let Some(o) = &overrides.out {
            config.out = o.clone();
        }
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<(), Failure> {
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Failure::usage(format!("damping must lie in [0, 1), got {}", self.damping)));
        }
        if !(self.tie_eps >= 0.0) {
            return Err(Failure::usage("tie_eps must be non-negative"));
        }
        if self.week != "iso" {
            return Err(Failure::usage(format!("unsupported week convention {:?}; only \"iso\"", self.week)));
        }
        if self.loan_types.is_empty() {
            return Err(Failure::usage("loan type filter is empty"));
        }
        for c in &self.page_constraints {
            c.check()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of the effective configuration.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn require(&self, path: &Option<PathBuf>, what: &str) -> Result<PathBuf, Failure> {
        path.clone().ok_or_else(|| Failure::usage(format!("no {what} file configured")))
    }
}
