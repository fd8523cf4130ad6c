//! Pairwise comparison, Markov-chain ranking and page subsets.

mod markov;
mod matrix;
mod page;

pub use markov::*;
pub use matrix::*;
pub use page::*;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::MfiId;
use crate::features::{Feature, FeatureSet, FeatureVector};

/// Feature values closer than this are tied.
pub const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RankError {
    #[error("need at least 2 lenders to rank, got {0}")]
    TooFewLenders(usize),
    #[error("lender {0} appears twice in the feature table")]
    DuplicateLender(MfiId),
    #[error("lender {mfi} has no value for active feature {feature}")]
    MissingFeature { mfi: MfiId, feature: Feature },
    #[error("damping must lie in [0, 1), got {0}")]
    InvalidDamping(f64),
    #[error("not a stochastic matrix: {0}")]
    NotStochastic(String),
    #[error("the chain has no unique stationary distribution; try a positive damping")]
    NotUnique,
    #[error("direct and iterative stationary solutions differ by {0:e}")]
    SolverDisagreement(f64),
    #[error("rank list and stationary distribution disagree: {0}")]
    Inconsistent(String),
    #[error("unknown product field {0:?}")]
    UnknownField(String),
    #[error("invalid page constraint: {0}")]
    BadConstraint(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankConfig {
    pub tie_eps: f64,
    pub damping: f64,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig { tie_eps: TIE_EPS, damping: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub position: u32,
    pub mfi_id: MfiId,
    pub pi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub active: FeatureSet,
    pub matrix: ComparisonMatrix,
    pub transition: TransitionMatrix,
    pub stationary: StationaryDistribution,
    pub entries: Vec<RankEntry>,
}

impl Ranking {
    pub fn order(&self) -> Vec<MfiId> {
        self.entries.iter().map(|e| e.mfi_id.clone()).collect()
    }
}

/// Order lenders by stationary probability, highest first.
///
/// Probabilities within `tie_eps` of their neighbour form a tie group, ordered
/// by higher approval rate and then by id.
pub fn rank_list(dist: &StationaryDistribution, features: &[FeatureVector], tie_eps: f64) -> Vec<RankEntry> {
    let lar = |m: &MfiId| features.iter().find(|v| &v.mfi_id == m).and_then(|v| v.lar_norm);
    let mut idx: Vec<usize> = (0..dist.order.len()).collect();
    idx.sort_by(|&a, &b| dist.pi[b].total_cmp(&dist.pi[a]).then_with(|| dist.order[a].cmp(&dist.order[b])));

    let mut out = Vec::with_capacity(idx.len());
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && dist.pi[idx[end - 1]] - dist.pi[idx[end]] <= tie_eps {
            end += 1;
        }
        let mut group = idx[start..end].to_vec();
        group.sort_by(|&a, &b| {
            let (la, lb) = (lar(&dist.order[a]), lar(&dist.order[b]));
            lb.unwrap_or(f64::NEG_INFINITY)
                .total_cmp(&la.unwrap_or(f64::NEG_INFINITY))
                .then_with(|| dist.order[a].cmp(&dist.order[b]))
        });
        out.extend(group);
        start = end;
    }
    out.into_iter()
        .enumerate()
        .map(|(pos, i)| RankEntry { position: pos as u32 + 1, mfi_id: dist.order[i].clone(), pi: dist.pi[i] })
        .collect()
}

/// The whole ranking stage: comparison matrix, transition matrix, stationary
/// distribution and ordered list.
pub fn rank(features: &[FeatureVector], active: &FeatureSet, config: &RankConfig) -> Result<Ranking, RankError> {
    let matrix = comparison_matrix(features, active, config.tie_eps)?;
    let transition = transition(&matrix, config.damping)?;
    let stationary = stationary(&transition)?;
    let entries = rank_list(&stationary, features, config.tie_eps);
    // Non-increasing pi down the list, up to tie groups.
    if entries.windows(2).any(|w| w[1].pi - w[0].pi > config.tie_eps) {
        return Err(RankError::Inconsistent("stationary mass increases down the list".into()));
    }
    Ok(Ranking { active: active.clone(), matrix, transition, stationary, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Six lenders with reference feature values.
    fn six() -> Vec<FeatureVector> {
        let rows = [
            ("MFI 18", 3.8687, 0.1329, 1, 126004.2648, 5.3577),
            ("MFI 20", 3.8599, 0.1229, 3, 58758.7124, 1.5044),
            ("MFI 29", 3.8630, 0.1277, 4, 310794.5388, 1.1219),
            ("MFI 56", 3.8690, 0.1256, 1, 68637.8840, 2.1196),
            ("MFI 64", 3.8747, 0.1323, 1, 90024.9961, 3.5466),
            ("MFI 87", 3.8712, 0.1247, 3, 23893.1089, 1.9553),
        ];
        rows.iter()
            .map(|&(id, r, l, f, s, e)| FeatureVector {
                mfi_id: id.into(),
                rating_norm: Some(r),
                lar_norm: Some(l),
                fairness: Some(f),
                service_p90: Some(s),
                epc: Some(e),
            })
            .collect()
    }

    #[test]
    fn golden_comparison_matrix() {
        let m = comparison_matrix(&six(), &FeatureSet::all(), TIE_EPS).unwrap();
        let expected = vec![
            vec![0, 2, 1, 2, 2, 3],
            vec![3, 0, 3, 3, 3, 4],
            vec![4, 2, 0, 3, 4, 3],
            vec![2, 2, 2, 0, 3, 3],
            vec![2, 2, 1, 1, 0, 2],
            vec![2, 0, 2, 2, 3, 0],
        ];
        assert_eq!(m.points, expected);
        assert_eq!(m.points_over(&"MFI 18".into(), &"MFI 20".into()), Some(3));
        assert_eq!(m.points_over(&"MFI 20".into(), &"MFI 18".into()), Some(2));
    }

    #[test]
    fn golden_transition_row() {
        let m = comparison_matrix(&six(), &FeatureSet::all(), TIE_EPS).unwrap();
        let t = transition(&m, 0.0).unwrap();
        let expected = [0.0, 0.2, 0.1, 0.2, 0.2, 0.3];
        for (x, y) in t.rows[0].iter().zip(expected) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn golden_stationary_distribution() {
        let r = rank(&six(), &FeatureSet::all(), &RankConfig::default()).unwrap();
        let golden = [0.179, 0.129, 0.137, 0.155, 0.199, 0.2];
        for (x, y) in r.stationary.pi.iter().zip(golden) {
            assert!((x - y).abs() <= 1e-3, "{x} vs {y}");
        }
        assert!(r.stationary.power_converged);
        let order: Vec<_> = r.entries.iter().map(|e| e.mfi_id.as_str().to_string()).collect();
        assert_eq!(order, ["MFI 87", "MFI 64", "MFI 18", "MFI 56", "MFI 29", "MFI 20"]);
    }

    #[test]
    fn epc_scale_invariance() {
        let base = rank(&six(), &FeatureSet::all(), &RankConfig::default()).unwrap();
        let scaled: Vec<_> = six()
            .into_iter()
            .map(|mut v| {
                v.epc = v.epc.map(|e| e * 37.5);
                v
            })
            .collect();
        let other = rank(&scaled, &FeatureSet::all(), &RankConfig::default()).unwrap();
        assert_eq!(base.matrix, other.matrix);
        assert_eq!(base.order(), other.order());
    }

    #[test]
    fn tie_groups_use_lar_then_id() {
        let dist = StationaryDistribution {
            order: ["c", "a", "b", "d"].map(MfiId::from).to_vec(),
            pi: vec![0.25, 0.25, 0.25 + 1e-12, 0.25 - 2e-12],
            power_converged: true,
            power_iterations: 1,
            discrepancy: Some(0.0),
        };
        let lar = |id: &str, l: f64| FeatureVector { lar_norm: Some(l), ..FeatureVector::empty(id.into()) };
        let features = [lar("a", 0.1), lar("b", 0.1), lar("c", 0.2), lar("d", 0.05)];
        let ids: Vec<_> = rank_list(&dist, &features, TIE_EPS).into_iter().map(|e| e.mfi_id.0).collect();
        assert_eq!(ids, ["c", "a", "b", "d"]);
    }

    #[test]
    fn feature_subset_ranks() {
        let active: FeatureSet = "rating,lar,epc".parse().unwrap();
        let r = rank(&six(), &active, &RankConfig::default()).unwrap();
        assert_eq!(r.matrix.n_features, 3);
        assert_eq!(r.entries.len(), 6);
    }

    proptest! {
        #[test]
        fn permutation_invariance(perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
            let base = rank(&six(), &FeatureSet::all(), &RankConfig::default()).unwrap();
            let features = six();
            let permuted: Vec<_> = perm.iter().map(|&i| features[i].clone()).collect();
            let r = rank(&permuted, &FeatureSet::all(), &RankConfig::default()).unwrap();
            prop_assert_eq!(base.order(), r.order());
            for e in &r.entries {
                prop_assert!((base.stationary.get(&e.mfi_id).unwrap() - e.pi).abs() < 1e-12);
            }
        }
    }
}
