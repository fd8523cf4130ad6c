use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::RankError;
use crate::data::MfiId;
use crate::features::{FeatureSet, FeatureVector};

/// Pairwise comparison points. `points[i][j]` counts the active features on
/// which lender `j` beats lender `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    pub order: Vec<MfiId>,
    pub points: Vec<Vec<u32>>,
    pub n_features: u32,
}

impl ComparisonMatrix {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn index_of(&self, mfi: &MfiId) -> Option<usize> {
        self.order.iter().position(|m| m == mfi)
    }

    /// Points of `winner` over `loser`.
    pub fn points_over(&self, winner: &MfiId, loser: &MfiId) -> Option<u32> {
        Some(self.points[self.index_of(loser)?][self.index_of(winner)?])
    }
}

/// +1 means `b` beats `a` on this feature, -1 means `a` beats `b`, 0 is a tie.
fn contest(a: f64, b: f64, higher_is_better: bool, eps: f64) -> i8 {
    if (a - b).abs() <= eps {
        0
    } else if (b > a) == higher_is_better {
        1
    } else {
        -1
    }
}

/// Build the comparison matrix over `features` in the given order.
///
/// Differences within `tie_eps` are ties and score for neither side.
pub fn comparison_matrix(
    features: &[FeatureVector],
    active: &FeatureSet,
    tie_eps: f64,
) -> Result<ComparisonMatrix, RankError> {
    if features.len() < 2 {
        return Err(RankError::TooFewLenders(features.len()));
    }
    let mut seen = HashSet::new();
    for v in features {
        if !seen.insert(&v.mfi_id) {
            return Err(RankError::DuplicateLender(v.mfi_id.clone()));
        }
    }
    // values[i][k]: lender i, k-th active feature.
    let values = features
        .iter()
        .map(|v| {
            active
                .iter()
                .map(|f| v.get(f).ok_or_else(|| RankError::MissingFeature { mfi: v.mfi_id.clone(), feature: f }))
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let directions: Vec<bool> = active.iter().map(|f| f.higher_is_better()).collect();

    let n = features.len();
    let mut points = vec![vec![0u32; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            for (k, &higher) in directions.iter().enumerate() {
                match contest(values[i][k], values[j][k], higher, tie_eps) {
                    1 => points[i][j] += 1,
                    -1 => points[j][i] += 1,
                    _ => {}
                }
            }
        }
    }
    Ok(ComparisonMatrix {
        order: features.iter().map(|v| v.mfi_id.clone()).collect(),
        points,
        n_features: active.len() as u32,
    })
}
