//! Conditional approval and rejection probabilities between lender pairs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::data::{ConversionRecord, MfiId, Status};
use crate::features::{lar_prior, normalize_lar, LarPrior};

pub const DEFAULT_MIN_SUPPORT: u64 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairProbability {
    pub p: f64,
    /// Clients conditioned on.
    pub support: u64,
    /// Of those, clients with the target outcome at the other lender.
    pub hits: u64,
    /// Support below the minimum; `p` is the marginal fallback.
    pub fallback: bool,
}

/// `sale[i][j] = P(i = sale | j = sale)` and `reject[i][j] = P(i = rejected | j = rejected)`
/// over the lenders in `mfis`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReapprovalTable {
    pub mfis: Vec<MfiId>,
    pub min_support: u64,
    pub sale: Vec<Vec<PairProbability>>,
    pub reject: Vec<Vec<PairProbability>>,
    /// Mean income over sales, 0 for lenders without sales.
    pub mean_income: Vec<f64>,
    /// Normalised approval rate, the fallback for thin pairs.
    pub lar_norm: Vec<f64>,
    pub lar_prior_mean: f64,
    pub warnings: Vec<String>,
}

impl ReapprovalTable {
    pub fn index_of(&self, mfi: &MfiId) -> Option<usize> {
        self.mfis.binary_search(mfi).ok()
    }

    /// `P(i = sale | j = sale)`; lenders unknown to the table get the prior mean.
    pub fn p_sale(&self, i: &MfiId, j: &MfiId) -> PairProbability {
        match (self.index_of(i), self.index_of(j)) {
            (Some(a), Some(b)) => self.sale[a][b],
            _ => self.unknown(self.lar(i)),
        }
    }

    /// `P(i = rejected | j = rejected)`.
    pub fn p_reject(&self, i: &MfiId, j: &MfiId) -> PairProbability {
        match (self.index_of(i), self.index_of(j)) {
            (Some(a), Some(b)) => self.reject[a][b],
            _ => self.unknown(1.0 - self.lar(i)),
        }
    }

    pub fn lar(&self, mfi: &MfiId) -> f64 {
        self.index_of(mfi).map_or(self.lar_prior_mean, |i| self.lar_norm[i])
    }

    pub fn income(&self, mfi: &MfiId) -> f64 {
        self.index_of(mfi).map_or(0.0, |i| self.mean_income[i])
    }

    fn unknown(&self, p: f64) -> PairProbability {
        PairProbability { p, support: 0, hits: 0, fallback: true }
    }

    pub fn fallback_share(&self) -> f64 {
        let n = self.mfis.len();
        if n < 2 {
            return 1.0;
        }
        let thin = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j)
            .map(|(i, j)| self.sale[i][j].fallback as usize + self.reject[i][j].fallback as usize)
            .sum::<usize>();
        thin as f64 / (2 * n * (n - 1)) as f64
    }
}

/// Number of unordered lender pairs.
pub fn unordered_pair_count(n_mfis: u64) -> u64 {
    n_mfis * n_mfis.saturating_sub(1) / 2
}

/// Clients needed for `per_probability` co-applicants behind both
/// probabilities of every unordered pair.
pub fn required_clients(n_mfis: u64, per_probability: u64) -> u64 {
    unordered_pair_count(n_mfis) * 2 * per_probability
}

/// Each client's latest final status per lender. Pending applications are ignored.
pub fn final_statuses<'a>(
    conversions: impl IntoIterator<Item = &'a ConversionRecord>,
) -> BTreeMap<&'a str, BTreeMap<&'a MfiId, Status>> {
    let mut latest: BTreeMap<&str, BTreeMap<&MfiId, &ConversionRecord>> = BTreeMap::new();
    for r in conversions {
        if !r.status.is_final() {
            continue;
        }
        let slot = latest.entry(r.client_id.as_str()).or_default().entry(&r.mfi_id).or_insert(r);
        if r.click_time >= slot.click_time {
            *slot = r;
        }
    }
    latest.into_iter().map(|(c, m)| (c, m.into_iter().map(|(k, r)| (k, r.status)).collect())).collect()
}

/// Build the table from training applications.
///
/// `universe` adds lenders that must appear even without training data.
/// Pairs with fewer than `min_support` conditioning clients fall back to the
/// normalised approval rate of the target lender (and its complement for
/// rejections).
pub fn reapproval_table<'a>(
    conversions: impl IntoIterator<Item = &'a ConversionRecord> + Clone,
    universe: &[MfiId],
    min_support: u64,
) -> Result<ReapprovalTable, EvalError> {
    let prior: LarPrior = lar_prior(conversions.clone()).map_err(|_| EvalError::NoTrainingData)?;
    let mut mfis: BTreeSet<MfiId> = universe.iter().cloned().collect();
    let mut apps: BTreeMap<&MfiId, (u64, u64, f64)> = BTreeMap::new();
    for r in conversions.clone() {
        mfis.insert(r.mfi_id.clone());
        let e = apps.entry(&r.mfi_id).or_default();
        e.0 += 1;
        if r.status == Status::Sale {
            e.1 += 1;
            e.2 += r.sale_income();
        }
    }
    let mfis: Vec<MfiId> = mfis.into_iter().collect();
    let n = mfis.len();
    let idx = |m: &MfiId| mfis.binary_search(m).expect("collected above");

    let lar_norm: Vec<f64> = mfis
        .iter()
        .map(|m| {
            let (a, s, _) = apps.get(m).copied().unwrap_or_default();
            normalize_lar(&prior, s, a)
        })
        .collect();
    let mean_income: Vec<f64> = mfis
        .iter()
        .map(|m| match apps.get(m) {
            Some(&(_, s, total)) if s > 0 => total / s as f64,
            _ => 0.0,
        })
        .collect();

    // [support, hits] per ordered pair.
    let mut sale = vec![vec![[0u64; 2]; n]; n];
    let mut reject = vec![vec![[0u64; 2]; n]; n];
    let mut multi = 0usize;
    for statuses in final_statuses(conversions).values() {
        if statuses.len() > 1 {
            multi += 1;
        }
        let known: Vec<(usize, Status)> = statuses.iter().map(|(m, s)| (idx(m), *s)).collect();
        for &(j, sj) in &known {
            for &(i, si) in &known {
                let cell = match sj {
                    Status::Sale => &mut sale[i][j],
                    Status::Rejected => &mut reject[i][j],
                    Status::Pending => unreachable!("final statuses only"),
                };
                cell[0] += 1;
                if si == sj {
                    cell[1] += 1;
                }
            }
        }
    }

    let build = |counts: &Vec<Vec<[u64; 2]>>, fallback: &dyn Fn(usize) -> f64| -> Vec<Vec<PairProbability>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let [support, hits] = counts[i][j];
                        if i == j {
                            PairProbability { p: 1.0, support, hits, fallback: false }
                        } else if support < min_support || support == 0 {
                            PairProbability { p: fallback(i), support, hits, fallback: true }
                        } else {
                            PairProbability { p: hits as f64 / support as f64, support, hits, fallback: false }
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let sale = build(&sale, &|i| lar_norm[i]);
    let reject = build(&reject, &|i| 1.0 - lar_norm[i]);

    let mut warnings = Vec::new();
    if multi == 0 {
        let w = "no client has final statuses at two lenders; every pair uses the fallback".to_string();
        log::warn!("{w}");
        warnings.push(w);
    }
    Ok(ReapprovalTable {
        mfis,
        min_support,
        sale,
        reject,
        mean_income,
        lar_norm,
        lar_prior_mean: prior.prior_mean(),
        warnings,
    })
}
