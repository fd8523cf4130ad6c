//! Week-by-week retraining of the ranking under evaluation.

use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::data::{ConversionRecord, Datasets, MfiId};
use crate::features::{feature_table, FeatureConfig, FeatureSet};
use crate::rank::{rank, RankConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VraConfig {
    pub features: FeatureConfig,
    pub rank: RankConfig,
}

impl Default for VraConfig {
    /// Rating, approval rate and EPC only.
    fn default() -> Self {
        let active: FeatureSet = "rating,lar,epc".parse().expect("valid feature list");
        VraConfig { features: FeatureConfig { active, ..FeatureConfig::default() }, rank: RankConfig::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ListSource {
    /// Trained on data before the week.
    Vra,
    /// Training failed; the previous week's list is reused.
    Previous,
    /// Nothing to train on yet; the list observed in the logs that week.
    Historical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeekList {
    /// Monday of the ISO week.
    pub week_start: NaiveDate,
    pub training_applications: usize,
    pub source: ListSource,
    pub ranked: Vec<MfiId>,
}

/// Monday of the ISO week containing `t`.
pub fn week_start(t: NaiveDateTime) -> NaiveDate {
    let d = t.date();
    d - Duration::days(d.weekday().num_days_from_monday() as i64)
}

/// Ranked list implied by the logged global ranks: each lender at its most
/// frequent rank, ties to the smaller rank, then by id.
pub fn historical_list<'a>(conversions: impl IntoIterator<Item = &'a ConversionRecord>) -> Vec<MfiId> {
    let mut counts: BTreeMap<&MfiId, BTreeMap<u32, usize>> = BTreeMap::new();
    for r in conversions {
        if let Some(g) = r.global_rank {
            *counts.entry(&r.mfi_id).or_default().entry(g).or_default() += 1;
        }
    }
    let mut modal: Vec<(u32, &MfiId)> = counts
        .into_iter()
        .map(|(m, c)| {
            let best = c.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(g, _)| *g).expect("non-empty");
            (best, m)
        })
        .collect();
    modal.sort();
    modal.into_iter().map(|(_, m)| m.clone()).collect()
}

/// Data strictly before `cut`. Products are static.
pub fn training_snapshot(data: &Datasets, cut: NaiveDateTime) -> Datasets {
    Datasets {
        conversions: data.conversions.iter().filter(|r| r.click_time < cut).cloned().collect(),
        products: data.products.clone(),
        clicks: data.clicks.iter().filter(|c| c.click_time < cut).cloned().collect(),
    }
}

fn train(snapshot: &Datasets, config: &VraConfig) -> Result<Vec<MfiId>, EvalError> {
    let table = feature_table(snapshot, &config.features)?;
    Ok(rank(&table.vectors, &config.features.active, &config.rank)?.order())
}

/// One ranked list per ISO week spanned by the conversions, each trained on
/// everything before that week's Monday 00:00.
pub fn weekly_schedule(data: &Datasets, config: &VraConfig) -> Result<Vec<WeekList>, EvalError> {
    let (Some(first), Some(last)) = (
        data.conversions.iter().map(|r| r.click_time).min(),
        data.conversions.iter().map(|r| r.click_time).max(),
    ) else {
        return Err(EvalError::NoTrainingData);
    };
    let mut out: Vec<WeekList> = Vec::new();
    let mut week = week_start(first);
    while week <= week_start(last) {
        let cut = week.and_hms_opt(0, 0, 0).expect("midnight");
        let snapshot = training_snapshot(data, cut);
        let n = snapshot.conversions.len();
        let (source, ranked) = match (n, train(&snapshot, config)) {
            (0, _) => (ListSource::Historical, None),
            (_, Ok(list)) => (ListSource::Vra, Some(list)),
            (_, Err(e)) => {
                log::warn!("week of {week}: cannot train ({e})");
                (ListSource::Previous, out.last().map(|w| w.ranked.clone()))
            }
        };
        let (source, ranked) = match ranked {
            Some(r) => (source, r),
            None => {
                let next = cut + Duration::days(7);
                let in_week = data.conversions.iter().filter(|r| r.click_time >= cut && r.click_time < next);
                (ListSource::Historical, historical_list(in_week))
            }
        };
        out.push(WeekList { week_start: week, training_applications: n, source, ranked });
        week += Duration::days(7);
    }
    Ok(out)
}
