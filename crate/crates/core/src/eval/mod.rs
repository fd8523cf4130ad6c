//! Offline evaluation by reapproval replay, and the A/B test toolkit.

mod reapproval;
mod schedule;
mod simulate;
mod stats;
mod yule;

pub use reapproval::*;
pub use schedule::*;
pub use simulate::*;
pub use stats::*;
pub use yule::*;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Datasets;
use crate::features::FeatureError;
use crate::rank::RankError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no training applications")]
    NoTrainingData,
    #[error("a group has no trials")]
    EmptyGroup,
    #[error("{successes} successes out of {trials} trials")]
    SuccessesExceedTrials { successes: u64, trials: u64 },
    #[error("each sample needs at least 2 values, got {0}")]
    SampleTooSmall(usize),
    #[error("Yule's coefficient is undefined for {0:?}")]
    YuleUndefined(TwoByTwo),
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub schedule: Vec<WeekList>,
    pub min_support: u64,
    pub reapproval_fallback_share: f64,
    pub warnings: Vec<String>,
    pub simulation: SimulationResult,
    pub daily: Vec<DailyPoint>,
}

/// Weekly schedule, reapproval table over the whole history, replay and
/// daily series.
pub fn evaluate(data: &Datasets, config: &VraConfig, min_support: u64) -> Result<Evaluation, EvalError> {
    let schedule = weekly_schedule(data, config)?;
    let universe: Vec<_> = schedule.iter().flat_map(|w| w.ranked.iter().cloned()).collect();
    let table = reapproval_table(&data.conversions, &universe, min_support)?;
    let simulation = simulate(&data.conversions, &schedule, &table)?;
    let daily = daily_series(&simulation, &data.clicks);
    Ok(Evaluation {
        schedule,
        min_support,
        reapproval_fallback_share: table.fallback_share(),
        warnings: table.warnings.clone(),
        simulation,
        daily,
    })
}
