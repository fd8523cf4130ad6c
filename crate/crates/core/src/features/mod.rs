//! The five per-lender key features: shrunk user rating, shrunk approval
//! rate, fairness points, 90th-percentile service period and earnings per click.

mod bayes;
mod duration;
mod fairness;
mod service;
mod table;

use thiserror::Error;

use crate::data::MfiId;

pub use bayes::{
    lar_prior, mfi_reviews, normalize_lar, normalize_rating, rating_prior, rating_prior_from, LarPrior, RatingPrior,
};
pub use duration::{parse_declared_duration, DurationPatterns, UnitRule};
pub use fairness::{declared_sla, fairness, FairnessBreakdown, FairnessScore, SlaCheck};
pub use service::{
    is_on_time, mean_sale_processing, median, percentile_nearest_rank, service_period_p90, service_periods,
};
pub use table::{
    epc, feature_table, read_feature_csv, write_feature_csv, Excluded, Feature, FeatureConfig, FeatureSet,
    FeatureTable, FeatureVector, FEATURE_CSV_HEADER,
};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no reviews in corpus")]
    NoReviews,
    #[error("no applications to estimate the approval rate from")]
    NoApplications,
    #[error("{0}: no measurable applications")]
    NoMeasurableApplications(MfiId),
    #[error("{0}: no sale processing periods to impute from")]
    NoProcessingPeriods(MfiId),
    #[error("{0}: sales recorded but no clicks")]
    SalesWithoutClicks(MfiId),
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("feature set is empty")]
    EmptyFeatureSet,
    #[error("feature table: {0}")]
    Csv(String),
    #[error(transparent)]
    CsvIo(#[from] csv::Error),
}
