//! Fairness: one point for each of four diligence criteria.

use serde::{Deserialize, Serialize};

use super::duration::{parse_declared_duration, DurationPatterns};
use super::service::is_on_time;
use crate::data::{derive_timeline, ConversionRecord, ProductRecord, Status};

/// A lender reports statuses honestly when more than this share is rejected.
pub const REJECTED_SHARE_MIN: f64 = 0.05;
/// Share of applications that must meet the declared time.
pub const SLA_SHARE_MIN: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessBreakdown {
    /// Reports rejections (more than 5% rejected) and has at least one sale.
    pub status_reporting: bool,
    /// At least 90% of conversion periods under an hour.
    pub on_time: bool,
    /// At least half of the measured applications processed within the declared time.
    pub sla_met: bool,
    /// Not flagged for leaking client data.
    pub reliable: bool,
}

impl FairnessBreakdown {
    pub fn points(&self) -> u8 {
        [self.status_reporting, self.on_time, self.sla_met, self.reliable]
            .iter()
            .filter(|b| **b)
            .count() as u8
    }
}

/// How the declared-time criterion was evaluated.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlaCheck {
    /// False when the declared time could not be parsed or nothing could be measured.
    pub evaluable: bool,
    /// Consideration time plus payment time, in seconds.
    pub declared_secs: Option<u64>,
    /// Which applications the share is taken over.
    pub population: String,
    pub population_size: usize,
    pub within_declared: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessScore {
    pub points: u8,
    pub breakdown: FairnessBreakdown,
    pub sla: SlaCheck,
}

/// Consideration time plus payment time declared on the card.
pub fn declared_sla(product: &ProductRecord, patterns: &DurationPatterns) -> Option<u64> {
    let consideration = parse_declared_duration(&product.consideration_time, patterns)?;
    let payment = parse_declared_duration(&product.payment_time, patterns)?;
    Some(consideration + payment)
}

/// Score one lender from its applications and its product card.
///
/// `declared_secs` is [`declared_sla`] of the card; `None` fails criterion 3
/// and marks it as not evaluable.
pub fn fairness(records: &[&ConversionRecord], product: &ProductRecord, declared_secs: Option<u64>) -> FairnessScore {
    let n = records.len();
    let sales = records.iter().filter(|r| r.status == Status::Sale).count();
    let rejected = records.iter().filter(|r| r.status == Status::Rejected).count();
    let status_reporting = n > 0 && rejected as f64 / n as f64 > REJECTED_SHARE_MIN && sales >= 1;

    let timelines: Vec<_> = records.iter().map(|r| derive_timeline(r)).filter(|t| !t.invalid).collect();
    let conversion: Vec<i64> = timelines.iter().filter_map(|t| t.conversion_period).collect();
    let on_time = is_on_time(&conversion);

    // Only sales carry a processing period.
    let processing: Vec<i64> = timelines.iter().filter_map(|t| t.processing_period).collect();
    let within = declared_secs.map_or(0, |d| processing.iter().filter(|&&p| p <= d as i64).count());
    let evaluable = declared_secs.is_some() && !processing.is_empty();
    let sla_met = evaluable && within as f64 >= SLA_SHARE_MIN * processing.len() as f64;

    let breakdown = FairnessBreakdown { status_reporting, on_time, sla_met, reliable: !product.unreliability };
    FairnessScore {
        points: breakdown.points(),
        breakdown,
        sla: SlaCheck {
            evaluable,
            declared_secs,
            population: "sale applications with a processing period".into(),
            population_size: processing.len(),
            within_declared: within,
        },
    }
}
