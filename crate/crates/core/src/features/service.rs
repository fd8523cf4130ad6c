//! Service period: how long an application takes from click to final status.

use crate::data::{derive_timeline, ConversionRecord, MfiId, Status};

use super::FeatureError;

/// Conversion periods under this many seconds count as on time.
pub const ON_TIME_LIMIT_SECS: i64 = 3600;
/// Share of applications that must be on time for the lender to be on time.
pub const ON_TIME_SHARE: f64 = 0.9;
/// At on-time lenders, conversion periods above this are blamed on the client.
pub const OUTLIER_LIMIT_SECS: i64 = 7200;
pub const SERVICE_PERCENTILE: f64 = 0.9;

/// True when at least 90% of the conversion periods are under an hour.
pub fn is_on_time(conversion_periods: &[i64]) -> bool {
    if conversion_periods.is_empty() {
        return false;
    }
    let fast = conversion_periods.iter().filter(|&&p| p < ON_TIME_LIMIT_SECS).count();
    fast as f64 >= ON_TIME_SHARE * conversion_periods.len() as f64
}

/// Nearest-rank percentile: the `ceil(q * n)`-th smallest value (1-based).
pub fn percentile_nearest_rank(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[rank - 1])
}

pub fn median(values: &[i64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    Some(if n % 2 == 1 { sorted[n / 2] as f64 } else { (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0 })
}

/// Mean processing period over sales, used to impute missing ones.
pub fn mean_sale_processing<'a>(records: impl IntoIterator<Item = &'a ConversionRecord>) -> Option<f64> {
    let (sum, n) = records
        .into_iter()
        .filter(|r| r.status == Status::Sale)
        .filter_map(|r| derive_timeline(r).processing_period)
        .fold((0.0, 0usize), |(s, n), p| (s + p as f64, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-application service periods of one lender, after outlier replacement
/// and imputation.
///
/// `fallback_processing` imputes processing periods when the lender itself has
/// no sales; normally the corpus-wide sale mean.
pub fn service_periods(
    mfi: &MfiId,
    records: &[&ConversionRecord],
    fallback_processing: Option<f64>,
) -> Result<Vec<f64>, FeatureError> {
    let measured: Vec<(i64, Option<i64>)> = records
        .iter()
        .map(|r| derive_timeline(r))
        .filter(|t| !t.invalid)
        .filter_map(|t| t.conversion_period.map(|c| (c, t.processing_period)))
        .collect();
    if measured.is_empty() {
        return Err(FeatureError::NoMeasurableApplications(mfi.clone()));
    }
    let raw: Vec<i64> = measured.iter().map(|m| m.0).collect();
    let replacement = if is_on_time(&raw) { median(&raw) } else { None };

    let own: Vec<i64> = records
        .iter()
        .filter(|r| r.status == Status::Sale)
        .filter_map(|r| derive_timeline(r).processing_period)
        .collect();
    let impute = if own.is_empty() {
        fallback_processing.ok_or_else(|| FeatureError::NoProcessingPeriods(mfi.clone()))?
    } else {
        own.iter().sum::<i64>() as f64 / own.len() as f64
    };

    Ok(measured
        .into_iter()
        .map(|(conv, proc)| {
            let conv = match replacement {
                Some(m) if conv > OUTLIER_LIMIT_SECS => m,
                _ => conv as f64,
            };
            conv + proc.map_or(impute, |p| p as f64)
        })
        .collect())
}

/// 90th percentile (nearest rank) of [`service_periods`].
pub fn service_period_p90(
    mfi: &MfiId,
    records: &[&ConversionRecord],
    fallback_processing: Option<f64>,
) -> Result<f64, FeatureError> {
    let periods = service_periods(mfi, records, fallback_processing)?;
    Ok(percentile_nearest_rank(&periods, SERVICE_PERCENTILE).expect("non-empty"))
}
