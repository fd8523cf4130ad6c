use serde::{Deserialize, Serialize};

use super::records::{ConversionRecord, Status};

/// Durations between the timestamps of one application, in seconds.
///
/// `conversion_period` runs from click to submitted application,
/// `processing_period` from submitted application to payout (sales only).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    pub conversion_period: Option<i64>,
    pub processing_period: Option<i64>,
    /// Set when a difference came out negative; both periods are then absent.
    pub invalid: bool,
}

pub fn derive_timeline(record: &ConversionRecord) -> Timeline {
    let Some(conversion) = record.conversion_time else {
        return Timeline::default();
    };
    let conversion_period = (conversion - record.click_time).num_seconds();
    let processing_period = match (record.status, record.sale_time) {
        (Status::Sale, Some(sale)) => Some((sale - conversion).num_seconds()),
        _ => None,
    };
    if conversion_period < 0 || processing_period.is_some_and(|p| p < 0) {
        return Timeline { conversion_period: None, processing_period: None, invalid: true };
    }
    Timeline { conversion_period: Some(conversion_period), processing_period, invalid: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse::parse_timestamp;
    use crate::data::records::{Device, Geo, LoanType};
    use chrono::{Datelike, NaiveDateTime, Timelike};
    use proptest::prelude::*;

    fn record(
        click: &str,
        conversion: Option<&str>,
        sale: Option<&str>,
        status: Status,
    ) -> ConversionRecord {
        ConversionRecord {
            mfi_id: "MFI 1".into(),
            loan_type: LoanType::Standard,
            card_id: String::new(),
            page_id: String::new(),
            page_rank: None,
            global_rank: None,
            click_time: parse_timestamp(click).unwrap(),
            conversion_time: conversion.and_then(parse_timestamp),
            sale_time: sale.and_then(parse_timestamp),
            status,
            income: Some(1.0),
            client_id: "c".into(),
            geo: Geo::default(),
            device: Device::default(),
        }
    }

    #[test]
    fn appendix_example() {
        let r = record(
            "2023-03-31 23:47:00",
            Some("2023-03-31 23:56:00"),
            Some("2023-03-31 23:58:00"),
            Status::Sale,
        );
        let t = derive_timeline(&r);
        assert_eq!(t, Timeline { conversion_period: Some(540), processing_period: Some(120), invalid: false });
    }

    #[test]
    fn no_conversion_time() {
        let r = record("2023-03-31 23:47:00", None, Some("2023-03-31 23:58:00"), Status::Sale);
        assert_eq!(derive_timeline(&r), Timeline::default());
    }

    #[test]
    fn processing_only_for_sales() {
        let r = record(
            "2023-03-31 23:47:00",
            Some("2023-03-31 23:56:00"),
            Some("2023-03-31 23:58:00"),
            Status::Rejected,
        );
        assert_eq!(derive_timeline(&r).processing_period, None);
    }

    #[test]
    fn negative_difference_is_invalid() {
        let r = record("2023-03-31 23:47:00", Some("2023-03-31 23:40:00"), None, Status::Pending);
        let t = derive_timeline(&r);
        assert!(t.invalid);
        assert_eq!(t.conversion_period, None);
    }

    // Seconds since 0001-01-01 computed field by field, independent of chrono's arithmetic.
    fn epoch_seconds(t: &NaiveDateTime) -> i64 {
        let days = t.num_days_from_ce() as i64;
        days * 86_400 + t.hour() as i64 * 3600 + t.minute() as i64 * 60 + t.second() as i64
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn matches_field_arithmetic(
            base in 1_600_000_000i64..1_700_000_000,
            d1 in 0i64..3_000_000,
            d2 in 0i64..3_000_000,
        ) {
            let click = chrono::DateTime::from_timestamp(base, 0).unwrap().naive_utc();
            let conv = chrono::DateTime::from_timestamp(base + d1, 0).unwrap().naive_utc();
            let sale = chrono::DateTime::from_timestamp(base + d1 + d2, 0).unwrap().naive_utc();
            let mut r = record("2023-01-01 00:00:00", None, None, Status::Sale);
            r.click_time = click;
            r.conversion_time = Some(conv);
            r.sale_time = Some(sale);
            let t = derive_timeline(&r);
            prop_assert_eq!(t.conversion_period, Some(epoch_seconds(&conv) - epoch_seconds(&click)));
            prop_assert_eq!(t.processing_period, Some(epoch_seconds(&sale) - epoch_seconds(&conv)));
            prop_assert!(!t.invalid);
        }
    }
}
