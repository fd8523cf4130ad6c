//! Yule's colligation coefficient for 2x2 tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::EvalError;
use crate::data::{ConversionRecord, MfiId, Status};

/// Counts indexed by (row, column); `n10` is row 1, column 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoByTwo {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

impl TwoByTwo {
    pub fn new(n11: u64, n10: u64, n01: u64, n00: u64) -> Self {
        TwoByTwo { n11, n10, n01, n00 }
    }

    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }

    pub fn transpose(&self) -> Self {
        TwoByTwo { n11: self.n11, n10: self.n01, n01: self.n10, n00: self.n00 }
    }
}

/// `Y = (sqrt(n11 n00) - sqrt(n10 n01)) / (sqrt(n11 n00) + sqrt(n10 n01))`.
pub fn yule_colligation(t: &TwoByTwo) -> Result<f64, EvalError> {
    let a = ((t.n11 as f64) * (t.n00 as f64)).sqrt();
    let b = ((t.n10 as f64) * (t.n01 as f64)).sqrt();
    if a + b == 0.0 {
        return Err(EvalError::YuleUndefined(*t));
    }
    Ok((a - b) / (a + b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YuleCi {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    /// 0.5 was added to every cell because one was zero.
    pub continuity_corrected: bool,
}

/// Y as a function of the log odds ratio.
fn y_of_log_or(log_or: f64) -> f64 {
    (log_or / 4.0).tanh()
}

/// Confidence interval for Y from the asymptotic log-odds-ratio interval.
pub fn yule_ci(t: &TwoByTwo, level: f64) -> Result<YuleCi, EvalError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(EvalError::InvalidLevel(level));
    }
    if t.total() == 0 {
        return Err(EvalError::YuleUndefined(*t));
    }
    let corrected = [t.n11, t.n10, t.n01, t.n00].contains(&0);
    let c = if corrected { 0.5 } else { 0.0 };
    let [n11, n10, n01, n00] = [t.n11, t.n10, t.n01, t.n00].map(|n| n as f64 + c);
    let log_or = (n11 * n00 / (n10 * n01)).ln();
    let se = (1.0 / n11 + 1.0 / n10 + 1.0 / n01 + 1.0 / n00).sqrt();
    let z = Normal::standard().inverse_cdf(1.0 - (1.0 - level) / 2.0);
    Ok(YuleCi {
        lo: y_of_log_or(log_or - z * se),
        hi: y_of_log_or(log_or + z * se),
        level,
        continuity_corrected: corrected,
    })
}

pub fn is_ios(record: &ConversionRecord) -> bool {
    record.device.os.to_lowercase().contains("ios")
}

/// Per-lender table with rows sale / not sale and columns iOS / not iOS.
pub fn sale_ios_tables<'a>(conversions: impl IntoIterator<Item = &'a ConversionRecord>) -> BTreeMap<MfiId, TwoByTwo> {
    let mut out: BTreeMap<MfiId, TwoByTwo> = BTreeMap::new();
    for r in conversions {
        let t = out.entry(r.mfi_id.clone()).or_default();
        match (r.status == Status::Sale, is_ios(r)) {
            (true, true) => t.n11 += 1,
            (true, false) => t.n10 += 1,
            (false, true) => t.n01 += 1,
            (false, false) => t.n00 += 1,
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YuleRow {
    pub mfi_id: MfiId,
    pub table: TwoByTwo,
    /// `None` when undefined, e.g. a lender without sales.
    pub y: Option<f64>,
    pub ci: Option<YuleCi>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YuleSummary {
    pub rows: Vec<YuleRow>,
    pub max_lower: Option<f64>,
    pub min_upper: Option<f64>,
}

/// Sale/iOS association for every lender. Lenders whose table lacks a whole
/// row or column get no interval.
pub fn yule_by_mfi<'a>(
    conversions: impl IntoIterator<Item = &'a ConversionRecord>,
    level: f64,
) -> Result<YuleSummary, EvalError> {
    let mut rows = Vec::new();
    for (mfi_id, table) in sale_ios_tables(conversions) {
        let degenerate = table.n11 + table.n10 == 0
            || table.n01 + table.n00 == 0
            || table.n11 + table.n01 == 0
            || table.n10 + table.n00 == 0;
        let y = yule_colligation(&table).ok();
        let ci = if degenerate { None } else { Some(yule_ci(&table, level)?) };
        rows.push(YuleRow { mfi_id, table, y, ci });
    }
    let max_lower = rows.iter().filter_map(|r| r.ci.as_ref()).map(|c| c.lo).reduce(f64::max);
    let min_upper = rows.iter().filter_map(|r| r.ci.as_ref()).map(|c| c.hi).reduce(f64::min);
    Ok(YuleSummary { rows, max_lower, min_upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_values() {
        assert!((yule_colligation(&TwoByTwo::new(30, 10, 10, 30)).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(yule_colligation(&TwoByTwo::new(10, 20, 5, 10)).unwrap(), 0.0);
        assert!(matches!(yule_colligation(&TwoByTwo::new(0, 0, 4, 5)), Err(EvalError::YuleUndefined(_))));
    }

    #[test]
    fn ci_hand_computed() {
        // OR = 9, log OR = 2.1972; se = sqrt(2/30 + 2/10) = 0.5164.
        let t = TwoByTwo::new(30, 10, 10, 30);
        let ci = yule_ci(&t, 0.95).unwrap();
        let log_or = 9f64.ln();
        let se = (2.0 / 30.0 + 2.0 / 10.0f64).sqrt();
        let z = 1.959963984540054;
        let y = |l: f64| (l.exp().sqrt() - 1.0) / (l.exp().sqrt() + 1.0);
        assert!((ci.lo - y(log_or - z * se)).abs() < 1e-9);
        assert!((ci.hi - y(log_or + z * se)).abs() < 1e-9);
        assert!(ci.lo < 0.5 && 0.5 < ci.hi);
        assert!(!ci.continuity_corrected);
    }

    #[test]
    fn independent_table_interval_contains_zero() {
        let ci = yule_ci(&TwoByTwo::new(25, 25, 25, 25), 0.995).unwrap();
        assert!(ci.lo < 0.0 && ci.hi > 0.0);
        assert!((ci.lo + ci.hi).abs() < 1e-12);
    }

    #[test]
    fn zero_cell_is_corrected() {
        let ci = yule_ci(&TwoByTwo::new(0, 10, 10, 30), 0.995).unwrap();
        assert!(ci.continuity_corrected);
        assert!(ci.lo < ci.hi && ci.lo >= -1.0 && ci.hi <= 1.0);
    }

    #[test]
    fn width_shrinks_as_root_n() {
        let width = |k: u64| {
            let ci = yule_ci(&TwoByTwo::new(30 * k, 10 * k, 10 * k, 30 * k), 0.995).unwrap();
            // Compare on the log-odds scale, where the width is exactly 2 z se.
            let g = |y: f64| 4.0 * y.atanh();
            g(ci.hi) - g(ci.lo)
        };
        let (w1, w4, w100) = (width(1), width(4), width(100));
        assert!((w1 / w4 - 2.0).abs() < 1e-9);
        assert!((w1 / w100 - 10.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn sign_and_transpose(n11 in 0u64..500, n10 in 0u64..500, n01 in 0u64..500, n00 in 0u64..500) {
            let t = TwoByTwo::new(n11, n10, n01, n00);
            if let Ok(y) = yule_colligation(&t) {
                let cross = n11 as i128 * n00 as i128 - n10 as i128 * n01 as i128;
                prop_assert_eq!(y.partial_cmp(&0.0).unwrap(), cross.cmp(&0));
                prop_assert!((-1.0..=1.0).contains(&y));
                prop_assert_eq!(yule_colligation(&t.transpose()).unwrap(), y);
            }
        }

        #[test]
        fn zero_at_independence(a in 1u64..50, b in 1u64..50, c in 1u64..50, d in 1u64..50) {
            // Rows proportional: (a c, a d) and (b c, b d).
            let t = TwoByTwo::new(a * c, a * d, b * c, b * d);
            prop_assert!(yule_colligation(&t).unwrap().abs() < 1e-12);
        }
    }
}
