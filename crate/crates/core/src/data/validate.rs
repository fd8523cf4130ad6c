use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::records::{ClickRecord, ConversionRecord, MfiId, ProductRecord, RecordViolation, Status};
use super::timeline::derive_timeline;

const MAX_EXAMPLES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    ConversionMfiNotInProducts,
    ConversionCardNotInProducts,
    ConversionWithoutClick,
    ClickMfiNotInProducts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrityWarning {
    pub kind: WarningKind,
    pub count: usize,
    /// The first few offending keys, for orientation.
    pub examples: Vec<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatusShares {
    pub pending: f64,
    pub sale: f64,
    pub rejected: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MfiCounts {
    pub applications: usize,
    pub sales: usize,
    pub rejected: usize,
    pub clients: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_mfis: usize,
    pub n_clients: usize,
    pub n_applications: usize,
    pub n_sales: usize,
    pub n_pending: usize,
    pub n_rejected: usize,
    pub n_products: usize,
    pub n_clicks: usize,
    pub status_shares: StatusShares,
    /// Applications whose derived periods came out negative; excluded from features.
    pub invalid_timelines: usize,
    pub record_violations: BTreeMap<RecordViolation, usize>,
    pub per_mfi: BTreeMap<MfiId, MfiCounts>,
    pub warnings: Vec<IntegrityWarning>,
}

#[derive(Default)]
struct WarningAcc {
    count: usize,
    examples: BTreeSet<String>,
}

impl WarningAcc {
    fn hit(&mut self, key: impl FnOnce() -> String) {
        self.count += 1;
        if self.examples.len() < MAX_EXAMPLES {
            self.examples.insert(key());
        }
    }
}

pub fn validate(
    conversions: &[ConversionRecord],
    products: &[ProductRecord],
    clicks: &[ClickRecord],
) -> ValidationReport {
    let mut report = ValidationReport {
        n_applications: conversions.len(),
        n_products: products.len(),
        n_clicks: clicks.len(),
        ..Default::default()
    };

    let product_mfis: HashSet<&MfiId> = products.iter().map(|p| &p.mfi_id).collect();
    let product_cards: HashSet<&str> = products.iter().map(|p| p.card_id.as_str()).collect();
    let click_keys: HashSet<(&MfiId, &str, NaiveDateTime)> =
        clicks.iter().map(|c| (&c.mfi_id, c.client_id.as_str(), c.click_time)).collect();

    let mut clients = HashSet::new();
    let mut clients_per_mfi: BTreeMap<&MfiId, HashSet<&str>> = BTreeMap::new();
    let mut warnings: BTreeMap<WarningKind, WarningAcc> = BTreeMap::new();

    for r in conversions {
        clients.insert(r.client_id.as_str());
        clients_per_mfi.entry(&r.mfi_id).or_default().insert(r.client_id.as_str());
        let counts = report.per_mfi.entry(r.mfi_id.clone()).or_default();
        counts.applications += 1;
        match r.status {
            Status::Sale => {
                report.n_sales += 1;
                counts.sales += 1;
            }
            Status::Rejected => {
                report.n_rejected += 1;
                counts.rejected += 1;
            }
            Status::Pending => report.n_pending += 1,
        }
        if derive_timeline(r).invalid {
            report.invalid_timelines += 1;
        }
        for v in r.violations() {
            *report.record_violations.entry(v).or_default() += 1;
        }
        if !product_mfis.contains(&r.mfi_id) {
            warnings
                .entry(WarningKind::ConversionMfiNotInProducts)
                .or_default()
                .hit(|| r.mfi_id.to_string());
        }
        if !r.card_id.is_empty() && !product_cards.contains(r.card_id.as_str()) {
            warnings
                .entry(WarningKind::ConversionCardNotInProducts)
                .or_default()
                .hit(|| r.card_id.clone());
        }
        if !click_keys.contains(&(&r.mfi_id, r.client_id.as_str(), r.click_time)) {
            warnings
                .entry(WarningKind::ConversionWithoutClick)
                .or_default()
                .hit(|| format!("{}/{}/{}", r.mfi_id, r.client_id, r.click_time));
        }
    }
    for c in clicks {
        if !product_mfis.contains(&c.mfi_id) {
            warnings
                .entry(WarningKind::ClickMfiNotInProducts)
                .or_default()
                .hit(|| c.mfi_id.to_string());
        }
    }

    for (mfi, set) in clients_per_mfi {
        if let Some(c) = report.per_mfi.get_mut(mfi) {
            c.clients = set.len();
        }
    }
    report.n_mfis = report.per_mfi.len();
    report.n_clients = clients.len();
    if report.n_applications > 0 {
        let n = report.n_applications as f64;
        report.status_shares = StatusShares {
            pending: report.n_pending as f64 / n,
            sale: report.n_sales as f64 / n,
            rejected: report.n_rejected as f64 / n,
        };
    }
    report.warnings = warnings
        .into_iter()
        .map(|(kind, acc)| IntegrityWarning { kind, count: acc.count, examples: acc.examples.into_iter().collect() })
        .collect();
    report
}
