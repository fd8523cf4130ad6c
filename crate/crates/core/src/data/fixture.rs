//! Deterministic synthetic datasets with the same shape as the real logs.
//!
//! Every generated record honours the record invariants, every conversion has
//! a matching click and every card referenced exists in the product table.

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::seq::index::sample_weighted;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::records::{ClickRecord, ConversionRecord, Device, Geo, LoanType, MfiId, ProductRecord, Status};
use super::DataError;

const DECLARED_TIMES: [&str; 5] = ["в течение 20 минут", "до 1 часа", "моментально", "в течение 1 дня", "от 1 до 3 дней"];
const PAGES: [&str; 3] = ["main", "pensioneram", "dolgosrochnye"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureConfig {
    pub start: NaiveDateTime,
    pub days: u32,
    /// Per-MFI approval probability, by MFI index. Missing entries use `default_approval_rate`.
    pub approval_rates: Vec<f64>,
    pub default_approval_rate: f64,
    /// Share of non-approved applications that get reported as rejected (the rest stay pending).
    pub rejection_share: f64,
    /// Probability that a client applies to yet another MFI after each application.
    pub co_application_rate: f64,
    pub max_applications_per_client: usize,
    /// Probability that a client's outcome at a further MFI reuses the client's own draw,
    /// which correlates approvals across lenders without changing the marginal rates.
    pub outcome_correlation: f64,
    /// Extra non-converting clicks generated per conversion.
    pub extra_clicks_per_conversion: u32,
    pub non_standard_share: f64,
    pub ios_share: f64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            start: NaiveDate::from_ymd_opt(2023, 1, 2).unwrap().and_hms_opt(0, 0, 0).unwrap(),
            days: 21,
            approval_rates: Vec::new(),
            default_approval_rate: 0.15,
            rejection_share: 0.4,
            co_application_rate: 0.3,
            max_applications_per_client: 5,
            outcome_correlation: 0.5,
            extra_clicks_per_conversion: 3,
            non_standard_share: 0.2,
            ios_share: 0.3,
        }
    }
}

impl FixtureConfig {
    fn check(&self) -> Result<(), DataError> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(DataError::FixtureConfig(format!("{name} = {v} is not a probability")))
            }
        };
        prob("default_approval_rate", self.default_approval_rate)?;
        prob("rejection_share", self.rejection_share)?;
        prob("co_application_rate", self.co_application_rate)?;
        prob("outcome_correlation", self.outcome_correlation)?;
        prob("non_standard_share", self.non_standard_share)?;
        prob("ios_share", self.ios_share)?;
        for &r in &self.approval_rates {
            prob("approval_rates[]", r)?;
        }
        if self.days == 0 {
            return Err(DataError::FixtureConfig("days must be positive".into()));
        }
        if self.max_applications_per_client == 0 {
            return Err(DataError::FixtureConfig("max_applications_per_client must be positive".into()));
        }
        Ok(())
    }

    fn approval_rate(&self, mfi: usize) -> f64 {
        self.approval_rates.get(mfi).copied().unwrap_or(self.default_approval_rate)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fixture {
    pub conversions: Vec<ConversionRecord>,
    pub products: Vec<ProductRecord>,
    pub clicks: Vec<ClickRecord>,
}

pub fn mfi_name(index: usize) -> MfiId {
    MfiId(format!("MFI {}", index + 1))
}

fn card_id(mfi: usize, loan_type: LoanType) -> String {
    let lt = LoanType::ALL.iter().position(|l| *l == loan_type).unwrap();
    format!("{}", 1000 + mfi * 10 + lt)
}

fn products(rng: &mut ChaCha8Rng, n_mfis: usize) -> Vec<ProductRecord> {
    let mut out = Vec::with_capacity(n_mfis * 3);
    for m in 0..n_mfis {
        let n_reviews = if rng.random_bool(0.15) { 0 } else { rng.random_range(1..400) };
        let rating = (rng.random_range(20..=50) as f64) / 10.0;
        let unreliable = rng.random_bool(0.2);
        let declared = DECLARED_TIMES[rng.random_range(0..DECLARED_TIMES.len())];
        for lt in LoanType::ALL {
            let mut p = ProductRecord::bare(mfi_name(m), card_id(m, lt), lt);
            p.region = "Вся Россия".into();
            p.work_schedule = "круглосуточно".into();
            p.submission_method = "Онлайн".into();
            p.documents = "Паспорт".into();
            p.consideration_time = declared.into();
            p.payment_time = "моментально".into();
            p.payment_method = "карта".into();
            p.repayment_method = "карта".into();
            p.avg_user_rating = (n_reviews > 0).then_some(rating);
            p.n_reviews = n_reviews;
            p.unreliability = unreliable;
            p.bad_credit_score = rng.random_bool(0.5);
            p.loan_extension = rng.random_bool(0.5);
            let amount_min = 1000.0 * rng.random_range(1..10) as f64;
            p.loan_amount_min = Some(amount_min);
            p.loan_amount_max = Some(amount_min * rng.random_range(2..10) as f64);
            p.loan_term_min = Some(rng.random_range(1..15) as f64);
            p.loan_term_max = Some(p.loan_term_min.unwrap() + rng.random_range(5..60) as f64);
            p.interest_min = Some(0.0);
            p.interest_max = Some(1.0);
            p.age_min = Some(rng.random_range(18..=21) as f64);
            p.age_max = Some(rng.random_range(60..=80) as f64);
            out.push(p);
        }
    }
    out
}

/// Generate a consistent synthetic conversion/product/click triple.
pub fn generate_fixture(
    seed: u64,
    n_mfis: usize,
    n_clients: usize,
    config: &FixtureConfig,
) -> Result<Fixture, DataError> {
    if n_mfis < 2 {
        return Err(DataError::TooFewMfis(n_mfis));
    }
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let products = products(&mut rng, n_mfis);
    let base_income: Vec<f64> = (0..n_mfis).map(|_| rng.random_range(30.0..250.0f64).round()).collect();
    let slow_mfi: Vec<bool> = (0..n_mfis).map(|_| rng.random_bool(0.3)).collect();
    // Higher positions draw more traffic.
    let position_weight: Vec<f64> = (0..n_mfis).map(|m| 1.0 / (m + 1) as f64).collect();
    let horizon = config.days as i64 * 86_400;

    let mut conversions = Vec::new();
    let mut clicks = Vec::new();
    for c in 0..n_clients {
        let client_id = format!("c{c:06}");
        let mut n_apps = 1;
        while n_apps < config.max_applications_per_client.min(n_mfis) && rng.random_bool(config.co_application_rate) {
            n_apps += 1;
        }
        let mut chosen: Vec<usize> = sample_weighted(&mut rng, n_mfis, |m| position_weight[m], n_apps)
            .expect("positive weights")
            .into_iter()
            .collect();
        if c < n_mfis && !chosen.contains(&c) {
            chosen[0] = c;
        }
        let own_draw: f64 = rng.random();
        let ios = rng.random_bool(config.ios_share);
        let device = Device {
            device_type: "Мобильный телефон".into(),
            device: if ios { "iPhone" } else { "Android" }.into(),
            os: if ios { "iOS" } else { "Android" }.into(),
            browser: if ios { "Mobile Safari" } else { "Chrome Mobile" }.into(),
            connection_type: "Сотовая связь".into(),
            provider: format!("DP {}", rng.random_range(1..5)),
        };
        let geo = Geo { country: "Россия".into(), region: "Region".into(), city: "City".into() };
        let mut t = config.start + Duration::seconds(rng.random_range(0..horizon));
        for (k, &m) in chosen.iter().enumerate() {
            if k > 0 {
                t += Duration::seconds(rng.random_range(60..6 * 3600));
            }
            let loan_type = if rng.random_bool(config.non_standard_share) {
                if rng.random_bool(0.5) { LoanType::LongTerm } else { LoanType::InterestFree }
            } else {
                LoanType::Standard
            };
            let draw = if k == 0 || rng.random_bool(config.outcome_correlation) { own_draw } else { rng.random() };
            let status = if draw < config.approval_rate(m) {
                Status::Sale
            } else if rng.random_bool(config.rejection_share) {
                Status::Rejected
            } else {
                Status::Pending
            };
            let conv_secs = if slow_mfi[m] && rng.random_bool(0.3) {
                rng.random_range(3600..3 * 86_400)
            } else if rng.random_bool(0.03) {
                rng.random_range(7200..86_400)
            } else {
                rng.random_range(30..3000)
            };
            let conversion_time = t + Duration::seconds(conv_secs);
            let (sale_time, income) = match status {
                Status::Sale => {
                    let proc_secs = rng.random_range(60..2 * 86_400);
                    let income = base_income[m] + rng.random_range(-10.0..10.0f64).round();
                    (Some(conversion_time + Duration::seconds(proc_secs)), Some(income))
                }
                _ => (None, None),
            };
            let page_id = PAGES[rng.random_range(0..PAGES.len())].to_string();
            let rank = (m + 1) as u32;
            let card = card_id(m, loan_type);
            clicks.push(ClickRecord {
                mfi_id: mfi_name(m),
                card_id: card.clone(),
                click_time: t,
                client_id: client_id.clone(),
                page_id: page_id.clone(),
                page_rank: Some(rank),
                loan_type,
                income,
            });
            for _ in 0..config.extra_clicks_per_conversion {
                let other = rng.random_range(0..n_mfis);
                let lt = LoanType::Standard;
                clicks.push(ClickRecord {
                    mfi_id: mfi_name(other),
                    card_id: card_id(other, lt),
                    click_time: t - Duration::seconds(rng.random_range(1..3600)),
                    client_id: client_id.clone(),
                    page_id: page_id.clone(),
                    page_rank: Some((other + 1) as u32),
                    loan_type: lt,
                    income: None,
                });
            }
            conversions.push(ConversionRecord {
                mfi_id: mfi_name(m),
                loan_type,
                card_id: card,
                page_id,
                page_rank: Some(rank),
                global_rank: Some(rank),
                click_time: t,
                conversion_time: Some(conversion_time),
                sale_time,
                status,
                income,
                client_id: client_id.clone(),
                geo: geo.clone(),
                device: device.clone(),
            });
        }
    }
    conversions.sort_by_key(|r| r.click_time);
    clicks.sort_by_key(|c| c.click_time);
    Ok(Fixture { conversions, products, clicks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate::validate;

    #[test]
    fn too_few_mfis() {
        assert!(matches!(generate_fixture(1, 1, 10, &FixtureConfig::default()), Err(DataError::TooFewMfis(1))));
    }

    #[test]
    fn small_fixture_is_consistent() {
        let f = generate_fixture(1, 5, 100, &FixtureConfig::default()).unwrap();
        let report = validate(&f.conversions, &f.products, &f.clicks);
        assert_eq!(report.n_mfis, 5);
        assert_eq!(report.n_clients, 100);
        assert!(report.warnings.is_empty(), "{:?}", report.warnings);
        assert!(report.record_violations.is_empty());
        assert_eq!(report.invalid_timelines, 0);
    }

    #[test]
    fn deterministic() {
        let a = generate_fixture(7, 4, 50, &FixtureConfig::default()).unwrap();
        let b = generate_fixture(7, 4, 50, &FixtureConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = generate_fixture(8, 4, 50, &FixtureConfig::default()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn approval_rate_law_of_large_numbers() {
        let config = FixtureConfig {
            approval_rates: vec![0.3],
            co_application_rate: 0.0,
            ..Default::default()
        };
        let f = generate_fixture(3, 2, 16_000, &config).unwrap();
        let at_a: Vec<_> = f.conversions.iter().filter(|r| r.mfi_id == mfi_name(0)).collect();
        assert!(at_a.len() >= 10_000, "{}", at_a.len());
        let rate = at_a.iter().filter(|r| r.status == Status::Sale).count() as f64 / at_a.len() as f64;
        assert!((rate - 0.3).abs() <= 0.02, "empirical rate {rate}");
    }

    #[test]
    fn bad_probability_rejected() {
        let config = FixtureConfig { rejection_share: 1.5, ..Default::default() };
        assert!(matches!(generate_fixture(1, 3, 3, &config), Err(DataError::FixtureConfig(_))));
    }
}
