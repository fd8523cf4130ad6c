//! Posterior-mean shrinkage of per-lender averages toward the corpus average.
//!
//! Both the user rating and the approval rate are noisy for lenders with few
//! observations. Each is replaced by the posterior mean under a conjugate
//! prior whose pseudo-counts are the corpus totals, which reduces to
//! `(corpus_sum + own_sum) / (corpus_count + own_count)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::data::{ConversionRecord, MfiId, ProductRecord, Status};

/// Corpus-wide review totals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingPrior {
    pub total_reviews: u64,
    /// Sum over lenders of `n_reviews * avg_rating`.
    pub weighted_sum: f64,
}

impl RatingPrior {
    pub fn prior_mean(&self) -> f64 {
        self.weighted_sum / self.total_reviews as f64
    }
}

/// Review count and average rating per lender.
///
/// Cards of one lender repeat the lender's reviews, so each lender is counted
/// once, through its card with the most reviews.
pub fn mfi_reviews(products: &[ProductRecord]) -> BTreeMap<MfiId, (u64, Option<f64>)> {
    let mut out: BTreeMap<MfiId, (u64, Option<f64>)> = BTreeMap::new();
    for p in products {
        let entry = out.entry(p.mfi_id.clone()).or_insert((0, None));
        let candidate = (p.n_reviews, p.avg_user_rating.filter(|_| p.n_reviews > 0));
        let better = match (entry.1, candidate.1) {
            (_, None) => false,
            (None, Some(_)) => true,
            (Some(_), Some(_)) => candidate.0 > entry.0,
        };
        if better {
            *entry = candidate;
        }
    }
    out
}

pub fn rating_prior(products: &[ProductRecord]) -> Result<RatingPrior, FeatureError> {
    rating_prior_from(mfi_reviews(products).values().copied())
}

/// Prior from `(n_reviews, avg_rating)` pairs, one per lender.
pub fn rating_prior_from(reviews: impl IntoIterator<Item = (u64, Option<f64>)>) -> Result<RatingPrior, FeatureError> {
    let mut prior = RatingPrior { total_reviews: 0, weighted_sum: 0.0 };
    for (n, tau) in reviews {
        if let (true, Some(tau)) = (n > 0, tau) {
            prior.total_reviews += n;
            prior.weighted_sum += n as f64 * tau;
        }
    }
    if prior.total_reviews == 0 {
        return Err(FeatureError::NoReviews);
    }
    Ok(prior)
}

/// Posterior mean rating of a lender with `n_reviews` reviews averaging `avg_rating`.
pub fn normalize_rating(prior: &RatingPrior, n_reviews: u64, avg_rating: f64) -> f64 {
    if n_reviews == 0 {
        return prior.prior_mean();
    }
    let n = n_reviews as f64;
    (prior.weighted_sum + n * avg_rating) / (prior.total_reviews as f64 + n)
}

/// Corpus-wide sale and application counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LarPrior {
    pub total_sales: u64,
    pub total_apps: u64,
}

impl LarPrior {
    pub fn prior_mean(&self) -> f64 {
        self.total_sales as f64 / self.total_apps as f64
    }
}

/// Pending and rejected applications both count as non-sales.
pub fn lar_prior<'a>(conversions: impl IntoIterator<Item = &'a ConversionRecord>) -> Result<LarPrior, FeatureError> {
    let mut prior = LarPrior { total_sales: 0, total_apps: 0 };
    for r in conversions {
        prior.total_apps += 1;
        if r.status == Status::Sale {
            prior.total_sales += 1;
        }
    }
    if prior.total_apps == 0 {
        return Err(FeatureError::NoApplications);
    }
    Ok(prior)
}

/// Posterior mean approval rate of a lender with `sales` sales out of `apps` applications.
pub fn normalize_lar(prior: &LarPrior, sales: u64, apps: u64) -> f64 {
    debug_assert!(sales <= apps);
    (prior.total_sales + sales) as f64 / (prior.total_apps + apps) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LoanType;
    use proptest::prelude::*;

    fn product(mfi: &str, card: &str, n: u64, tau: Option<f64>) -> ProductRecord {
        let mut p = ProductRecord::bare(mfi.into(), card, LoanType::Standard);
        p.n_reviews = n;
        p.avg_user_rating = tau;
        p
    }

    #[test]
    fn single_lender_prior() {
        let prior = rating_prior(&[product("A", "1", 10, Some(4.0))]).unwrap();
        assert_eq!(prior.total_reviews, 10);
        assert_eq!(prior.weighted_sum, 40.0);
        assert_eq!(prior.prior_mean(), 4.0);
    }

    #[test]
    fn two_lender_prior() {
        let prior = rating_prior(&[product("A", "1", 2, Some(5.0)), product("B", "2", 8, Some(3.0))]).unwrap();
        assert_eq!(prior.total_reviews, 10);
        assert!((prior.weighted_sum - 34.0).abs() < 1e-12);
        assert!((prior.prior_mean() - 3.4).abs() < 1e-12);
    }

    #[test]
    fn cards_of_one_lender_are_counted_once() {
        let prior = rating_prior(&[
            product("A", "1", 10, Some(4.0)),
            product("A", "2", 10, Some(4.0)),
            product("A", "3", 0, None),
        ])
        .unwrap();
        assert_eq!(prior.total_reviews, 10);
    }

    #[test]
    fn no_reviews_is_an_error() {
        assert!(matches!(rating_prior(&[product("A", "1", 0, None)]), Err(FeatureError::NoReviews)));
        assert!(matches!(rating_prior(&[]), Err(FeatureError::NoReviews)));
    }

    #[test]
    fn rating_examples() {
        let prior = RatingPrior { total_reviews: 10, weighted_sum: 34.0 };
        assert_eq!(normalize_rating(&prior, 0, 5.0), prior.prior_mean());
        assert!((normalize_rating(&prior, 2, 5.0) - 44.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn lar_examples() {
        let prior = LarPrior { total_sales: 20, total_apps: 100 };
        assert_eq!(prior.prior_mean(), 0.2);
        assert!((normalize_lar(&prior, 5, 10) - 25.0 / 110.0).abs() < 1e-12);
        assert_eq!(normalize_lar(&prior, 0, 0), 0.2);
    }

    #[test]
    fn lar_prior_counts_pending_as_non_sale() {
        let f = crate::data::generate_fixture(5, 3, 200, &Default::default()).unwrap();
        let prior = lar_prior(&f.conversions).unwrap();
        assert_eq!(prior.total_apps as usize, f.conversions.len());
        let sales = f.conversions.iter().filter(|r| r.status == Status::Sale).count();
        assert_eq!(prior.total_sales as usize, sales);
        assert!(matches!(lar_prior(&[]), Err(FeatureError::NoApplications)));
    }

    fn between(x: f64, a: f64, b: f64) -> bool {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        lo - 1e-12 <= x && x <= hi + 1e-12
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn rating_shrinkage_bounds(
            total in 1u64..100_000,
            prior_mean in 1.0f64..5.0,
            n in 1u64..10_000,
            tau in 1.0f64..5.0,
        ) {
            let prior = RatingPrior { total_reviews: total, weighted_sum: prior_mean * total as f64 };
            let v = normalize_rating(&prior, n, tau);
            prop_assert!(between(v, prior.prior_mean(), tau));
            let more = normalize_rating(&prior, n + 1, tau);
            // Monotone toward the lender's own average as evidence grows.
            prop_assert!((more - tau).abs() <= (v - tau).abs() + 1e-12);
            if (tau - prior.prior_mean()).abs() > 1e-6 {
                prop_assert!((more - tau).abs() < (v - tau).abs());
            }
        }

        #[test]
        fn lar_shrinkage_bounds(
            total_apps in 1u64..200_000,
            sale_frac in 0.0f64..1.0,
            apps in 1u64..10_000,
            own_frac in 0.0f64..1.0,
        ) {
            let prior = LarPrior { total_sales: (total_apps as f64 * sale_frac) as u64, total_apps };
            let sales = (apps as f64 * own_frac) as u64;
            let raw = sales as f64 / apps as f64;
            let v = normalize_lar(&prior, sales, apps);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!(between(v, prior.prior_mean(), raw));
            // Same raw rate, twice the evidence.
            let more = normalize_lar(&prior, sales * 2, apps * 2);
            prop_assert!((more - raw).abs() <= (v - raw).abs() + 1e-12);
            if (raw - prior.prior_mean()).abs() > 1e-9 {
                prop_assert!((more - raw).abs() < (v - raw).abs());
            }
        }

        #[test]
        fn equal_rating_orders_by_review_count(
            total in 10u64..100_000,
            prior_mean in 1.5f64..4.5,
            delta in 0.05f64..0.5,
            n1 in 1u64..5_000,
            extra in 1u64..5_000,
        ) {
            let prior = RatingPrior { total_reviews: total, weighted_sum: prior_mean * total as f64 };
            let n2 = n1 + extra;
            let high = prior_mean + delta;
            let low = prior_mean - delta;
            prop_assert!(normalize_rating(&prior, n2, high) > normalize_rating(&prior, n1, high));
            prop_assert!(normalize_rating(&prior, n2, low) < normalize_rating(&prior, n1, low));
        }
    }
}
