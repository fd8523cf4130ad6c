//! Counterfactual replay of historical applications under another ranking.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::reapproval::ReapprovalTable;
use super::schedule::{week_start, WeekList};
use super::EvalError;
use crate::data::{ClickRecord, ConversionRecord, MfiId, Status};

/// How an application's simulated outcome was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// The client applied to the new lender; its actual outcome is used.
    Copied,
    /// Historical sale: `P(vra = sale | hist = sale)`.
    AfterSale,
    /// Historical rejection: `1 - P(vra = rejected | hist = rejected)`.
    AfterRejection,
    /// Historical pending: the new lender's normalised approval rate.
    PendingMarginal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppOutcome {
    pub date: NaiveDate,
    pub week_start: NaiveDate,
    pub client_id: String,
    pub position: u32,
    pub mfi_hist: MfiId,
    pub mfi_vra: MfiId,
    pub historical_sale: bool,
    pub historical_income: f64,
    pub p_sale: f64,
    pub mean_income: f64,
    pub copied: bool,
    pub basis: Basis,
    /// The pair probability used was a thin-support fallback.
    pub fallback: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub applications: usize,
    pub simulated: usize,
    pub missing_rank: usize,
    pub outside_schedule: usize,
    pub beyond_list: usize,
    pub copied: usize,
    pub after_sale: usize,
    pub after_rejection: usize,
    pub pending_marginal: usize,
    pub fallback: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub applications: usize,
    pub lar: f64,
    pub avg_income: f64,
    pub historical_lar: f64,
    pub historical_avg_income: f64,
}

impl Totals {
    fn of<'a>(apps: impl IntoIterator<Item = &'a AppOutcome>) -> Totals {
        let (mut n, mut p, mut inc, mut hp, mut hinc) = (0usize, 0.0, 0.0, 0.0, 0.0);
        for a in apps {
            n += 1;
            p += a.p_sale;
            inc += a.mean_income;
            hp += if a.historical_sale { 1.0 } else { 0.0 };
            hinc += a.historical_income;
        }
        let d = (n.max(1)) as f64;
        Totals { applications: n, lar: p / d, avg_income: inc / d, historical_lar: hp / d, historical_avg_income: hinc / d }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeekTotals {
    pub week_start: NaiveDate,
    #[serde(flatten)]
    pub totals: Totals,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub applications: Vec<AppOutcome>,
    /// Mean simulated sale probability and income per application.
    pub total: Totals,
    pub weekly: Vec<WeekTotals>,
    pub coverage: Coverage,
}

fn outcome(r: &ConversionRecord) -> (f64, f64) {
    match r.status {
        Status::Sale => (1.0, r.sale_income()),
        _ => (0.0, 0.0),
    }
}

/// Replay every application at the lender occupying its historical position
/// in that week's list.
///
/// The historical position is the application's `global_rank`.
pub fn simulate(
    conversions: &[ConversionRecord],
    schedule: &[WeekList],
    table: &ReapprovalTable,
) -> Result<SimulationResult, EvalError> {
    let weeks: BTreeMap<NaiveDate, &WeekList> = schedule.iter().map(|w| (w.week_start, w)).collect();

    // Per client and lender: the latest final application, else the latest one.
    let mut own: BTreeMap<(&str, &MfiId), &ConversionRecord> = BTreeMap::new();
    for r in conversions {
        let slot = own.entry((r.client_id.as_str(), &r.mfi_id)).or_insert(r);
        let better = (r.status.is_final(), r.click_time) >= (slot.status.is_final(), slot.click_time);
        if better {
            *slot = r;
        }
    }

    let mut coverage = Coverage { applications: conversions.len(), ..Coverage::default() };
    let mut apps = Vec::new();
    for r in conversions {
        let Some(position) = r.global_rank.filter(|&g| g >= 1) else {
            coverage.missing_rank += 1;
            continue;
        };
        let week = week_start(r.click_time);
        let Some(list) = weeks.get(&week) else {
            coverage.outside_schedule += 1;
            continue;
        };
        let Some(vra) = list.ranked.get(position as usize - 1) else {
            coverage.beyond_list += 1;
            continue;
        };
        let (hist_p, hist_income) = outcome(r);
        let (p_sale, mean_income, basis, fallback) = if vra == &r.mfi_id {
            (hist_p, hist_income, Basis::Copied, false)
        } else if let Some(actual) = own.get(&(r.client_id.as_str(), vra)) {
            let (p, inc) = outcome(actual);
            (p, inc, Basis::Copied, false)
        } else {
            let (pp, basis) = match r.status {
                Status::Sale => {
                    let pp = table.p_sale(vra, &r.mfi_id);
                    (pp, Basis::AfterSale)
                }
                Status::Rejected => {
                    let mut pp = table.p_reject(vra, &r.mfi_id);
                    pp.p = 1.0 - pp.p;
                    (pp, Basis::AfterRejection)
                }
                Status::Pending => {
                    let p = table.lar(vra);
                    (super::PairProbability { p, support: 0, hits: 0, fallback: false }, Basis::PendingMarginal)
                }
            };
            (pp.p, table.income(vra) * pp.p, basis, pp.fallback)
        };
        match basis {
            Basis::Copied => coverage.copied += 1,
            Basis::AfterSale => coverage.after_sale += 1,
            Basis::AfterRejection => coverage.after_rejection += 1,
            Basis::PendingMarginal => coverage.pending_marginal += 1,
        }
        coverage.fallback += fallback as usize;
        apps.push(AppOutcome {
            date: r.click_time.date(),
            week_start: week,
            client_id: r.client_id.clone(),
            position,
            mfi_hist: r.mfi_id.clone(),
            mfi_vra: vra.clone(),
            historical_sale: r.status == Status::Sale,
            historical_income: hist_income,
            p_sale,
            mean_income,
            copied: basis == Basis::Copied,
            basis,
            fallback,
        });
    }
    coverage.simulated = apps.len();
    if coverage.simulated < coverage.applications {
        log::warn!(
            "{} of {} applications not simulated ({} without rank, {} outside the schedule, {} beyond the list)",
            coverage.applications - coverage.simulated,
            coverage.applications,
            coverage.missing_rank,
            coverage.outside_schedule,
            coverage.beyond_list
        );
    }

    let mut by_week: BTreeMap<NaiveDate, Vec<&AppOutcome>> = BTreeMap::new();
    for a in &apps {
        by_week.entry(a.week_start).or_default().push(a);
    }
    let weekly = by_week
        .into_iter()
        .map(|(week_start, v)| WeekTotals { week_start, totals: Totals::of(v) })
        .collect();
    Ok(SimulationResult { total: Totals::of(&apps), weekly, coverage, applications: apps })
}

pub const DAILY_CSV_HEADER: [&str; 4] = ["date", "algorithm", "income", "share_per_click"];
pub const HISTORICAL_LABEL: &str = "historical";
pub const VRA_LABEL: &str = "vra";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyPoint {
    pub date: NaiveDate,
    pub algorithm: String,
    /// Expected income that day.
    pub income: f64,
    /// Expected sales over clicks that day; 0 on days without clicks.
    pub share_per_click: f64,
}

/// Daily income and sales-per-click for the historical ranking and the one
/// under evaluation, one row per algorithm for every day between the first
/// and last simulated application.
pub fn daily_series(result: &SimulationResult, clicks: &[ClickRecord]) -> Vec<DailyPoint> {
    let (Some(first), Some(last)) =
        (result.applications.iter().map(|a| a.date).min(), result.applications.iter().map(|a| a.date).max())
    else {
        return Vec::new();
    };
    let mut clicks_per_day: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    for c in clicks {
        *clicks_per_day.entry(c.click_time.date()).or_default() += 1;
    }
    // [hist sales, hist income, vra sales, vra income]
    let mut sums: BTreeMap<NaiveDate, [f64; 4]> = BTreeMap::new();
    for a in &result.applications {
        let s = sums.entry(a.date).or_default();
        s[0] += if a.historical_sale { 1.0 } else { 0.0 };
        s[1] += a.historical_income;
        s[2] += a.p_sale;
        s[3] += a.mean_income;
    }
    let mut out = Vec::new();
    for date in first.iter_days().take_while(|d| *d <= last) {
        let s = sums.get(&date).copied().unwrap_or_default();
        let clicks = clicks_per_day.get(&date).copied().unwrap_or(0);
        let share = |sales: f64| if clicks == 0 { 0.0 } else { sales / clicks as f64 };
        out.push(DailyPoint { date, algorithm: HISTORICAL_LABEL.into(), income: s[1], share_per_click: share(s[0]) });
        out.push(DailyPoint { date, algorithm: VRA_LABEL.into(), income: s[3], share_per_click: share(s[2]) });
    }
    out
}

pub fn write_daily_csv<W: Write>(out: W, points: &[DailyPoint]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DAILY_CSV_HEADER)?;
    for p in points {
        w.write_record([
            p.date.format("%Y-%m-%d").to_string(),
            p.algorithm.clone(),
            p.income.to_string(),
            p.share_per_click.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_fixture, Device, Datasets, FixtureConfig, Geo, LoanType};
    use crate::eval::{historical_list, reapproval_table, weekly_schedule, ListSource, VraConfig};
    use chrono::{Duration, NaiveDateTime};

    fn t(day: i64) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2023, 1, 2).unwrap().and_hms_opt(10, 0, 0).unwrap() + Duration::days(day)
    }

    fn app(client: &str, mfi: &str, rank: u32, status: Status, income: f64, day: i64) -> ConversionRecord {
        ConversionRecord {
            mfi_id: mfi.into(),
            loan_type: LoanType::Standard,
            card_id: String::new(),
            page_id: String::new(),
            page_rank: Some(rank),
            global_rank: Some(rank),
            click_time: t(day),
            conversion_time: Some(t(day) + Duration::seconds(60)),
            sale_time: (status == Status::Sale).then(|| t(day) + Duration::seconds(600)),
            status,
            income: (status == Status::Sale).then_some(income),
            client_id: client.into(),
            geo: Geo::default(),
            device: Device::default(),
        }
    }

    fn list(ids: &[&str]) -> Vec<WeekList> {
        vec![WeekList {
            week_start: NaiveDate::from_ymd_opt(2023, 1, 2).unwrap(),
            training_applications: 0,
            source: ListSource::Vra,
            ranked: ids.iter().map(|s| MfiId::from(*s)).collect(),
        }]
    }

    #[test]
    fn swapped_pair_hand_evaluated() {
        // Training: 10 clients applied to both; B approves 6 of A's 10 sales.
        let mut training = Vec::new();
        for c in 0..10 {
            let id = format!("t{c}");
            training.push(app(&id, "A", 1, Status::Sale, 40.0, 0));
            training.push(app(&id, "B", 2, if c < 6 { Status::Sale } else { Status::Rejected }, 100.0, 0));
        }
        let table = reapproval_table(&training, &[], 5).unwrap();
        assert_eq!(table.p_sale(&"B".into(), &"A".into()).p, 0.6);
        assert_eq!(table.income(&"B".into()), 100.0);

        // A new client sold at A in position 1; the swapped list puts B there.
        let history = vec![app("new", "A", 1, Status::Sale, 40.0, 1)];
        let r = simulate(&history, &list(&["B", "A"]), &table).unwrap();
        let a = &r.applications[0];
        assert_eq!(a.mfi_vra, MfiId::from("B"));
        assert_eq!(a.basis, Basis::AfterSale);
        assert!((a.p_sale - 0.6).abs() < 1e-12);
        assert!((a.mean_income - 60.0).abs() < 1e-12);
    }

    #[test]
    fn copies_actual_outcome_at_new_lender() {
        let history = vec![app("c", "A", 1, Status::Rejected, 0.0, 1), app("c", "B", 2, Status::Sale, 70.0, 1)];
        let table = reapproval_table(&history, &[], 5).unwrap();
        let r = simulate(&history, &list(&["B", "A"]), &table).unwrap();
        assert!(r.applications.iter().all(|a| a.copied));
        assert_eq!(r.applications[0].mean_income, 70.0);
        assert_eq!(r.applications[1].p_sale, 0.0);
    }

    #[test]
    fn rejection_and_pending_rules() {
        let mut training = Vec::new();
        for c in 0..10 {
            let id = format!("t{c}");
            training.push(app(&id, "A", 1, Status::Rejected, 0.0, 0));
            training.push(app(&id, "B", 2, if c < 8 { Status::Rejected } else { Status::Sale }, 100.0, 0));
        }
        let table = reapproval_table(&training, &[], 5).unwrap();
        let history = vec![app("x", "A", 1, Status::Rejected, 0.0, 1), app("y", "A", 1, Status::Pending, 0.0, 1)];
        let r = simulate(&history, &list(&["B", "A"]), &table).unwrap();
        assert_eq!(r.applications[0].basis, Basis::AfterRejection);
        assert!((r.applications[0].p_sale - 0.2).abs() < 1e-12);
        assert_eq!(r.applications[1].basis, Basis::PendingMarginal);
        assert_eq!(r.applications[1].p_sale, table.lar(&"B".into()));
        assert_eq!(r.coverage.pending_marginal, 1);
    }

    #[test]
    fn coverage_counts_skips() {
        let mut history = vec![app("a", "A", 1, Status::Sale, 10.0, 1), app("b", "A", 5, Status::Sale, 10.0, 1)];
        history.push(ConversionRecord { global_rank: None, ..app("c", "A", 1, Status::Sale, 10.0, 1) });
        history.push(app("d", "A", 1, Status::Sale, 10.0, 30));
        let table = reapproval_table(&history, &[], 5).unwrap();
        let r = simulate(&history, &list(&["A", "B"]), &table).unwrap();
        let c = &r.coverage;
        assert_eq!((c.applications, c.simulated, c.beyond_list, c.missing_rank, c.outside_schedule), (4, 1, 1, 1, 1));
    }

    #[test]
    fn identity_ranking_reproduces_history() {
        for seed in 0..5 {
            let data: Datasets = generate_fixture(seed, 6, 300, &FixtureConfig::default()).unwrap().into();
            let table = reapproval_table(&data.conversions, &[], 5).unwrap();
            let identity: Vec<WeekList> = {
                let mut weeks = weekly_schedule(&data, &VraConfig::default()).unwrap();
                for w in &mut weeks {
                    w.ranked = historical_list(&data.conversions);
                }
                weeks
            };
            let r = simulate(&data.conversions, &identity, &table).unwrap();
            assert_eq!(r.coverage.simulated, data.conversions.len());
            assert_eq!(r.coverage.copied, r.coverage.simulated);
            assert_eq!(r.total.lar, r.total.historical_lar);
            assert_eq!(r.total.avg_income, r.total.historical_avg_income);
            let sales = data.conversions.iter().filter(|c| c.status == Status::Sale).count();
            assert_eq!(r.total.historical_lar, sales as f64 / data.conversions.len() as f64);

            let daily = daily_series(&r, &data.clicks);
            for pair in daily.chunks(2) {
                assert_eq!(pair[0].income, pair[1].income);
                assert_eq!(pair[0].share_per_click, pair[1].share_per_click);
            }
        }
    }

    #[test]
    fn daily_series_spans_every_day() {
        let history = vec![app("a", "A", 1, Status::Sale, 10.0, 0), app("b", "A", 1, Status::Sale, 10.0, 4)];
        let table = reapproval_table(&history, &[], 5).unwrap();
        let r = simulate(&history, &list(&["A", "B"]), &table).unwrap();
        let d = daily_series(&r, &[]);
        assert_eq!(d.len(), 2 * 5);
        assert_eq!(d[2].income, 0.0);
        let mut buf = Vec::new();
        write_daily_csv(&mut buf, &d).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "date,algorithm,income,share_per_click");
        assert_eq!(text.lines().count(), 11);
    }
}
