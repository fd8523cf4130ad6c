use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bayes::{lar_prior, mfi_reviews, normalize_lar, normalize_rating, rating_prior_from, LarPrior, RatingPrior};
use super::duration::DurationPatterns;
use super::fairness::{declared_sla, fairness, FairnessScore};
use super::service::{mean_sale_processing, service_period_p90};
use super::FeatureError;
use crate::data::{derive_timeline, ClickRecord, ConversionRecord, Datasets, LoanType, MfiId, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Rating,
    Lar,
    Fairness,
    Service,
    Epc,
}

impl Feature {
    pub const ALL: [Feature; 5] = [Feature::Rating, Feature::Lar, Feature::Fairness, Feature::Service, Feature::Epc];

    /// Service period is the only feature where less is better.
    pub fn higher_is_better(self) -> bool {
        !matches!(self, Feature::Service)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::Rating => "rating",
            Feature::Lar => "lar",
            Feature::Fairness => "fairness",
            Feature::Service => "service",
            Feature::Epc => "epc",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Feature {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "rating" | "rating_norm" => Ok(Feature::Rating),
            "lar" | "lar_norm" => Ok(Feature::Lar),
            "fairness" => Ok(Feature::Fairness),
            "service" | "service_p90" | "service_p90_sec" => Ok(Feature::Service),
            "epc" => Ok(Feature::Epc),
            other => Err(FeatureError::UnknownFeature(other.to_string())),
        }
    }
}

/// A non-empty set of features, kept in canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Feature>", into = "Vec<Feature>")]
pub struct FeatureSet(Vec<Feature>);

impl FeatureSet {
    pub fn all() -> Self {
        FeatureSet(Feature::ALL.to_vec())
    }

    pub fn new(features: impl IntoIterator<Item = Feature>) -> Result<Self, FeatureError> {
        let mut v: Vec<Feature> = features.into_iter().collect();
        v.sort();
        v.dedup();
        if v.is_empty() {
            return Err(FeatureError::EmptyFeatureSet);
        }
        Ok(FeatureSet(v))
    }

    pub fn contains(&self, f: Feature) -> bool {
        self.0.contains(&f)
    }

    pub fn iter(&self) -> impl Iterator<Item = Feature> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for FeatureSet {
    fn default() -> Self {
        Self::all()
    }
}

impl TryFrom<Vec<Feature>> for FeatureSet {
    type Error = FeatureError;

    fn try_from(v: Vec<Feature>) -> Result<Self, Self::Error> {
        FeatureSet::new(v)
    }
}

impl From<FeatureSet> for Vec<Feature> {
    fn from(s: FeatureSet) -> Self {
        s.0
    }
}

impl FromStr for FeatureSet {
    type Err = FeatureError;

    /// Comma-separated feature names, e.g. `rating,lar,epc`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts = s.split(',').filter(|p| !p.trim().is_empty()).map(Feature::from_str);
        FeatureSet::new(parts.collect::<Result<Vec<_>, _>>()?)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|x| x.as_str()).collect();
        f.write_str(&names.join(","))
    }
}

/// Key features of one lender. A field is present exactly when its feature is active.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mfi_id: MfiId,
    pub rating_norm: Option<f64>,
    pub lar_norm: Option<f64>,
    pub fairness: Option<u8>,
    /// Seconds.
    pub service_p90: Option<f64>,
    pub epc: Option<f64>,
}

impl FeatureVector {
    pub fn empty(mfi_id: MfiId) -> Self {
        FeatureVector { mfi_id, rating_norm: None, lar_norm: None, fairness: None, service_p90: None, epc: None }
    }

    pub fn get(&self, f: Feature) -> Option<f64> {
        match f {
            Feature::Rating => self.rating_norm,
            Feature::Lar => self.lar_norm,
            Feature::Fairness => self.fairness.map(f64::from),
            Feature::Service => self.service_p90,
            Feature::Epc => self.epc,
        }
    }

    /// The features with a value, in canonical order.
    pub fn present(&self) -> Vec<Feature> {
        Feature::ALL.into_iter().filter(|f| self.get(*f).is_some()).collect()
    }
}

/// Earnings per click: total sale income of `mfi` over its click count.
pub fn epc<'a>(
    clicks: impl IntoIterator<Item = &'a ClickRecord>,
    conversions: impl IntoIterator<Item = &'a ConversionRecord>,
    mfi: &MfiId,
) -> Result<f64, FeatureError> {
    let n_clicks = clicks.into_iter().filter(|c| &c.mfi_id == mfi).count();
    let (income, sales) = conversions
        .into_iter()
        .filter(|r| &r.mfi_id == mfi && r.status == Status::Sale)
        .fold((0.0, 0usize), |(s, n), r| (s + r.sale_income(), n + 1));
    if sales == 0 {
        return Ok(0.0);
    }
    if n_clicks == 0 {
        return Err(FeatureError::SalesWithoutClicks(mfi.clone()));
    }
    Ok(income / n_clicks as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Loan types whose applications and clicks feed the features.
    pub loan_types: Vec<LoanType>,
    pub active: FeatureSet,
    pub durations: DurationPatterns,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { loan_types: vec![LoanType::Standard], active: FeatureSet::all(), durations: DurationPatterns::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Excluded {
    pub mfi_id: MfiId,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub active: FeatureSet,
    /// Sorted by lender id.
    pub vectors: Vec<FeatureVector>,
    pub fairness: BTreeMap<MfiId, FairnessScore>,
    pub excluded: Vec<Excluded>,
    pub rating_prior: Option<RatingPrior>,
    pub lar_prior: Option<LarPrior>,
}

impl FeatureTable {
    pub fn get(&self, mfi: &MfiId) -> Option<&FeatureVector> {
        self.vectors.iter().find(|v| &v.mfi_id == mfi)
    }
}

/// One feature vector per lender present in both the conversions (within the
/// configured loan types) and the product table.
///
/// Applications with a negative timeline are left out of every feature. A
/// lender for which an active feature cannot be computed is excluded and
/// listed in [`FeatureTable::excluded`].
pub fn feature_table(data: &Datasets, config: &FeatureConfig) -> Result<FeatureTable, FeatureError> {
    let active = &config.active;
    let scoped: Vec<&ConversionRecord> = data
        .conversions
        .iter()
        .filter(|r| config.loan_types.contains(&r.loan_type) && !derive_timeline(r).invalid)
        .collect();
    let clicks: Vec<&ClickRecord> = data.clicks.iter().filter(|c| config.loan_types.contains(&c.loan_type)).collect();

    let reviews = mfi_reviews(&data.products);
    let rating_prior = if active.contains(Feature::Rating) {
        Some(rating_prior_from(reviews.values().copied())?)
    } else {
        None
    };
    let lar_prior = if active.contains(Feature::Lar) { Some(lar_prior(scoped.iter().copied())?) } else { None };
    let fallback_processing = mean_sale_processing(scoped.iter().copied());

    let mut by_mfi: BTreeMap<&MfiId, Vec<&ConversionRecord>> = BTreeMap::new();
    for r in &scoped {
        by_mfi.entry(&r.mfi_id).or_default().push(r);
    }
    let mut clicks_by_mfi: BTreeMap<&MfiId, Vec<&ClickRecord>> = BTreeMap::new();
    for c in &clicks {
        clicks_by_mfi.entry(&c.mfi_id).or_default().push(c);
    }

    let mut table = FeatureTable {
        active: active.clone(),
        vectors: Vec::new(),
        fairness: BTreeMap::new(),
        excluded: Vec::new(),
        rating_prior,
        lar_prior,
    };
    for (mfi, records) in by_mfi {
        let cards: Vec<_> = data.products.iter().filter(|p| &p.mfi_id == mfi).collect();
        let Some(card) = cards.iter().find(|p| config.loan_types.contains(&p.loan_type)).or(cards.first()) else {
            log::warn!("{mfi}: not in the product table, excluded");
            table.excluded.push(Excluded { mfi_id: mfi.clone(), reason: "not in product table".into() });
            continue;
        };
        let mut v = FeatureVector::empty(mfi.clone());
        let mut computed = || -> Result<Option<FairnessScore>, FeatureError> {
            let mut score = None;
            if let Some(prior) = &rating_prior {
                let (n, tau) = reviews.get(mfi).copied().unwrap_or((0, None));
                v.rating_norm = Some(normalize_rating(prior, n, tau.unwrap_or(0.0)));
            }
            if let Some(prior) = &lar_prior {
                let sales = records.iter().filter(|r| r.status == Status::Sale).count() as u64;
                v.lar_norm = Some(normalize_lar(prior, sales, records.len() as u64));
            }
            if active.contains(Feature::Fairness) {
                let s = fairness(&records, card, declared_sla(card, &config.durations));
                v.fairness = Some(s.points);
                score = Some(s);
            }
            if active.contains(Feature::Service) {
                v.service_p90 = Some(service_period_p90(mfi, &records, fallback_processing)?);
            }
            if active.contains(Feature::Epc) {
                let mfi_clicks = clicks_by_mfi.get(mfi).map(Vec::as_slice).unwrap_or_default();
                v.epc = Some(epc(mfi_clicks.iter().copied(), records.iter().copied(), mfi)?);
            }
            Ok(score)
        };
        match computed() {
            Ok(score) => {
                if let Some(s) = score {
                    table.fairness.insert(mfi.clone(), s);
                }
                table.vectors.push(v);
            }
            Err(e) => {
                log::warn!("{mfi}: {e}, excluded");
                table.excluded.push(Excluded { mfi_id: mfi.clone(), reason: e.to_string() });
            }
        }
    }
    Ok(table)
}

pub const FEATURE_CSV_HEADER: [&str; 6] = ["mfi_id", "rating_norm", "lar_norm", "fairness", "service_p90_sec", "epc"];

/// Feature table as CSV; inactive features are left blank.
pub fn write_feature_csv<W: Write>(out: W, vectors: &[FeatureVector]) -> Result<(), FeatureError> {
    fn cell<T: ToString>(v: Option<T>) -> String {
        v.map(|x| x.to_string()).unwrap_or_default()
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FEATURE_CSV_HEADER)?;
    for v in vectors {
        w.write_record([
            v.mfi_id.0.clone(),
            cell(v.rating_norm),
            cell(v.lar_norm),
            cell(v.fairness),
            cell(v.service_p90),
            cell(v.epc),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(input: R) -> Result<Vec<FeatureVector>, FeatureError> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let index = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = index("mfi_id").ok_or_else(|| FeatureError::Csv("missing column mfi_id".into()))?;
    let cols: Vec<Option<usize>> = FEATURE_CSV_HEADER[1..].iter().map(|h| index(h)).collect();
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let real = |k: usize| -> Result<Option<f64>, FeatureError> {
            let Some(raw) = cols[k].and_then(|c| rec.get(c)).map(str::trim).filter(|s| !s.is_empty()) else {
                return Ok(None);
            };
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Some)
                .ok_or_else(|| FeatureError::Csv(format!("line {line}: bad number {raw:?}")))
        };
        let fairness = match real(2)? {
            None => None,
            Some(p) if p.fract() == 0.0 && (0.0..=4.0).contains(&p) => Some(p as u8),
            Some(p) => return Err(FeatureError::Csv(format!("line {line}: fairness {p} not in 0..=4"))),
        };
        out.push(FeatureVector {
            mfi_id: MfiId::new(rec.get(id_col).unwrap_or_default().trim()),
            rating_norm: real(0)?,
            lar_norm: real(1)?,
            fairness,
            service_p90: real(3)?,
            epc: real(4)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_fixture, FixtureConfig};

    fn click(mfi: &str) -> ClickRecord {
        ClickRecord {
            mfi_id: mfi.into(),
            card_id: String::new(),
            click_time: chrono::NaiveDate::from_ymd_opt(2023, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap(),
            client_id: "c".into(),
            page_id: String::new(),
            page_rank: None,
            loan_type: LoanType::Standard,
            income: None,
        }
    }

    fn sale(mfi: &str, income: f64) -> ConversionRecord {
        let f = generate_fixture(1, 2, 1, &FixtureConfig::default()).unwrap();
        let mut r = f.conversions[0].clone();
        r.mfi_id = mfi.into();
        r.status = Status::Sale;
        r.income = Some(income);
        r
    }

    #[test]
    fn epc_examples() {
        let clicks: Vec<_> = (0..40).map(|_| click("A")).collect();
        let sales = vec![sale("A", 100.0), sale("A", 100.0), sale("B", 1000.0)];
        assert_eq!(epc(&clicks, &sales, &"A".into()).unwrap(), 5.0);
        assert_eq!(epc(&clicks, &[], &"A".into()).unwrap(), 0.0);
        assert!(matches!(epc(&clicks, &sales, &"B".into()), Err(FeatureError::SalesWithoutClicks(_))));
    }

    #[test]
    fn epc_scaling() {
        let clicks: Vec<_> = (0..10).map(|_| click("A")).collect();
        let base = epc(&clicks, &[sale("A", 30.0)], &"A".into()).unwrap();
        let doubled_income = epc(&clicks, &[sale("A", 60.0)], &"A".into()).unwrap();
        let more_clicks: Vec<_> = (0..20).map(|_| click("A")).collect();
        let halved = epc(&more_clicks, &[sale("A", 30.0)], &"A".into()).unwrap();
        assert_eq!(doubled_income, 2.0 * base);
        assert_eq!(halved, base / 2.0);
    }

    #[test]
    fn feature_set_parsing() {
        let s: FeatureSet = "epc, rating,lar".parse().unwrap();
        assert_eq!(s.to_string(), "rating,lar,epc");
        assert!(matches!("".parse::<FeatureSet>(), Err(FeatureError::EmptyFeatureSet)));
        assert!(matches!("rating,speed".parse::<FeatureSet>(), Err(FeatureError::UnknownFeature(_))));
    }

    #[test]
    fn subset_config_carries_three_features() {
        let data: Datasets = generate_fixture(4, 5, 300, &FixtureConfig::default()).unwrap().into();
        let config = FeatureConfig { active: "rating,lar,epc".parse().unwrap(), ..Default::default() };
        let table = feature_table(&data, &config).unwrap();
        assert!(!table.vectors.is_empty());
        for v in &table.vectors {
            assert_eq!(v.present(), vec![Feature::Rating, Feature::Lar, Feature::Epc]);
        }
        assert!(table.fairness.is_empty());
    }

    #[test]
    fn identical_lenders_get_identical_vectors() {
        let data: Datasets = generate_fixture(9, 3, 200, &FixtureConfig::default()).unwrap().into();
        // Clone lender "MFI 1" as "MFI 1b": same applications, clicks and card.
        let mut twin = data.clone();
        let src = MfiId::from("MFI 1");
        let dst = MfiId::from("MFI 1b");
        for r in data.conversions.iter().filter(|r| r.mfi_id == src) {
            let mut r = r.clone();
            r.mfi_id = dst.clone();
            twin.conversions.push(r);
        }
        for c in data.clicks.iter().filter(|c| c.mfi_id == src) {
            let mut c = c.clone();
            c.mfi_id = dst.clone();
            twin.clicks.push(c);
        }
        for p in data.products.iter().filter(|p| p.mfi_id == src) {
            let mut p = p.clone();
            p.mfi_id = dst.clone();
            p.card_id.push('b');
            twin.products.push(p);
        }
        let table = feature_table(&twin, &FeatureConfig::default()).unwrap();
        let a = table.get(&src).unwrap();
        let b = table.get(&dst).unwrap();
        assert_eq!(FeatureVector { mfi_id: dst.clone(), ..a.clone() }, b.clone());
    }

    #[test]
    fn lender_without_product_is_excluded() {
        let mut data: Datasets = generate_fixture(9, 3, 200, &FixtureConfig::default()).unwrap().into();
        data.products.retain(|p| p.mfi_id.as_str() != "MFI 2");
        let table = feature_table(&data, &FeatureConfig::default()).unwrap();
        assert!(table.get(&"MFI 2".into()).is_none());
        assert!(table.excluded.iter().any(|e| e.mfi_id.as_str() == "MFI 2"));
    }

    #[test]
    fn csv_round_trip() {
        let data: Datasets = generate_fixture(12, 4, 300, &FixtureConfig::default()).unwrap().into();
        let table = feature_table(&data, &FeatureConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &table.vectors).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("mfi_id,rating_norm,lar_norm,fairness,service_p90_sec,epc\n"));
        assert_eq!(read_feature_csv(buf.as_slice()).unwrap(), table.vectors);
    }
}
