//! CSV readers and writers for the three raw datasets.
//!
//! Readers are lenient at the cell level (an unparseable optional cell becomes
//! absent, a bad mandatory cell drops the row into [`Parsed::errors`]) and
//! strict at the file level (a missing mandatory column or a duplicate card
//! aborts the whole parse).

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use chrono::NaiveDateTime;
use csv::StringRecord;
use serde::{Deserialize, Serialize};

use super::records::{ClickRecord, ConversionRecord, Device, Geo, MfiId, ProductRecord};
use super::schema::SchemaConfig;
use super::DataError;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

pub const CONVERSION_COLUMNS: [&str; 21] = [
    "mfi_id",
    "loan_type",
    "card_id",
    "page_id",
    "page_rank",
    "global_rank",
    "click_time",
    "conversion_time",
    "sale_time",
    "status",
    "income",
    "client_id",
    "country",
    "region",
    "city",
    "device_type",
    "device",
    "os",
    "browser",
    "connection_type",
    "provider",
];
const CONVERSION_MANDATORY: [&str; 5] = ["mfi_id", "client_id", "click_time", "status", "loan_type"];

pub const PRODUCT_COLUMNS: [&str; 29] = [
    "mfi_id",
    "region",
    "work_schedule",
    "application_receipt_schedule",
    "processing_and_payment_schedule",
    "submission_method",
    "calls",
    "documents",
    "identification",
    "application_processing",
    "consideration_time",
    "payment_method",
    "payment_time",
    "repayment_method",
    "avg_user_rating",
    "n_reviews",
    "unreliability",
    "bad_credit_score",
    "loan_extension",
    "loan_type",
    "card_id",
    "loan_amount_min",
    "loan_amount_max",
    "loan_term_min",
    "loan_term_max",
    "interest_min",
    "interest_max",
    "age_min",
    "age_max",
];
const PRODUCT_MANDATORY: [&str; 3] = ["mfi_id", "card_id", "loan_type"];

pub const CLICK_COLUMNS: [&str; 8] = [
    "mfi_id",
    "card_id",
    "click_time",
    "client_id",
    "page_id",
    "page_rank",
    "loan_type",
    "income",
];
const CLICK_MANDATORY: [&str; 4] = ["mfi_id", "client_id", "click_time", "loan_type"];

/// A row that could not be turned into a record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based line number in the file, header included.
    pub line: u64,
    pub column: Option<String>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub errors: Vec<RowError>,
}

pub fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    if raw.is_empty() {
        return None;
    }
    ["%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
}

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

fn parse_real(raw: &str) -> Option<f64> {
    let v: f64 = raw.trim().replace(',', ".").parse().ok()?;
    v.is_finite().then_some(v)
}

/// Ranks are written as `4` or `4.0` depending on the export.
fn parse_rank(raw: &str) -> Option<u32> {
    let v = parse_real(raw)?;
    (v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64).then_some(v as u32)
}

fn parse_count(raw: &str) -> Option<u64> {
    let v = parse_real(raw)?;
    (v >= 0.0 && v.fract() == 0.0).then_some(v as u64)
}

struct Columns {
    index: HashMap<&'static str, usize>,
}

impl Columns {
    fn resolve(
        headers: &StringRecord,
        schema: &SchemaConfig,
        canonical: &[&'static str],
        mandatory: &[&str],
    ) -> Result<Self, DataError> {
        let lookup: HashMap<&str, usize> =
            headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
        let mut index = HashMap::new();
        for &name in canonical {
            if let Some(&i) = lookup.get(schema.column(name)) {
                index.insert(name, i);
            }
        }
        for &name in mandatory {
            if !index.contains_key(name) {
                return Err(DataError::MissingColumn(schema.column(name).to_string()));
            }
        }
        Ok(Columns { index })
    }
}

struct Row<'a> {
    rec: &'a StringRecord,
    cols: &'a Columns,
    line: u64,
}

impl<'a> Row<'a> {
    fn raw(&self, name: &str) -> Option<&'a str> {
        let i = *self.cols.index.get(name)?;
        self.rec.get(i).map(str::trim).filter(|s| !s.is_empty())
    }

    fn text(&self, name: &str) -> String {
        self.raw(name).unwrap_or_default().to_string()
    }

    fn real(&self, name: &str) -> Option<f64> {
        self.raw(name).and_then(parse_real)
    }

    fn rank(&self, name: &str) -> Option<u32> {
        self.raw(name).and_then(parse_rank)
    }

    fn timestamp(&self, name: &str) -> Option<NaiveDateTime> {
        self.raw(name).and_then(parse_timestamp)
    }

    fn error(&self, column: &str, message: impl Into<String>) -> RowError {
        RowError { line: self.line, column: Some(column.to_string()), message: message.into() }
    }

    fn required(&self, name: &str) -> Result<&'a str, RowError> {
        self.raw(name).ok_or_else(|| self.error(name, "empty mandatory field"))
    }

    fn required_timestamp(&self, name: &str) -> Result<NaiveDateTime, RowError> {
        let raw = self.required(name)?;
        parse_timestamp(raw).ok_or_else(|| self.error(name, format!("malformed timestamp {raw:?}")))
    }
}

fn for_each_row<R: Read>(
    input: R,
    schema: &SchemaConfig,
    canonical: &[&'static str],
    mandatory: &[&str],
    mut f: impl FnMut(&Row<'_>) -> Result<(), RowError>,
) -> Result<Vec<RowError>, DataError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        // Zero-byte file: nothing to resolve, nothing to read.
        return Ok(Vec::new());
    }
    let cols = Columns::resolve(&headers, schema, canonical, mandatory)?;
    let mut errors = Vec::new();
    let mut rec = StringRecord::new();
    let mut line = 1;
    while reader.read_record(&mut rec)? {
        line += 1;
        let row = Row { rec: &rec, cols: &cols, line };
        if let Err(e) = f(&row) {
            errors.push(e);
        }
    }
    Ok(errors)
}

pub fn parse_conversions<R: Read>(
    input: R,
    schema: &SchemaConfig,
) -> Result<Parsed<ConversionRecord>, DataError> {
    let mut records = Vec::new();
    let errors = for_each_row(input, schema, &CONVERSION_COLUMNS, &CONVERSION_MANDATORY, |row| {
        let loan_raw = row.required("loan_type")?;
        let loan_type = schema.loan_type(loan_raw).map_err(|e| row.error("loan_type", e))?;
        let income = row.real("income").filter(|v| *v >= 0.0);
        records.push(ConversionRecord {
            mfi_id: MfiId::new(row.required("mfi_id")?),
            loan_type,
            card_id: row.text("card_id"),
            page_id: row.text("page_id"),
            page_rank: row.rank("page_rank"),
            global_rank: row.rank("global_rank"),
            click_time: row.required_timestamp("click_time")?,
            conversion_time: row.timestamp("conversion_time"),
            sale_time: row.timestamp("sale_time"),
            status: schema.status(row.required("status")?),
            income,
            client_id: row.required("client_id")?.to_string(),
            geo: Geo { country: row.text("country"), region: row.text("region"), city: row.text("city") },
            device: Device {
                device_type: row.text("device_type"),
                device: row.text("device"),
                os: row.text("os"),
                browser: row.text("browser"),
                connection_type: row.text("connection_type"),
                provider: row.text("provider"),
            },
        });
        Ok(())
    })?;
    Ok(Parsed { records, errors })
}

fn check_range(row: &Row<'_>, lo: &str, hi: &str) -> Result<(Option<f64>, Option<f64>), RowError> {
    let (a, b) = (row.real(lo), row.real(hi));
    if let (Some(a), Some(b)) = (a, b) {
        if a > b {
            return Err(row.error(lo, format!("{lo} {a} exceeds {hi} {b}")));
        }
    }
    Ok((a, b))
}

pub fn parse_products<R: Read>(
    input: R,
    schema: &SchemaConfig,
) -> Result<Parsed<ProductRecord>, DataError> {
    let mut records: Vec<ProductRecord> = Vec::new();
    let mut seen_cards = HashSet::new();
    let mut duplicate = None;
    let errors = for_each_row(input, schema, &PRODUCT_COLUMNS, &PRODUCT_MANDATORY, |row| {
        let card_id = row.required("card_id")?.to_string();
        if !seen_cards.insert(card_id.clone()) {
            duplicate.get_or_insert(card_id.clone());
            return Ok(());
        }
        let loan_raw = row.required("loan_type")?;
        let loan_type = schema.loan_type(loan_raw).map_err(|e| row.error("loan_type", e))?;
        let n_reviews = match row.raw("n_reviews") {
            None => 0,
            Some(raw) => parse_count(raw)
                .ok_or_else(|| row.error("n_reviews", format!("not a count: {raw:?}")))?,
        };
        let mut avg_user_rating = row.real("avg_user_rating");
        if let Some(r) = avg_user_rating {
            if !(1.0..=5.0).contains(&r) {
                if n_reviews == 0 {
                    avg_user_rating = None;
                } else {
                    return Err(row.error("avg_user_rating", format!("rating {r} outside [1, 5]")));
                }
            }
        }
        let flag = |name: &str| -> Result<bool, RowError> {
            let raw = row.raw(name).unwrap_or_default();
            schema
                .boolean(raw)
                .ok_or_else(|| row.error(name, format!("unrecognised boolean {raw:?}")))
        };
        let (loan_amount_min, loan_amount_max) = check_range(row, "loan_amount_min", "loan_amount_max")?;
        let (loan_term_min, loan_term_max) = check_range(row, "loan_term_min", "loan_term_max")?;
        let (interest_min, interest_max) = check_range(row, "interest_min", "interest_max")?;
        let (age_min, age_max) = check_range(row, "age_min", "age_max")?;
        records.push(ProductRecord {
            mfi_id: MfiId::new(row.required("mfi_id")?),
            card_id,
            loan_type,
            region: row.text("region"),
            work_schedule: row.text("work_schedule"),
            application_receipt_schedule: row.text("application_receipt_schedule"),
            processing_and_payment_schedule: row.text("processing_and_payment_schedule"),
            submission_method: row.text("submission_method"),
            calls: row.text("calls"),
            documents: row.text("documents"),
            identification: row.text("identification"),
            application_processing: row.text("application_processing"),
            consideration_time: row.text("consideration_time"),
            payment_time: row.text("payment_time"),
            payment_method: row.text("payment_method"),
            repayment_method: row.text("repayment_method"),
            avg_user_rating,
            n_reviews,
            unreliability: flag("unreliability")?,
            bad_credit_score: flag("bad_credit_score")?,
            loan_extension: flag("loan_extension")?,
            loan_amount_min,
            loan_amount_max,
            loan_term_min,
            loan_term_max,
            interest_min,
            interest_max,
            age_min,
            age_max,
        });
        Ok(())
    })?;
    if let Some(card) = duplicate {
        return Err(DataError::DuplicateCard(card));
    }
    Ok(Parsed { records, errors })
}

pub fn parse_clicks<R: Read>(input: R, schema: &SchemaConfig) -> Result<Parsed<ClickRecord>, DataError> {
    let mut records = Vec::new();
    let errors = for_each_row(input, schema, &CLICK_COLUMNS, &CLICK_MANDATORY, |row| {
        let loan_raw = row.required("loan_type")?;
        let loan_type = schema.loan_type(loan_raw).map_err(|e| row.error("loan_type", e))?;
        records.push(ClickRecord {
            mfi_id: MfiId::new(row.required("mfi_id")?),
            card_id: row.text("card_id"),
            click_time: row.required_timestamp("click_time")?,
            client_id: row.required("client_id")?.to_string(),
            page_id: row.text("page_id"),
            page_rank: row.rank("page_rank"),
            loan_type,
            income: row.real("income").filter(|v| *v >= 0.0),
        });
        Ok(())
    })?;
    Ok(Parsed { records, errors })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_ts(v: Option<NaiveDateTime>) -> String {
    v.as_ref().map(format_timestamp).unwrap_or_default()
}

fn write_header<W: Write>(w: &mut csv::Writer<W>, schema: &SchemaConfig, cols: &[&str]) -> Result<(), DataError> {
    w.write_record(cols.iter().map(|c| schema.column(c)))?;
    Ok(())
}

pub fn write_conversions<W: Write>(
    out: W,
    records: &[ConversionRecord],
    schema: &SchemaConfig,
) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    write_header(&mut w, schema, &CONVERSION_COLUMNS)?;
    for r in records {
        w.write_record([
            r.mfi_id.0.clone(),
            r.loan_type.to_string(),
            r.card_id.clone(),
            r.page_id.clone(),
            opt(r.page_rank),
            opt(r.global_rank),
            format_timestamp(&r.click_time),
            opt_ts(r.conversion_time),
            opt_ts(r.sale_time),
            schema.status_spelling(r.status),
            opt(r.income),
            r.client_id.clone(),
            r.geo.country.clone(),
            r.geo.region.clone(),
            r.geo.city.clone(),
            r.device.device_type.clone(),
            r.device.device.clone(),
            r.device.os.clone(),
            r.device.browser.clone(),
            r.device.connection_type.clone(),
            r.device.provider.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_products<W: Write>(
    out: W,
    records: &[ProductRecord],
    schema: &SchemaConfig,
) -> Result<(), DataError> {
    let yes_no = |b: bool| if b { "Да" } else { "Нет" }.to_string();
    let mut w = csv::Writer::from_writer(out);
    write_header(&mut w, schema, &PRODUCT_COLUMNS)?;
    for p in records {
        w.write_record([
            p.mfi_id.0.clone(),
            p.region.clone(),
            p.work_schedule.clone(),
            p.application_receipt_schedule.clone(),
            p.processing_and_payment_schedule.clone(),
            p.submission_method.clone(),
            p.calls.clone(),
            p.documents.clone(),
            p.identification.clone(),
            p.application_processing.clone(),
            p.consideration_time.clone(),
            p.payment_method.clone(),
            p.payment_time.clone(),
            p.repayment_method.clone(),
            opt(p.avg_user_rating),
            p.n_reviews.to_string(),
            yes_no(p.unreliability),
            yes_no(p.bad_credit_score),
            yes_no(p.loan_extension),
            p.loan_type.to_string(),
            p.card_id.clone(),
            opt(p.loan_amount_min),
            opt(p.loan_amount_max),
            opt(p.loan_term_min),
            opt(p.loan_term_max),
            opt(p.interest_min),
            opt(p.interest_max),
            opt(p.age_min),
            opt(p.age_max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_clicks<W: Write>(out: W, records: &[ClickRecord], schema: &SchemaConfig) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    write_header(&mut w, schema, &CLICK_COLUMNS)?;
    for c in records {
        w.write_record([
            c.mfi_id.0.clone(),
            c.card_id.clone(),
            format_timestamp(&c.click_time),
            c.client_id.clone(),
            c.page_id.clone(),
            opt(c.page_rank),
            c.loan_type.to_string(),
            opt(c.income),
        ])?;
    }
    w.flush()?;
    Ok(())
}
