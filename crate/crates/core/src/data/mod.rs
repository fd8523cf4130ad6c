//! Raw dataset types, CSV parsing, per-application timelines and validation.

mod fixture;
mod parse;
mod records;
mod schema;
mod timeline;
mod validate;

use thiserror::Error;

pub use fixture::{generate_fixture, mfi_name, Fixture, FixtureConfig};
pub use parse::{
    format_timestamp, parse_clicks, parse_conversions, parse_products, parse_timestamp, write_clicks,
    write_conversions, write_products, Parsed, RowError, CLICK_COLUMNS, CONVERSION_COLUMNS, PRODUCT_COLUMNS,
    TIMESTAMP_FORMAT,
};
pub use records::{
    ClickRecord, ConversionRecord, Device, Geo, LoanType, MfiId, ProductRecord, RecordViolation, Status,
};
pub use schema::SchemaConfig;
pub use timeline::{derive_timeline, Timeline};
pub use validate::{validate, IntegrityWarning, MfiCounts, StatusShares, ValidationReport, WarningKind};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing mandatory column {0:?}")]
    MissingColumn(String),
    #[error("duplicate card_id {0:?} in product table")]
    DuplicateCard(String),
    #[error("fixture needs at least 2 MFIs, got {0}")]
    TooFewMfis(usize),
    #[error("invalid fixture config: {0}")]
    FixtureConfig(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Keep only records of the given loan types, in their original order.
pub fn filter_loan_types<'a>(
    records: impl IntoIterator<Item = &'a ConversionRecord>,
    loan_types: &[LoanType],
) -> Vec<&'a ConversionRecord> {
    records.into_iter().filter(|r| loan_types.contains(&r.loan_type)).collect()
}

pub fn filter_standard<'a>(records: impl IntoIterator<Item = &'a ConversionRecord>) -> Vec<&'a ConversionRecord> {
    filter_loan_types(records, &[LoanType::Standard])
}

/// The three parsed datasets, as consumed by the feature and evaluation stages.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Datasets {
    pub conversions: Vec<ConversionRecord>,
    pub products: Vec<ProductRecord>,
    pub clicks: Vec<ClickRecord>,
}

impl From<Fixture> for Datasets {
    fn from(f: Fixture) -> Self {
        Datasets { conversions: f.conversions, products: f.products, clicks: f.clicks }
    }
}
