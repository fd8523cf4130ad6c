use std::fmt;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

/// Identifier of a lender (an MFI) as it appears in every dataset.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MfiId(pub String);

impl MfiId {
    pub fn new(id: impl Into<String>) -> Self {
        MfiId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MfiId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for MfiId {
    fn from(s: &str) -> Self {
        MfiId(s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoanType {
    Standard,
    LongTerm,
    InterestFree,
}

impl LoanType {
    pub const ALL: [LoanType; 3] = [LoanType::Standard, LoanType::LongTerm, LoanType::InterestFree];

    pub fn as_str(self) -> &'static str {
        match self {
            LoanType::Standard => "standard",
            LoanType::LongTerm => "long-term",
            LoanType::InterestFree => "interest-free",
        }
    }
}

impl fmt::Display for LoanType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LoanType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "standard" | "loan-usual" => Ok(LoanType::Standard),
            "long-term" | "long_term" | "loan-long" => Ok(LoanType::LongTerm),
            "interest-free" | "interest_free" | "loan-free" => Ok(LoanType::InterestFree),
            other => Err(format!("unknown loan type {other:?}")),
        }
    }
}

/// Final (or current) status of an application.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pending,
    Sale,
    Rejected,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pending => "pending",
            Status::Sale => "sale",
            Status::Rejected => "rejected",
        }
    }

    /// `sale` and `rejected` are final; `pending` is not.
    pub fn is_final(self) -> bool {
        !matches!(self, Status::Pending)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geo {
    pub country: String,
    pub region: String,
    pub city: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Device {
    pub device_type: String,
    pub device: String,
    pub os: String,
    pub browser: String,
    pub connection_type: String,
    pub provider: String,
}

/// One loan application that reached the lender's site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConversionRecord {
    pub mfi_id: MfiId,
    pub loan_type: LoanType,
    pub card_id: String,
    pub page_id: String,
    pub page_rank: Option<u32>,
    pub global_rank: Option<u32>,
    pub click_time: NaiveDateTime,
    pub conversion_time: Option<NaiveDateTime>,
    pub sale_time: Option<NaiveDateTime>,
    pub status: Status,
    pub income: Option<f64>,
    pub client_id: String,
    pub geo: Geo,
    pub device: Device,
}

/// A broken record-level invariant. Reported, never fatal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordViolation {
    TimestampsOutOfOrder,
    SaleWithoutSaleTime,
    SaleWithoutIncome,
    SaleTimeOnNonSale,
}

impl ConversionRecord {
    pub fn violations(&self) -> Vec<RecordViolation> {
        let mut out = Vec::new();
        let ordered = match (self.conversion_time, self.sale_time) {
            (Some(c), Some(s)) => self.click_time <= c && c <= s,
            (Some(c), None) => self.click_time <= c,
            (None, Some(s)) => self.click_time <= s,
            (None, None) => true,
        };
        if !ordered {
            out.push(RecordViolation::TimestampsOutOfOrder);
        }
        match self.status {
            Status::Sale => {
                if self.sale_time.is_none() {
                    out.push(RecordViolation::SaleWithoutSaleTime);
                }
                if self.income.is_none() {
                    out.push(RecordViolation::SaleWithoutIncome);
                }
            }
            Status::Pending | Status::Rejected => {
                if self.sale_time.is_some() {
                    out.push(RecordViolation::SaleTimeOnNonSale);
                }
            }
        }
        out
    }

    /// Income credited to the aggregator: the record's income for sales, zero otherwise.
    pub fn sale_income(&self) -> f64 {
        match self.status {
            Status::Sale => self.income.unwrap_or(0.0),
            _ => 0.0,
        }
    }
}

/// One lender card (lender × loan type) from the product catalogue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductRecord {
    pub mfi_id: MfiId,
    pub card_id: String,
    pub loan_type: LoanType,
    pub region: String,
    pub work_schedule: String,
    pub application_receipt_schedule: String,
    pub processing_and_payment_schedule: String,
    pub submission_method: String,
    pub calls: String,
    pub documents: String,
    pub identification: String,
    pub application_processing: String,
    pub consideration_time: String,
    pub payment_time: String,
    pub payment_method: String,
    pub repayment_method: String,
    pub avg_user_rating: Option<f64>,
    pub n_reviews: u64,
    pub unreliability: bool,
    pub bad_credit_score: bool,
    pub loan_extension: bool,
    pub loan_amount_min: Option<f64>,
    pub loan_amount_max: Option<f64>,
    pub loan_term_min: Option<f64>,
    pub loan_term_max: Option<f64>,
    pub interest_min: Option<f64>,
    pub interest_max: Option<f64>,
    pub age_min: Option<f64>,
    pub age_max: Option<f64>,
}

impl ProductRecord {
    /// A card with no free-text fields filled in. Mostly useful for tests and fixtures.
    pub fn bare(mfi_id: MfiId, card_id: impl Into<String>, loan_type: LoanType) -> Self {
        ProductRecord {
            mfi_id,
            card_id: card_id.into(),
            loan_type,
            region: String::new(),
            work_schedule: String::new(),
            application_receipt_schedule: String::new(),
            processing_and_payment_schedule: String::new(),
            submission_method: String::new(),
            calls: String::new(),
            documents: String::new(),
            identification: String::new(),
            application_processing: String::new(),
            consideration_time: String::new(),
            payment_time: String::new(),
            payment_method: String::new(),
            repayment_method: String::new(),
            avg_user_rating: None,
            n_reviews: 0,
            unreliability: false,
            bad_credit_score: false,
            loan_extension: false,
            loan_amount_min: None,
            loan_amount_max: None,
            loan_term_min: None,
            loan_term_max: None,
            interest_min: None,
            interest_max: None,
            age_min: None,
            age_max: None,
        }
    }
}

/// A click-out from the aggregator to a lender card, converted or not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub mfi_id: MfiId,
    pub card_id: String,
    pub click_time: NaiveDateTime,
    pub client_id: String,
    pub page_id: String,
    pub page_rank: Option<u32>,
    pub loan_type: LoanType,
    pub income: Option<f64>,
}
