use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::records::{LoanType, Status};

/// How raw CSV files map onto the record types: header names and the
/// dictionaries used for enum-like and boolean-like cells.
///
/// Every field has a default, so an empty JSON object is a valid config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaConfig {
    /// Canonical column name → header used in the file. Columns not listed
    /// here are expected under their canonical name.
    pub columns: BTreeMap<String, String>,
    /// Raw status string (case-insensitive) → status. Anything unlisted is pending.
    pub status_values: BTreeMap<String, Status>,
    /// Extra raw loan-type spellings on top of the built-in aliases.
    pub loan_types: BTreeMap<String, LoanType>,
    pub true_values: Vec<String>,
    pub false_values: Vec<String>,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        let status_values = [("sale", Status::Sale), ("rejected", Status::Rejected)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        SchemaConfig {
            columns: BTreeMap::new(),
            status_values,
            loan_types: BTreeMap::new(),
            true_values: ["да", "есть", "true", "yes", "1"].map(String::from).to_vec(),
            false_values: ["нет", "false", "no", "0", ""].map(String::from).to_vec(),
        }
    }
}

impl SchemaConfig {
    /// Header for a canonical column name.
    pub fn column<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.columns.get(canonical).map(String::as_str).unwrap_or(canonical)
    }

    pub fn status(&self, raw: &str) -> Status {
        let key = raw.trim().to_lowercase();
        self.status_values
            .iter()
            .find(|(k, _)| k.to_lowercase() == key)
            .map(|(_, v)| *v)
            .unwrap_or(Status::Pending)
    }

    /// Spelling written back out for a status; the first dictionary key mapping to it.
    pub fn status_spelling(&self, status: Status) -> String {
        self.status_values
            .iter()
            .find(|(_, v)| **v == status)
            .map(|(k, _)| k.clone())
            .unwrap_or_else(|| status.as_str().to_string())
    }

    pub fn loan_type(&self, raw: &str) -> Result<LoanType, String> {
        let key = raw.trim().to_lowercase();
        if let Some((_, lt)) = self.loan_types.iter().find(|(k, _)| k.to_lowercase() == key) {
            return Ok(*lt);
        }
        key.parse()
    }

    pub fn boolean(&self, raw: &str) -> Option<bool> {
        let key = raw.trim().to_lowercase();
        if self.true_values.iter().any(|v| v.to_lowercase() == key) {
            Some(true)
        } else if self.false_values.iter().any(|v| v.to_lowercase() == key) {
            Some(false)
        } else {
            None
        }
    }
}
