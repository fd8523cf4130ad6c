//! Page-specific subsets of the global ranking.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::RankError;
use crate::data::{LoanType, MfiId, ProductRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Equals(String),
    AtLeast(f64),
    AtMost(f64),
    /// Case-insensitive substring of a text field.
    Contains(String),
}

/// A page constraint on one product field, e.g. `{"field": "loan_amount_max", "at_least": 30000}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageConstraint {
    pub field: String,
    #[serde(flatten)]
    pub predicate: Predicate,
}

enum Value<'a> {
    Text(&'a str),
    Number(Option<f64>),
    Bool(bool),
    Loan(LoanType),
}

fn field<'a>(p: &'a ProductRecord, name: &str) -> Option<Value<'a>> {
    use Value::*;
    Some(match name {
        "loan_type" => Loan(p.loan_type),
        "card_id" => Text(&p.card_id),
        "region" => Text(&p.region),
        "submission_method" => Text(&p.submission_method),
        "payment_method" => Text(&p.payment_method),
        "repayment_method" => Text(&p.repayment_method),
        "documents" => Text(&p.documents),
        "identification" => Text(&p.identification),
        "calls" => Text(&p.calls),
        "consideration_time" => Text(&p.consideration_time),
        "payment_time" => Text(&p.payment_time),
        "application_processing" => Text(&p.application_processing),
        "work_schedule" => Text(&p.work_schedule),
        "application_receipt_schedule" => Text(&p.application_receipt_schedule),
        "processing_and_payment_schedule" => Text(&p.processing_and_payment_schedule),
        "avg_user_rating" => Number(p.avg_user_rating),
        "n_reviews" => Number(Some(p.n_reviews as f64)),
        "loan_amount_min" => Number(p.loan_amount_min),
        "loan_amount_max" => Number(p.loan_amount_max),
        "loan_term_min" => Number(p.loan_term_min),
        "loan_term_max" => Number(p.loan_term_max),
        "interest_min" => Number(p.interest_min),
        "interest_max" => Number(p.interest_max),
        "age_min" => Number(p.age_min),
        "age_max" => Number(p.age_max),
        "unreliability" => Bool(p.unreliability),
        "bad_credit_score" => Bool(p.bad_credit_score),
        "loan_extension" => Bool(p.loan_extension),
        _ => return None,
    })
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_lowercase().as_str() {
        "true" | "yes" | "1" | "да" => Some(true),
        "false" | "no" | "0" | "нет" => Some(false),
        _ => None,
    }
}

impl PageConstraint {
    /// Reject unknown fields and predicates that cannot apply to the field's type.
    pub fn check(&self) -> Result<(), RankError> {
        let probe = ProductRecord::bare(MfiId::from(""), "", LoanType::Standard);
        let value = field(&probe, &self.field).ok_or_else(|| RankError::UnknownField(self.field.clone()))?;
        let bad = |why: &str| Err(RankError::BadConstraint(format!("{}: {why}", self.field)));
        match (&value, &self.predicate) {
            (Value::Number(_), Predicate::Contains(_)) => bad("contains on a numeric field"),
            (Value::Number(_), Predicate::Equals(s)) if s.trim().parse::<f64>().is_err() => bad("not a number"),
            (Value::Bool(_), Predicate::Equals(s)) if parse_bool(s).is_none() => bad("not a boolean"),
            (Value::Bool(_), Predicate::AtLeast(_) | Predicate::AtMost(_) | Predicate::Contains(_)) => {
                bad("only equals applies to a boolean field")
            }
            (Value::Loan(_), Predicate::Equals(s)) if s.parse::<LoanType>().is_err() => bad("unknown loan type"),
            (Value::Loan(_), Predicate::AtLeast(_) | Predicate::AtMost(_) | Predicate::Contains(_)) => {
                bad("only equals applies to the loan type")
            }
            (Value::Text(_), Predicate::AtLeast(_) | Predicate::AtMost(_)) => bad("ordering on a text field"),
            _ => Ok(()),
        }
    }

    /// Whether one product card satisfies the constraint. Missing numeric
    /// values never satisfy a constraint.
    pub fn matches(&self, product: &ProductRecord) -> bool {
        let Some(value) = field(product, &self.field) else { return false };
        match (value, &self.predicate) {
            (Value::Text(t), Predicate::Equals(s)) => t.trim().to_lowercase() == s.trim().to_lowercase(),
            (Value::Text(t), Predicate::Contains(s)) => t.to_lowercase().contains(&s.to_lowercase()),
            (Value::Number(Some(v)), Predicate::Equals(s)) => s.trim().parse::<f64>().is_ok_and(|x| v == x),
            (Value::Number(Some(v)), Predicate::AtLeast(x)) => v >= *x,
            (Value::Number(Some(v)), Predicate::AtMost(x)) => v <= *x,
            (Value::Bool(b), Predicate::Equals(s)) => parse_bool(s) == Some(b),
            (Value::Loan(l), Predicate::Equals(s)) => s.parse::<LoanType>().is_ok_and(|x| x == l),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageEntry {
    pub position: u32,
    pub mfi_id: MfiId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageRanking {
    pub entries: Vec<PageEntry>,
    pub warning: Option<String>,
}

/// Keep lenders with at least one card satisfying every constraint, in
/// global order, renumbered from 1.
pub fn page_filter(
    ranked: &[MfiId],
    products: &[ProductRecord],
    constraints: &[PageConstraint],
) -> Result<PageRanking, RankError> {
    for c in constraints {
        c.check()?;
    }
    let qualifying: BTreeSet<&MfiId> = products
        .iter()
        .filter(|p| constraints.iter().all(|c| c.matches(p)))
        .map(|p| &p.mfi_id)
        .collect();
    let entries: Vec<PageEntry> = ranked
        .iter()
        .filter(|m| qualifying.contains(m))
        .enumerate()
        .map(|(i, m)| PageEntry { position: i as u32 + 1, mfi_id: m.clone() })
        .collect();
    let warning = entries.is_empty().then(|| "no lender satisfies the page constraints".to_string());
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok(PageRanking { entries, warning })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn card(mfi: &str, id: &str, lt: LoanType, max_amount: f64, region: &str) -> ProductRecord {
        let mut p = ProductRecord::bare(mfi.into(), id, lt);
        p.loan_amount_max = Some(max_amount);
        p.region = region.into();
        p
    }

    fn cards() -> Vec<ProductRecord> {
        vec![
            card("A", "1", LoanType::Standard, 30_000.0, "Москва"),
            card("B", "2", LoanType::Standard, 10_000.0, "Вся Россия"),
            card("B", "3", LoanType::InterestFree, 50_000.0, "Вся Россия"),
            card("C", "4", LoanType::LongTerm, 100_000.0, "Москва"),
        ]
    }

    fn c(json: &str) -> PageConstraint {
        serde_json::from_str(json).unwrap()
    }

    fn ids(p: &PageRanking) -> Vec<&str> {
        p.entries.iter().map(|e| e.mfi_id.as_str()).collect()
    }

    #[test]
    fn preserves_global_order_and_renumbers() {
        let ranked: Vec<MfiId> = ["C", "B", "A"].map(MfiId::from).to_vec();
        let page = page_filter(&ranked, &cards(), &[c(r#"{"field": "loan_amount_max", "at_least": 30000}"#)]).unwrap();
        assert_eq!(ids(&page), ["C", "B", "A"]);
        assert_eq!(page.entries.iter().map(|e| e.position).collect::<Vec<_>>(), [1, 2, 3]);

        let page = page_filter(&ranked, &cards(), &[c(r#"{"field": "region", "contains": "москва"}"#)]).unwrap();
        assert_eq!(ids(&page), ["C", "A"]);
        assert_eq!(page.entries[1].position, 2);
    }

    #[test]
    fn all_constraints_on_one_card() {
        let ranked: Vec<MfiId> = ["A", "B", "C"].map(MfiId::from).to_vec();
        // B has a standard card and a large card, but not a large standard card.
        let page = page_filter(
            &ranked,
            &cards(),
            &[
                c(r#"{"field": "loan_type", "equals": "standard"}"#),
                c(r#"{"field": "loan_amount_max", "at_least": 20000}"#),
            ],
        )
        .unwrap();
        assert_eq!(ids(&page), ["A"]);
    }

    #[test]
    fn empty_result_warns() {
        let ranked: Vec<MfiId> = ["A"].map(MfiId::from).to_vec();
        let page = page_filter(&ranked, &cards(), &[c(r#"{"field": "loan_amount_max", "at_most": 1}"#)]).unwrap();
        assert!(page.entries.is_empty());
        assert!(page.warning.is_some());
    }

    #[test]
    fn invalid_constraints() {
        let ranked: Vec<MfiId> = vec![];
        assert!(matches!(
            page_filter(&ranked, &cards(), &[c(r#"{"field": "colour", "equals": "red"}"#)]),
            Err(RankError::UnknownField(_))
        ));
        assert!(matches!(
            page_filter(&ranked, &cards(), &[c(r#"{"field": "region", "at_least": 3}"#)]),
            Err(RankError::BadConstraint(_))
        ));
        assert!(matches!(
            page_filter(&ranked, &cards(), &[c(r#"{"field": "unreliability", "equals": "maybe"}"#)]),
            Err(RankError::BadConstraint(_))
        ));
    }

    #[test]
    fn booleans_and_missing_numbers() {
        let mut p = cards();
        p[0].bad_credit_score = true;
        p[1].loan_amount_max = None;
        let ranked: Vec<MfiId> = ["A", "B", "C"].map(MfiId::from).to_vec();
        let page = page_filter(&ranked, &p, &[c(r#"{"field": "bad_credit_score", "equals": "да"}"#)]).unwrap();
        assert_eq!(ids(&page), ["A"]);
        let only_card_2 = vec![p[1].clone()];
        let page = page_filter(&ranked, &only_card_2, &[c(r#"{"field": "loan_amount_max", "at_most": 1e9}"#)]).unwrap();
        assert!(page.entries.is_empty());
    }
}
