//! EDGAR-compatible filing access: the ticker-CIK company map, per-company
//! filing indexes, and raw filing bodies, with a sliding-window rate limiter
//! and an on-disk cache. A local directory tree laid out like the remote
//! endpoint serves as the offline fixture mode.

mod cache;
mod client;
mod rate_limit;
mod transport;

pub use cache::FilingCache;
pub use client::{ClientConfig, EdgarClient};
pub use rate_limit::RateLimiter;
pub use transport::Transport;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three filing forms the corpus is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FormType {
    #[serde(rename = "10-K")]
    Form10K,
    #[serde(rename = "10-Q")]
    Form10Q,
    #[serde(rename = "DEF 14A")]
    Def14A,
}

impl FormType {
    pub fn as_str(&self) -> &'static str {
        match self {
            FormType::Form10K => "10-K",
            FormType::Form10Q => "10-Q",
            FormType::Def14A => "DEF 14A",
        }
    }

    pub fn parse(s: &str) -> Option<FormType> {
        match s.trim() {
            "10-K" => Some(FormType::Form10K),
            "10-Q" => Some(FormType::Form10Q),
            "DEF 14A" => Some(FormType::Def14A),
            _ => None,
        }
    }
}

impl std::fmt::Display for FormType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompanyRecord {
    /// Zero-padded 10-digit CIK.
    pub cik: String,
    pub ticker: String,
    pub name: String,
}

impl CompanyRecord {
    pub fn new(cik_number: u64, ticker: &str, name: &str) -> Self {
        Self {
            cik: format!("{cik_number:010}"),
            ticker: ticker.to_string(),
            name: name.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FilingRef {
    pub cik: String,
    /// Accession number normalized to `\d{10}-\d{2}-\d{6}`.
    pub accession_id: String,
    pub form_type: FormType,
    pub filing_date: NaiveDate,
}

/// Normalizes an accession number to the dashed `\d{10}-\d{2}-\d{6}` form.
pub fn normalize_accession(raw: &str) -> Result<String> {
    let digits: String = raw.chars().filter(|c| c.is_ascii_digit()).collect();
    if digits.len() != 18 || raw.chars().any(|c| !c.is_ascii_digit() && c != '-') {
        return Err(Error::Format(format!("bad accession number `{raw}`")));
    }
    Ok(format!(
        "{}-{}-{}",
        &digits[..10],
        &digits[10..12],
        &digits[12..]
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocumentSource {
    Network,
    Cache,
    Local,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilingDocument {
    #[serde(rename = "ref")]
    pub filing_ref: FilingRef,
    pub raw_body: String,
    pub byte_length: usize,
    pub source: DocumentSource,
}

impl FilingDocument {
    pub fn new(filing_ref: FilingRef, raw_body: String, source: DocumentSource) -> Result<Self> {
        if raw_body.is_empty() {
            return Err(Error::Format(format!(
                "filing {} has an empty body",
                filing_ref.accession_id
            )));
        }
        Ok(Self {
            byte_length: raw_body.len(),
            filing_ref,
            raw_body,
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accession_normalization() {
        assert_eq!(
            normalize_accession("0000320193-23-000106").unwrap(),
            "0000320193-23-000106"
        );
        assert_eq!(
            normalize_accession("000032019323000106").unwrap(),
            "0000320193-23-000106"
        );
        assert!(normalize_accession("not-an-accession").is_err());
        assert!(normalize_accession("12345").is_err());
    }

    #[test]
    fn cik_is_zero_padded_to_ten_digits() {
        let c = CompanyRecord::new(320193, "AAPL", "Apple Inc.");
        assert_eq!(c.cik, "0000320193");
        assert_eq!(c.cik.len(), 10);
    }

    #[test]
    fn empty_body_rejected() {
        let fref = FilingRef {
            cik: "0000000001".into(),
            accession_id: "0000000001-20-000001".into(),
            form_type: FormType::Form10K,
            filing_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
        };
        assert!(FilingDocument::new(fref, String::new(), DocumentSource::Local).is_err());
    }
}
