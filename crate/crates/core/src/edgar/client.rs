use std::collections::BTreeMap;
use std::collections::HashSet;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::Deserialize;

use crate::error::{Error, Result};

use super::cache::FilingCache;
use super::rate_limit::RateLimiter;
use super::transport::Transport;
use super::{CompanyRecord, DocumentSource, FilingDocument, FilingRef, FormType};

pub const TICKER_MAP_PATH: &str = "files/company_tickers.json";

#[derive(Debug, Clone)]
pub struct ClientConfig {
    /// `http(s)://…` for a live or mock endpoint, or a directory path
    /// (optionally `file://…`) for offline fixture trees.
    pub endpoint: String,
    /// Descriptive identification as required by the SEC fair-access policy,
    /// e.g. "Example Research admin@example.com".
    pub user_agent: String,
    /// Max requests per sliding second against a remote endpoint.
    pub rate_cap: usize,
    pub cache_dir: std::path::PathBuf,
    /// Anchor for the "last N years" filing window; pinned in configs so
    /// fixture runs reproduce.
    pub run_date: NaiveDate,
}

pub struct EdgarClient {
    transport: Transport,
    cache: FilingCache,
    run_date: NaiveDate,
}

impl EdgarClient {
    pub fn new(config: ClientConfig) -> Result<Self> {
        let ua = config.user_agent.trim();
        if ua.is_empty() || !(ua.contains(' ') || ua.contains('@')) {
            return Err(Error::Config(
                "user_agent must identify the operator (name and contact), e.g. \
                 \"Example Research admin@example.com\""
                    .into(),
            ));
        }
        if config.rate_cap == 0 {
            return Err(Error::Config("rate_cap must be at least 1".into()));
        }
        let endpoint = config.endpoint.trim();
        let transport = if endpoint.starts_with("http://") || endpoint.starts_with("https://") {
            Transport::http(
                endpoint,
                ua,
                Arc::new(RateLimiter::new(config.rate_cap)),
            )
        } else {
            let root = endpoint.strip_prefix("file://").unwrap_or(endpoint);
            if root.is_empty() {
                return Err(Error::Config("endpoint is empty".into()));
            }
            Transport::local(root)
        };
        Ok(Self {
            transport,
            cache: FilingCache::new(config.cache_dir),
            run_date: config.run_date,
        })
    }

    pub fn run_date(&self) -> NaiveDate {
        self.run_date
    }

    /// First `limit` companies from the published ticker-CIK mapping, in
    /// source order, deduplicated by CIK.
    pub fn fetch_ticker_cik_map(&self, limit: usize) -> Result<Vec<CompanyRecord>> {
        if limit == 0 {
            return Err(Error::Config("company limit must be at least 1".into()));
        }

        #[derive(Deserialize)]
        struct Entry {
            cik_str: u64,
            ticker: String,
            title: String,
        }

        let bytes = self.transport.get(TICKER_MAP_PATH)?;
        let raw: BTreeMap<String, Entry> = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Format(format!("ticker map unparseable: {e}")))?;

        let mut ordered: Vec<(usize, Entry)> = raw
            .into_iter()
            .map(|(k, v)| {
                k.parse::<usize>()
                    .map(|i| (i, v))
                    .map_err(|_| Error::Format(format!("ticker map has non-numeric index `{k}`")))
            })
            .collect::<Result<_>>()?;
        ordered.sort_by_key(|(i, _)| *i);

        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (_, e) in ordered {
            if e.ticker.is_empty() {
                continue;
            }
            if seen.insert(e.cik_str) {
                out.push(CompanyRecord::new(e.cik_str, &e.ticker, &e.title));
                if out.len() == limit {
                    break;
                }
            }
        }
        Ok(out)
    }

    /// Filing references for one company, filtered to the requested forms and
    /// to filings dated within `years` years of the run date, ascending.
    pub fn list_filings(
        &self,
        company: &CompanyRecord,
        forms: &[FormType],
        years: u32,
    ) -> Result<Vec<FilingRef>> {
        if years == 0 {
            return Err(Error::Config("years must be at least 1".into()));
        }
        if forms.is_empty() {
            return Ok(Vec::new());
        }

        #[derive(Deserialize)]
        struct Submissions {
            filings: Filings,
        }
        #[derive(Deserialize)]
        struct Filings {
            recent: Recent,
        }
        #[derive(Deserialize)]
        #[serde(rename_all = "camelCase")]
        struct Recent {
            accession_number: Vec<String>,
            filing_date: Vec<String>,
            form: Vec<String>,
        }

        let path = format!("submissions/CIK{}.json", company.cik);
        let bytes = self.transport.get(&path)?;
        let subs: Submissions = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Format(format!("submissions index for {}: {e}", company.cik)))?;
        let recent = subs.filings.recent;
        if recent.accession_number.len() != recent.filing_date.len()
            || recent.accession_number.len() != recent.form.len()
        {
            return Err(Error::Format(format!(
                "submissions index for {} has ragged columns",
                company.cik
            )));
        }

        let cutoff = years_before(self.run_date, years);
        let mut refs = Vec::new();
        for i in 0..recent.accession_number.len() {
            let Some(form_type) = FormType::parse(&recent.form[i]) else {
                continue;
            };
            if !forms.contains(&form_type) {
                continue;
            }
            let filing_date = NaiveDate::parse_from_str(&recent.filing_date[i], "%Y-%m-%d")
                .map_err(|e| {
                    Error::Format(format!("bad filing date `{}`: {e}", recent.filing_date[i]))
                })?;
            if filing_date <= cutoff || filing_date > self.run_date {
                continue;
            }
            refs.push(FilingRef {
                cik: company.cik.clone(),
                accession_id: super::normalize_accession(&recent.accession_number[i])?,
                form_type,
                filing_date,
            });
        }
        refs.sort_by(|a, b| {
            (a.filing_date, &a.accession_id).cmp(&(b.filing_date, &b.accession_id))
        });
        Ok(refs)
    }

    /// Fetches one filing body, preferring the on-disk cache for remote
    /// transports. A corrupt cache entry is evicted and refetched once.
    pub fn fetch_filing(&self, filing_ref: &FilingRef) -> Result<FilingDocument> {
        if !self.transport.is_remote() {
            let bytes = self.transport.get(&archive_path(filing_ref))?;
            return document_from_bytes(filing_ref, bytes, DocumentSource::Local);
        }

        match self.cache.get(&filing_ref.cik, &filing_ref.accession_id) {
            Ok(Some(bytes)) => {
                return document_from_bytes(filing_ref, bytes, DocumentSource::Cache)
            }
            Ok(None) => {}
            Err(Error::CacheCorrupt(path)) => {
                log::warn!("cache entry corrupt, refetching: {path}");
                self.cache.evict(&filing_ref.cik, &filing_ref.accession_id)?;
            }
            Err(e) => return Err(e),
        }

        let bytes = self.transport.get(&archive_path(filing_ref))?;
        self.cache
            .put(&filing_ref.cik, &filing_ref.accession_id, &bytes)?;
        // Read back through the checksum path so a failed write surfaces now.
        match self.cache.get(&filing_ref.cik, &filing_ref.accession_id)? {
            Some(bytes) => document_from_bytes(filing_ref, bytes, DocumentSource::Network),
            None => Err(Error::CacheCorrupt(format!(
                "cache write for {} did not persist",
                filing_ref.accession_id
            ))),
        }
    }
}

/// Endpoint-relative path of the full submission text file.
pub fn archive_path(filing_ref: &FilingRef) -> String {
    let cik_short = filing_ref.cik.trim_start_matches('0');
    let nodash: String = filing_ref
        .accession_id
        .chars()
        .filter(|c| *c != '-')
        .collect();
    format!(
        "Archives/edgar/data/{}/{}/{}.txt",
        cik_short, nodash, filing_ref.accession_id
    )
}

fn document_from_bytes(
    filing_ref: &FilingRef,
    bytes: Vec<u8>,
    source: DocumentSource,
) -> Result<FilingDocument> {
    let text = String::from_utf8_lossy(&bytes).into_owned();
    let body = primary_document(&text, &filing_ref.accession_id);
    FilingDocument::new(filing_ref.clone(), body, source)
}

/// Full-submission files bundle several `<DOCUMENT>` blocks (exhibits,
/// graphics). Only the primary document feeds the corpus; the rest are
/// logged and dropped.
fn primary_document(full_text: &str, accession: &str) -> String {
    let blocks: Vec<&str> = full_text
        .split("<DOCUMENT>")
        .skip(1)
        .map(|b| b.split("</DOCUMENT>").next().unwrap_or(b))
        .collect();
    if blocks.is_empty() {
        return full_text.to_string();
    }
    if blocks.len() > 1 {
        log::debug!(
            "{accession}: taking primary document, ignoring {} secondary document(s)",
            blocks.len() - 1
        );
    }
    let primary = blocks[0];
    let inner = primary
        .split("<TEXT>")
        .nth(1)
        .map(|t| t.split("</TEXT>").next().unwrap_or(t))
        .unwrap_or(primary);
    inner.trim().to_string()
}

fn years_before(date: NaiveDate, years: u32) -> NaiveDate {
    use chrono::Datelike;
    let target_year = date.year() - years as i32;
    NaiveDate::from_ymd_opt(target_year, date.month(), date.day())
        // Feb 29 in a non-leap target year.
        .unwrap_or_else(|| NaiveDate::from_ymd_opt(target_year, 2, 28).unwrap())
}
