//! Whitelist section extraction: raw filing bodies in, clean narrative prose
//! out, one record per kept section.

mod clean;
mod detect;

pub use clean::{clean_lines, collapse_paragraphs, strip_markup};
pub use detect::detect_items;

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::edgar::{FilingDocument, FilingRef, FormType};
use crate::error::{Error, Result};

pub const DISCARD_INSUFFICIENT_TEXT: &str = "insufficient_text";
pub const DEFAULT_MIN_CHARS: usize = 2000;

/// The five narrative sections the corpus keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ItemLabel {
    #[serde(rename = "MDA")]
    Mda,
    #[serde(rename = "RISK_FACTORS")]
    RiskFactors,
    #[serde(rename = "BUSINESS")]
    Business,
    #[serde(rename = "CDA")]
    Cda,
    #[serde(rename = "NOTES_FS")]
    NotesFs,
}

impl ItemLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ItemLabel::Mda => "MDA",
            ItemLabel::RiskFactors => "RISK_FACTORS",
            ItemLabel::Business => "BUSINESS",
            ItemLabel::Cda => "CDA",
            ItemLabel::NotesFs => "NOTES_FS",
        }
    }

    /// Stable per-document ordering rank; each label appears at most once per
    /// filing, so (date, accession, rank) is a total dedup ordering key.
    pub fn rank(&self) -> u8 {
        *self as u8
    }
}

impl std::fmt::Display for ItemLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemSpan {
    pub item_label: ItemLabel,
    /// Offset of the first character after the heading line.
    pub start: usize,
    /// Offset of the next heading (or end of text).
    pub end: usize,
    pub heading_text: String,
}

#[derive(Debug, Clone)]
pub struct ExtractedDocument {
    pub filing_ref: FilingRef,
    pub sections: Vec<(ItemLabel, String)>,
    pub total_chars: usize,
    pub discarded: bool,
    pub discard_reason: Option<String>,
}

/// One kept section, the line-delimited interchange record between the
/// extract, dedup and pack stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionRecord {
    pub cik: String,
    pub accession: String,
    pub form: FormType,
    pub date: chrono::NaiveDate,
    pub item_label: ItemLabel,
    pub text: String,
}

impl SectionRecord {
    /// Canonical processing order: filing date, then accession, then the
    /// section's whitelist rank. Derivable from record content alone, so
    /// arrival order never matters.
    pub fn order_key(&self) -> (chrono::NaiveDate, String, u8) {
        (self.date, self.accession.clone(), self.item_label.rank())
    }

    pub fn doc_id(&self) -> String {
        format!("{}:{}", self.accession, self.item_label)
    }

    /// Whitespace-delimited word count; the token-accounting unit for stages
    /// that run before tokenization.
    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

/// Extracts the whitelisted sections of one filing. Filings whose combined
/// section text is shorter than `min_chars` are marked discarded.
pub fn extract_whitelist(doc: &FilingDocument, min_chars: usize) -> ExtractedDocument {
    let cleaned = clean_lines(&doc.raw_body);
    let spans = detect_items(&cleaned, doc.filing_ref.form_type);

    let mut sections = Vec::new();
    for span in &spans {
        let text = collapse_paragraphs(&cleaned[span.start..span.end]);
        if !text.is_empty() {
            sections.push((span.item_label, text));
        }
    }

    let total_chars: usize = sections.iter().map(|(_, t)| t.chars().count()).sum();
    let discarded = sections.is_empty() || total_chars < min_chars;
    ExtractedDocument {
        filing_ref: doc.filing_ref.clone(),
        sections: if discarded { Vec::new() } else { sections },
        total_chars,
        discarded,
        discard_reason: discarded.then(|| DISCARD_INSUFFICIENT_TEXT.to_string()),
    }
}

impl ExtractedDocument {
    pub fn into_records(self) -> Vec<SectionRecord> {
        let fref = self.filing_ref;
        self.sections
            .into_iter()
            .map(|(item_label, text)| SectionRecord {
                cik: fref.cik.clone(),
                accession: fref.accession_id.clone(),
                form: fref.form_type,
                date: fref.filing_date,
                item_label,
                text,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractStats {
    pub input_filings: usize,
    pub kept_filings: usize,
    pub discarded_filings: usize,
    pub sections_emitted: usize,
    pub total_chars: usize,
}

impl ExtractStats {
    pub fn discard_fraction(&self) -> f64 {
        if self.input_filings == 0 {
            0.0
        } else {
            self.discarded_filings as f64 / self.input_filings as f64
        }
    }
}

pub fn write_section_records(path: &Path, records: &[SectionRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Format(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_section_records(path: &Path) -> Result<Vec<SectionRecord>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| {
            Error::Format(format!("{}:{}: bad section record: {e}", path.display(), i + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edgar::DocumentSource;
    use chrono::NaiveDate;

    fn doc(form: FormType, body: &str) -> FilingDocument {
        FilingDocument::new(
            FilingRef {
                cik: "0000000001".into(),
                accession_id: "0000000001-24-000001".into(),
                form_type: form,
                filing_date: NaiveDate::from_ymd_opt(2024, 3, 1).unwrap(),
            },
            body.to_string(),
            DocumentSource::Local,
        )
        .unwrap()
    }

    const SENTENCE: &str = "Our subscription revenue expanded across the enterprise account base. ";

    fn filing_with_5000_chars() -> FilingDocument {
        let mda: String = SENTENCE.repeat(72); // slightly over 5,000 chars of prose
        doc(
            FormType::Form10K,
            &format!("<p>Item 7. Management's Discussion and Analysis</p><p>{mda}</p>"),
        )
    }

    #[test]
    fn five_thousand_char_filing_is_kept() {
        let extracted = extract_whitelist(&filing_with_5000_chars(), 2000);
        assert!(!extracted.discarded);
        assert_eq!(extracted.sections.len(), 1);
        assert_eq!(extracted.sections[0].0, ItemLabel::Mda);
        // Cleaning only trims the trailing space; every prose char survives.
        assert_eq!(extracted.total_chars, SENTENCE.len() * 72 - 1);
        assert!(extracted.total_chars > 5000);
    }

    #[test]
    fn tables_only_filing_is_discarded_with_reason() {
        let rows: String = (0..40)
            .map(|i| format!("<tr><td>2024</td><td>${i},000</td><td>{i}.5%</td></tr>"))
            .collect();
        let body =
            format!("<p>Item 7. Management's Discussion and Analysis</p><table>{rows}</table>");
        let extracted = extract_whitelist(&doc(FormType::Form10K, &body), 2000);
        assert!(extracted.discarded);
        assert_eq!(extracted.discard_reason.as_deref(), Some("insufficient_text"));
        assert!(extracted.sections.is_empty());
    }

    #[test]
    fn zero_min_chars_keeps_any_nonempty_match() {
        let body = "Item 7. Management's Discussion and Analysis\nShort but real prose.\n";
        let extracted = extract_whitelist(&doc(FormType::Form10K, body), 0);
        assert!(!extracted.discarded);
        assert_eq!(extracted.sections[0].1, "Short but real prose.");
    }

    #[test]
    fn raising_min_chars_never_revives_a_discard() {
        let candidates = [
            filing_with_5000_chars(),
            doc(FormType::Form10K, "Item 7. MD&A\nTiny.\n"),
            doc(FormType::Form10K, "No headings at all, just text.\n"),
        ];
        for d in &candidates {
            let mut prev_kept = !extract_whitelist(d, 0).discarded;
            for min_chars in [1, 100, 2000, 10_000] {
                let kept = !extract_whitelist(d, min_chars).discarded;
                assert!(
                    !kept || prev_kept,
                    "raising min_chars to {min_chars} revived a discarded filing"
                );
                prev_kept = kept;
            }
        }
    }

    #[test]
    fn extraction_is_deterministic_and_markup_free() {
        let d = filing_with_5000_chars();
        let a = extract_whitelist(&d, 2000);
        let b = extract_whitelist(&d, 2000);
        assert_eq!(a.sections, b.sections);
        for (_, text) in &a.sections {
            assert!(!text
                .as_bytes()
                .windows(2)
                .any(|w| w[0] == b'<' && w[1].is_ascii_alphabetic()));
        }
    }

    #[test]
    fn section_records_round_trip_through_jsonl() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("sections.jsonl");
        let records = extract_whitelist(&filing_with_5000_chars(), 2000).into_records();
        assert_eq!(records.len(), 1);
        write_section_records(&path, &records).unwrap();
        assert_eq!(read_section_records(&path).unwrap(), records);
    }

    #[test]
    fn order_key_is_total_and_data_derived() {
        let mut records = extract_whitelist(&filing_with_5000_chars(), 2000).into_records();
        let mut r2 = records[0].clone();
        r2.item_label = ItemLabel::Business;
        records.push(r2);
        records.sort_by_key(|r| r.order_key());
        assert_eq!(records[0].item_label, ItemLabel::Mda, "MDA ranks before BUSINESS");
    }
}
