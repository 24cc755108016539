//! Whitelist heading detection over cleaned filing text.
//!
//! Patterns are form-aware: Item 7 carries the management discussion in a
//! 10-K but Item 2 does in a 10-Q, and the compensation discussion exists
//! only in proxy statements. Notes to the financial statements are located by
//! their named heading rather than by structural tags.

use std::sync::OnceLock;

use regex::Regex;

use crate::edgar::FormType;

use super::{ItemLabel, ItemSpan};

/// Characters of prose required after a heading before the next heading for
/// the match to beat a table-of-contents entry.
const TOC_PROSE_GAP: usize = 500;

const NOTES: &str = r"notes[ \t]+to[ \t]+(?:the[ \t]+)?(?:consolidated[ \t]+|condensed[ \t]+|interim[ \t]+)*financial[ \t]+statements\b";
const CDA: &str = r"compensation[ \t]+discussion[ \t]+(?:and|&)[ \t]+analysis\b";

fn heading(core: &str) -> String {
    format!(r"(?im)^[ \t]*{core}[^\n]*")
}

fn label_patterns(form: FormType) -> &'static [(ItemLabel, Regex)] {
    static TEN_K: OnceLock<Vec<(ItemLabel, Regex)>> = OnceLock::new();
    static TEN_Q: OnceLock<Vec<(ItemLabel, Regex)>> = OnceLock::new();
    static DEF14A: OnceLock<Vec<(ItemLabel, Regex)>> = OnceLock::new();

    let compile = |pairs: &[(ItemLabel, &str)]| {
        pairs
            .iter()
            .map(|(l, p)| (*l, Regex::new(&heading(p)).expect("static regex")))
            .collect::<Vec<_>>()
    };

    match form {
        FormType::Form10K => TEN_K.get_or_init(|| {
            compile(&[
                (ItemLabel::Business, r"item[ \t]+1\b"),
                (ItemLabel::RiskFactors, r"item[ \t]+1a\b"),
                (ItemLabel::Mda, r"item[ \t]+7\b"),
                (ItemLabel::NotesFs, NOTES),
            ])
        }),
        FormType::Form10Q => TEN_Q.get_or_init(|| {
            compile(&[
                (ItemLabel::Mda, r"item[ \t]+2\b"),
                (ItemLabel::RiskFactors, r"item[ \t]+1a\b"),
                (ItemLabel::NotesFs, NOTES),
            ])
        }),
        FormType::Def14A => DEF14A.get_or_init(|| compile(&[(ItemLabel::Cda, CDA)])),
    }
}

/// Any heading that terminates a section: item headings of every number,
/// part dividers, the named headings, and the signature block.
fn boundary_pattern() -> &'static Regex {
    static BOUNDARY: OnceLock<Regex> = OnceLock::new();
    BOUNDARY.get_or_init(|| {
        Regex::new(&format!(
            r"(?im)^[ \t]*(?:item[ \t]+\d+[a-z]?\b|part[ \t]+[ivx]+\b|signatures?\b|{NOTES}|{CDA})"
        ))
        .expect("static regex")
    })
}

/// Locates whitelisted section spans in markup-free, line-structured text.
/// Offsets index into the text that was passed in; `start` points at the
/// first character after the heading line.
pub fn detect_items(text: &str, form: FormType) -> Vec<ItemSpan> {
    let boundaries: Vec<usize> = boundary_pattern().find_iter(text).map(|m| m.start()).collect();
    let next_boundary = |pos: usize| -> usize {
        match boundaries.binary_search(&(pos + 1)) {
            Ok(i) => boundaries[i],
            Err(i) => boundaries.get(i).copied().unwrap_or(text.len()),
        }
    };

    let mut spans = Vec::new();
    for (label, pattern) in label_patterns(form) {
        let candidates: Vec<(usize, usize, &str)> = pattern
            .find_iter(text)
            .map(|m| {
                let body_start = (m.end() + 1).min(text.len()); // skip the heading's newline
                (m.start(), body_start, m.as_str())
            })
            .collect();
        if candidates.is_empty() {
            continue;
        }

        // A lone match is taken as is. With repeats (table of contents plus
        // body), prefer the first match followed by real prose; if none
        // qualifies, the one with the most prose.
        let gap = |&(start, body, _): &(usize, usize, &str)| {
            text[body.min(text.len())..next_boundary(start)].trim().len()
        };
        let chosen = if candidates.len() == 1 {
            &candidates[0]
        } else {
            candidates
                .iter()
                .find(|c| gap(c) >= TOC_PROSE_GAP)
                .unwrap_or_else(|| candidates.iter().max_by_key(|c| gap(c)).unwrap())
        };

        let (start, body_start, heading_text) = *chosen;
        let end = next_boundary(start);
        if body_start < end {
            spans.push(ItemSpan {
                item_label: *label,
                start: body_start,
                end,
                heading_text: heading_text.trim().to_string(),
            });
        }
    }

    spans.sort_by_key(|s| s.start);
    debug_assert!(spans.windows(2).all(|w| w[0].end <= w[1].start));
    spans
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_10k_sections_at_hand_marked_offsets() {
        let text = "Annual Report\n\nItem 1A. Risk Factors\nMarket conditions may vary widely.\n\nItem 7. Management's Discussion and Analysis\nRevenue grew in the period.\n";
        let spans = detect_items(text, FormType::Form10K);
        assert_eq!(spans.len(), 2);

        assert_eq!(spans[0].item_label, ItemLabel::RiskFactors);
        assert_eq!(spans[0].heading_text, "Item 1A. Risk Factors");
        assert_eq!((spans[0].start, spans[0].end), (37, 73));

        assert_eq!(spans[1].item_label, ItemLabel::Mda);
        assert_eq!((spans[1].start, spans[1].end), (118, 146));
        assert_eq!(
            &text[spans[1].start..spans[1].end],
            "Revenue grew in the period.\n"
        );
    }

    #[test]
    fn boilerplate_only_document_yields_nothing() {
        let text = "Forward-looking statements disclaimer.\n\nExhibit index follows.\n";
        assert!(detect_items(text, FormType::Form10K).is_empty());
        assert!(detect_items(text, FormType::Def14A).is_empty());
    }

    #[test]
    fn toc_duplicate_heading_resolves_to_body_occurrence() {
        let prose = "Demand for our products depends on economic conditions. ".repeat(12);
        assert!(prose.len() >= 500);
        let text = format!(
            "Table of Contents\nItem 1A. Risk Factors\nItem 7. Management's Discussion and Analysis\n\nItem 1A. Risk Factors\n{prose}\n\nItem 7. Management's Discussion and Analysis\n{prose}\n"
        );
        let spans = detect_items(&text, FormType::Form10K);
        let rf: Vec<_> = spans
            .iter()
            .filter(|s| s.item_label == ItemLabel::RiskFactors)
            .collect();
        assert_eq!(rf.len(), 1, "one span per label");
        let second_occurrence = text.rfind("Item 1A. Risk Factors").unwrap();
        assert!(
            rf[0].start > second_occurrence,
            "TOC suppression must pick the body heading"
        );
        assert!(text[rf[0].start..rf[0].end].contains("Demand for our products"));
    }

    #[test]
    fn form_awareness_routes_item_numbers() {
        let prose = "Liquidity remained strong across segments during the quarter.";
        let q = format!("Item 2. Management's Discussion and Analysis\n{prose}\n");
        let spans = detect_items(&q, FormType::Form10Q);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].item_label, ItemLabel::Mda);

        // The same Item 2 heading means "Properties" in a 10-K: not whitelisted.
        assert!(detect_items(&q, FormType::Form10K).is_empty());

        let proxy = format!("Compensation Discussion and Analysis\n{prose}\n");
        let spans = detect_items(&proxy, FormType::Def14A);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].item_label, ItemLabel::Cda);
    }

    #[test]
    fn item_one_does_not_swallow_item_ten_or_one_a() {
        let text = "Item 1. Business\nWe make widgets for industrial customers.\nItem 1A. Risk Factors\nCompetition is intense in all markets.\nItem 10. Directors\nNames omitted here.\n";
        let spans = detect_items(text, FormType::Form10K);
        let labels: Vec<_> = spans.iter().map(|s| s.item_label).collect();
        assert_eq!(labels, vec![ItemLabel::Business, ItemLabel::RiskFactors]);
        assert!(text[spans[0].start..spans[0].end].starts_with("We make widgets"));
        assert!(text[spans[0].end..].starts_with("Item 1A."));
    }

    #[test]
    fn notes_heading_variants_are_found() {
        for variant in [
            "Notes to Financial Statements",
            "Notes to the Consolidated Financial Statements",
            "NOTES TO CONDENSED CONSOLIDATED FINANCIAL STATEMENTS",
        ] {
            let text = format!("{variant}\nNote 1. Basis of presentation text.\n");
            let spans = detect_items(&text, FormType::Form10Q);
            assert_eq!(spans.len(), 1, "{variant}");
            assert_eq!(spans[0].item_label, ItemLabel::NotesFs);
        }
    }
}
