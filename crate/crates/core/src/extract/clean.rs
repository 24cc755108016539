//! Markup removal and whitespace normalization.
//!
//! Cleaning runs in two phases. `clean_lines` strips tags, decodes entities,
//! drops numeric table blocks and normalizes spaces while preserving the line
//! structure, which heading detection needs. `collapse_paragraphs` then folds
//! each paragraph onto one line with blank lines between paragraphs, the form
//! section text is stored in.

use std::sync::OnceLock;

use regex::Regex;

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("static regex"))
}

static DROP_BLOCKS: OnceLock<Regex> = OnceLock::new();
static LINE_BREAK_TAGS: OnceLock<Regex> = OnceLock::new();
static INLINE_TAGS: OnceLock<Regex> = OnceLock::new();
static ANY_TAG: OnceLock<Regex> = OnceLock::new();
static TAG_REMNANT: OnceLock<Regex> = OnceLock::new();
static NUMERIC_ENTITY: OnceLock<Regex> = OnceLock::new();
static SPACE_RUN: OnceLock<Regex> = OnceLock::new();
static SPACE_BEFORE_PUNCT: OnceLock<Regex> = OnceLock::new();

/// Phase 1: markup-free text with source line structure intact.
pub fn clean_lines(raw: &str) -> String {
    let mut text = raw.replace('\r', "");

    if text.contains('<') {
        // Non-content containers go away wholesale.
        text = re(
            &DROP_BLOCKS,
            r"(?is)<script\b[^>]*>.*?</script\s*>|<style\b[^>]*>.*?</style\s*>|<head\b[^>]*>.*?</head\s*>|<!--.*?-->",
        )
        .replace_all(&text, " ")
        .into_owned();

        // Block-level boundaries become line breaks so headings keep their own
        // lines and table rows stay separable.
        text = re(
            &LINE_BREAK_TAGS,
            r"(?i)</?(p|div|tr|table|li|ul|ol|h[1-6]|title|hr|center|blockquote)\b[^>]*>|<br\s*/?>",
        )
        .replace_all(&text, "\n")
        .into_owned();

        // Inline formatting disappears without inserting a space: `gr<b>ew</b>`
        // stays one word.
        text = re(
            &INLINE_TAGS,
            r"(?i)</?(b|i|u|em|strong|span|a|font|sup|sub|small|nobr|ix:[a-z]+)\b[^>]*>",
        )
        .replace_all(&text, "")
        .into_owned();

        // Everything else (td/th and unknown tags) separates its neighbors.
        text = re(&ANY_TAG, r"<[^>]*>")
            .replace_all(&text, " ")
            .into_owned();
    }

    text = decode_entities(&text);

    // Unterminated tag debris, including any `<x` the entity decode produced.
    text = re(&TAG_REMNANT, r"</?[A-Za-z][^>\n]*")
        .replace_all(&text, " ")
        .into_owned();

    let lines: Vec<String> = text
        .lines()
        .map(|line| {
            let collapsed = re(&SPACE_RUN, r"[ \t\u{a0}\u{200b}]+").replace_all(line, " ");
            re(&SPACE_BEFORE_PUNCT, r" ([.,;:!?])")
                .replace_all(collapsed.trim(), "$1")
                .into_owned()
        })
        .collect();

    let mut out = String::new();
    for block in blocks(&lines) {
        if is_table_block(block) {
            continue;
        }
        if !out.is_empty() {
            out.push('\n');
        }
        for line in block {
            out.push_str(line);
            out.push('\n');
        }
    }
    out.trim_end().to_string()
}

/// Phase 2: each paragraph on one line, paragraphs separated by blank lines.
pub fn collapse_paragraphs(text: &str) -> String {
    let lines: Vec<String> = text.lines().map(|l| l.trim().to_string()).collect();
    let mut paragraphs = Vec::new();
    for block in blocks(&lines) {
        let joined = block.join(" ");
        if !joined.is_empty() {
            paragraphs.push(joined);
        }
    }
    paragraphs.join("\n\n")
}

/// Removes markup and normalizes whitespace in one step.
pub fn strip_markup(raw_fragment: &str) -> String {
    collapse_paragraphs(&clean_lines(raw_fragment))
}

/// Groups consecutive non-empty lines.
fn blocks(lines: &[String]) -> impl Iterator<Item = &[String]> {
    lines
        .split(|l| l.is_empty())
        .filter(|block| !block.is_empty())
}

/// A block is table debris when numeric or currency cells dominate it.
fn is_table_block(block: &[String]) -> bool {
    let mut cells = 0usize;
    let mut numeric = 0usize;
    for line in block {
        for cell in line.split_whitespace() {
            cells += 1;
            if is_numeric_cell(cell) {
                numeric += 1;
            }
        }
    }
    cells > 0 && numeric * 2 > cells
}

fn is_numeric_cell(cell: &str) -> bool {
    let mut digits = 0usize;
    for c in cell.chars() {
        if c.is_ascii_digit() {
            digits += 1;
        } else if !matches!(c, '$' | '(' | ')' | '%' | ',' | '.' | '-' | '—' | '–' | '+' | '*') {
            return false;
        }
    }
    // Pure punctuation cells ($, —, empty table fillers) count as numeric;
    // they only ever appear inside tables.
    digits > 0 || !cell.is_empty()
}

fn decode_entities(text: &str) -> String {
    if !text.contains('&') {
        return text.to_string();
    }
    let mut out = text.to_string();
    for (entity, plain) in [
        ("&nbsp;", " "),
        ("&amp;", "&"),
        ("&lt;", "<"),
        ("&gt;", ">"),
        ("&quot;", "\""),
        ("&apos;", "'"),
        ("&rsquo;", "'"),
        ("&lsquo;", "'"),
        ("&rdquo;", "\""),
        ("&ldquo;", "\""),
        ("&mdash;", "—"),
        ("&ndash;", "–"),
        ("&bull;", "•"),
        ("&middot;", "·"),
        ("&sect;", "§"),
        ("&copy;", "©"),
        ("&reg;", "®"),
        ("&trade;", "™"),
    ] {
        if out.contains(entity) {
            out = out.replace(entity, plain);
        }
    }
    re(&NUMERIC_ENTITY, r"&#x?[0-9a-fA-F]{1,6};")
        .replace_all(&out, |caps: &regex::Captures| {
            let body = &caps[0][2..caps[0].len() - 1];
            let code = if let Some(hex) = body.strip_prefix('x').or(body.strip_prefix('X')) {
                u32::from_str_radix(hex, 16).ok()
            } else {
                body.parse::<u32>().ok()
            };
            code.and_then(char::from_u32)
                .map(String::from)
                .unwrap_or_else(|| " ".to_string())
        })
        .into_owned()
}
