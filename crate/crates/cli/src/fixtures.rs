//! Synthetic filing corpus for offline runs: an EDGAR-shaped directory tree
//! of template-grammar filings, an out-of-domain text file, and a ready run
//! config pointing at both.
//!
//! The grammar draws every word from fixed pools so the whitespace
//! vocabulary stays well under the default vocab size, and the general text
//! pools share no surface token with the filing pools, which keeps the
//! general validation signal flat by construction. Near-duplicate amendment
//! filings are planted for the dedup stage to remove.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use finscale_core::hashing::derive_seed;
use finscale_core::Result;

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub companies: usize,
    pub start_year: i32,
    pub end_year: i32,
    /// Paragraphs per 10-K section.
    pub tenk_paragraphs: usize,
    /// Paragraphs per 10-Q section.
    pub tenq_paragraphs: usize,
    /// Paragraphs in the proxy compensation discussion.
    pub cda_paragraphs: usize,
    /// Amended 10-K refilings per company, near-duplicates for dedup.
    pub amendments_per_company: usize,
    pub general_words: usize,
    pub seq_len: u32,
    pub token_budget: u64,
    pub domain_val_tokens: u64,
    pub general_val_tokens: u64,
    pub vocab_size: u32,
    pub seed: u64,
}

impl FixtureSpec {
    /// Full desk-run scale: a corpus comfortably above the four-mebitoken
    /// training budget after dedup and validation splits.
    pub fn desk(seed: u64) -> FixtureSpec {
        FixtureSpec {
            companies: 20,
            start_year: 2015,
            end_year: 2025,
            tenk_paragraphs: 40,
            tenq_paragraphs: 16,
            cda_paragraphs: 20,
            amendments_per_company: 2,
            general_words: 90_000,
            seq_len: 1024,
            token_budget: 4 << 20,
            domain_val_tokens: 64 << 10,
            general_val_tokens: 64 << 10,
            vocab_size: 4096,
            seed,
        }
    }

    /// Seconds-scale corpus for pipeline smoke tests.
    pub fn smoke(seed: u64) -> FixtureSpec {
        FixtureSpec {
            companies: 3,
            start_year: 2023,
            end_year: 2025,
            tenk_paragraphs: 6,
            tenq_paragraphs: 4,
            cda_paragraphs: 6,
            amendments_per_company: 1,
            general_words: 5_000,
            seq_len: 256,
            token_budget: 16 << 10,
            domain_val_tokens: 2 << 10,
            general_val_tokens: 2 << 10,
            vocab_size: 4096,
            seed,
        }
    }
}

const COMPANY_FIRST: &[&str] = &[
    "Meridian", "Summit", "Pinnacle", "Cascade", "Sterling", "Beacon", "Crescent", "Atlas",
    "Keystone", "Vantage", "Northfield", "Bluepeak", "Ironline", "Clearwater", "Redstone",
    "Fairmont", "Silvergate", "Oakbridge", "Stonehaven", "Brightline", "Hale", "Porter",
];
const COMPANY_SECOND: &[&str] = &[
    "Industries", "Holdings", "Systems", "Partners", "Technologies", "Logistics", "Materials",
    "Brands", "Networks", "Foods", "Laboratories", "Dynamics",
];
const SUBJECTS: &[&str] = &[
    "Net revenue", "Operating income", "Gross profit", "Cost of sales", "Selling expense",
    "Administrative expense", "Research spending", "Segment revenue", "Service revenue",
    "Product revenue", "Net income", "Operating cash flow", "Backlog", "Order intake",
    "Working capital", "Inventory turnover",
];
const VERBS_UP: &[&str] = &["increased", "rose", "grew", "improved", "expanded", "strengthened"];
const VERBS_DOWN: &[&str] = &["decreased", "declined", "fell", "contracted", "softened"];
const VERBS_FLAT: &[&str] = &["remained broadly stable", "held steady", "was unchanged"];
const PCTS: &[&str] = &[
    "0.4%", "0.8%", "1.3%", "2.1%", "2.7%", "3.3%", "4.6%", "5.2%", "6.8%", "7.4%", "8.1%",
    "9.7%", "10.3%", "11.6%", "12.4%", "13.9%", "15.2%", "16.8%", "18.5%", "21.4%", "24.9%",
    "28.6%", "31.2%", "34.7%",
];
const AMOUNTS: &[&str] = &[
    "$12.4", "$18.9", "$23.1", "$27.6", "$34.2", "$41.8", "$48.3", "$56.9", "$62.5", "$71.4",
    "$83.7", "$96.2", "$104.8", "$118.3", "$127.9", "$142.6", "$158.1", "$173.4", "$189.7",
    "$204.5", "$226.8", "$245.3", "$268.9", "$291.2",
];
const SEGMENTS: &[&str] = &[
    "consumer segment", "industrial segment", "services segment", "international segment",
    "wholesale channel", "retail channel", "subscription business", "licensing business",
    "aftermarket segment", "government segment",
];
const PRODUCTS: &[&str] = &[
    "precision sensors", "protective coatings", "hydraulic actuators", "filtration modules",
    "diagnostic reagents", "packaging films", "thermal controllers", "fiber assemblies",
    "industrial adhesives", "power converters", "safety valves", "optical inspection tools",
    "specialty resins", "embedded controllers", "calibration instruments", "sterile containers",
    "conveyor drives", "pressure transducers", "analytics software", "workflow software",
];
const DRIVERS: &[&str] = &[
    "higher volumes", "favorable pricing", "new customer wins", "cost discipline",
    "currency effects", "lower input costs", "productivity gains", "mix improvements",
    "restructuring savings", "capacity additions", "freight inflation", "tariff headwinds",
];
const RISKS: &[&str] = &[
    "supply disruptions", "regulatory changes", "cyber incidents", "labor shortages",
    "interest rate volatility", "customer concentration", "raw material inflation",
    "foreign exchange swings", "product recalls", "credit deterioration",
    "extended pandemics", "severe weather events",
];
const COUNT_WORDS: &[&str] = &[
    "seven", "eleven", "fourteen", "nineteen", "twenty", "thirty", "forty", "sixty",
];

/// One issuer with a stable product and segment flavor.
struct Company {
    cik: u64,
    ticker: String,
    name: String,
    html_name: String,
    products: Vec<&'static str>,
    segments: Vec<&'static str>,
}

fn make_companies(n: usize, rng: &mut ChaCha8Rng) -> Vec<Company> {
    (0..n)
        .map(|i| {
            let first = COMPANY_FIRST[i % COMPANY_FIRST.len()];
            let second = COMPANY_SECOND[(i * 5 + i / COMPANY_FIRST.len()) % COMPANY_SECOND.len()];
            // A couple of ampersand names exercise entity decoding.
            let (name, html_name) = if i % 9 == 4 {
                let other = COMPANY_FIRST[(i + 3) % COMPANY_FIRST.len()];
                (
                    format!("{first} & {other} {second}"),
                    format!("{first} &amp; {other} {second}"),
                )
            } else {
                (format!("{first} {second}"), format!("{first} {second}"))
            };
            let mut products: Vec<&str> = PRODUCTS.to_vec();
            products.shuffle(rng);
            products.truncate(4);
            let mut segments: Vec<&str> = SEGMENTS.to_vec();
            segments.shuffle(rng);
            segments.truncate(3);
            Company {
                cik: 1_200_000 + i as u64 * 17,
                ticker: format!(
                    "{}{}",
                    &first[..3].to_uppercase(),
                    (b'A' + (i % 26) as u8) as char
                ),
                name,
                html_name,
                products,
                segments,
            }
        })
        .collect()
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

fn business_sentence(rng: &mut ChaCha8Rng, c: &Company, year: i32) -> String {
    match rng.gen_range(0..8) {
        0 => format!(
            "{} designs and manufactures {} and {} for customers in the {} and the {}.",
            c.name, c.products[0], pick(rng, &c.products), c.segments[0], pick(rng, &c.segments)
        ),
        1 => format!(
            "The {} accounted for {} of consolidated revenue in fiscal {year}.",
            pick(rng, &c.segments),
            pick(rng, PCTS)
        ),
        2 => format!(
            "We distribute {} through distributor relationships covering more than {} countries.",
            pick(rng, &c.products),
            pick(rng, COUNT_WORDS)
        ),
        3 => format!(
            "Our {} compete primarily on reliability, service quality, and total cost.",
            pick(rng, &c.products)
        ),
        4 => format!(
            "{} operates {} production facilities supporting the {}.",
            c.name,
            pick(rng, COUNT_WORDS),
            pick(rng, &c.segments)
        ),
        5 => format!(
            "Demand for {} generally follows capital spending cycles in the {}.",
            pick(rng, &c.products),
            pick(rng, &c.segments)
        ),
        6 => format!(
            "We hold {} patents covering {} and related manufacturing processes.",
            pick(rng, COUNT_WORDS),
            pick(rng, &c.products)
        ),
        _ => format!(
            "No single customer represented more than {} of revenue in fiscal {year}.",
            pick(rng, PCTS)
        ),
    }
}

fn risk_sentence(rng: &mut ChaCha8Rng, c: &Company) -> String {
    match rng.gen_range(0..8) {
        0 => format!(
            "Our results could be harmed by {} or {}.",
            pick(rng, RISKS),
            pick(rng, RISKS)
        ),
        1 => format!(
            "If {} persist, demand for {} may decline and margins may compress.",
            pick(rng, RISKS),
            pick(rng, &c.products)
        ),
        2 => format!(
            "We face intense competition in the {}, which could reduce selling prices.",
            pick(rng, &c.segments)
        ),
        3 => "A failure to attract and retain skilled employees could disrupt operations."
            .to_string(),
        4 => format!(
            "Changes in trade policy may increase the cost of imported {}.",
            pick(rng, &c.products)
        ),
        5 => format!(
            "{} could require significant unplanned capital expenditures.",
            capitalize(pick(rng, RISKS))
        ),
        6 => format!(
            "Our indebtedness could limit flexibility in responding to {}.",
            pick(rng, RISKS)
        ),
        _ => format!(
            "Litigation relating to {} could result in substantial costs.",
            pick(rng, &c.products)
        ),
    }
}

fn mda_sentence(rng: &mut ChaCha8Rng, c: &Company, year: i32) -> String {
    let dir_verb = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.65) {
            pick(rng, VERBS_UP)
        } else {
            pick(rng, VERBS_DOWN)
        }
    };
    match rng.gen_range(0..8) {
        0 => format!(
            "{} {} {} to {} million in fiscal {year}, driven primarily by {}.",
            pick(rng, SUBJECTS),
            dir_verb(rng),
            pick(rng, PCTS),
            pick(rng, AMOUNTS),
            pick(rng, DRIVERS)
        ),
        1 => format!(
            "{} {} {} compared with the prior year, reflecting {} partially offset by {}.",
            pick(rng, SUBJECTS),
            dir_verb(rng),
            pick(rng, PCTS),
            pick(rng, DRIVERS),
            pick(rng, DRIVERS)
        ),
        2 => format!(
            "Cash provided by operating activities was {} million, compared with {} million a year earlier.",
            pick(rng, AMOUNTS),
            pick(rng, AMOUNTS)
        ),
        3 => format!(
            "We returned {} million to shareholders through dividends and repurchases during fiscal {year}.",
            pick(rng, AMOUNTS)
        ),
        4 => format!(
            "Gross margin {} at {} of revenue as {} offset {}.",
            pick(rng, VERBS_FLAT),
            pick(rng, PCTS),
            pick(rng, DRIVERS),
            pick(rng, DRIVERS)
        ),
        5 => format!(
            "Capital expenditures totaled {} million, principally for {} capacity.",
            pick(rng, AMOUNTS),
            pick(rng, &c.segments)
        ),
        6 => format!(
            "Management expects {} to continue into fiscal {}.",
            pick(rng, DRIVERS),
            year + 1
        ),
        _ => format!(
            "Interest expense {} {} as a result of {}.",
            dir_verb(rng),
            pick(rng, PCTS),
            pick(rng, DRIVERS)
        ),
    }
}

fn notes_sentence(rng: &mut ChaCha8Rng, c: &Company, year: i32) -> String {
    match rng.gen_range(0..8) {
        0 => format!(
            "The Company recognizes revenue when control of {} transfers to the customer.",
            pick(rng, &c.products)
        ),
        1 => "Inventories are stated at the lower of cost or net realizable value.".to_string(),
        2 => "Goodwill is tested for impairment annually at the reporting unit level.".to_string(),
        3 => format!(
            "The effective tax rate was {} for fiscal {year}, compared with {} in the prior year.",
            pick(rng, PCTS),
            pick(rng, PCTS)
        ),
        4 => "Depreciation is computed using the straight-line method over estimated useful lives."
            .to_string(),
        5 => format!(
            "The Company leases certain facilities under operating leases expiring through fiscal {}.",
            year + rng.gen_range(3..9)
        ),
        6 => "Accounts receivable are recorded net of allowances for expected credit losses."
            .to_string(),
        _ => "The fair value of long-term debt is estimated using quoted market prices."
            .to_string(),
    }
}

fn cda_sentence(rng: &mut ChaCha8Rng, year: i32) -> String {
    match rng.gen_range(0..6) {
        0 => format!(
            "The committee links executive pay to {} growth and relative shareholder return.",
            pick(rng, SUBJECTS).to_lowercase()
        ),
        1 => format!(
            "Annual incentives paid out at {} of target for fiscal {year}.",
            pick(rng, PCTS)
        ),
        2 => format!(
            "Long-term awards vest over three years based on {} performance.",
            pick(rng, SUBJECTS).to_lowercase()
        ),
        3 => format!(
            "Base salaries were adjusted by {} following a review of peer market data.",
            pick(rng, PCTS)
        ),
        4 => "The committee retained an independent consultant to evaluate program design."
            .to_string(),
        _ => "Executives must hold shares equal to a multiple of base salary.".to_string(),
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn paragraph(
    rng: &mut ChaCha8Rng,
    count: usize,
    mut sentence: impl FnMut(&mut ChaCha8Rng) -> String,
) -> String {
    (0..count).map(|_| sentence(rng)).collect::<Vec<_>>().join(" ")
}

fn section_paragraphs(
    rng: &mut ChaCha8Rng,
    paragraphs: usize,
    mut sentence: impl FnMut(&mut ChaCha8Rng) -> String,
) -> Vec<String> {
    (0..paragraphs)
        .map(|_| {
            let n = rng.gen_range(4..8);
            paragraph(rng, n, &mut sentence)
        })
        .collect()
}

fn numeric_table(rng: &mut ChaCha8Rng, year: i32) -> String {
    let mut t = format!(
        "<table>\n<tr><td>Fiscal</td><td>{}</td><td>{}</td><td>{}</td></tr>\n",
        year,
        year - 1,
        year - 2
    );
    for label in ["Revenue", "Earnings", "Backlog"] {
        let _ = writeln!(
            t,
            "<tr><td>{label}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
            pick(rng, AMOUNTS),
            pick(rng, AMOUNTS),
            pick(rng, AMOUNTS)
        );
    }
    t.push_str("</table>");
    t
}

fn html_paragraphs(out: &mut String, paragraphs: &[String]) {
    for p in paragraphs {
        let _ = writeln!(out, "<p>{p}</p>");
    }
}

/// Section bodies of one 10-K, kept so amendments can reuse them.
struct TenKBody {
    business: Vec<String>,
    risk: Vec<String>,
    mda: Vec<String>,
    notes: Vec<String>,
}

fn tenk_body(rng: &mut ChaCha8Rng, c: &Company, year: i32, paragraphs: usize) -> TenKBody {
    TenKBody {
        business: section_paragraphs(rng, paragraphs, |r| business_sentence(r, c, year)),
        risk: section_paragraphs(rng, paragraphs, |r| risk_sentence(r, c)),
        mda: section_paragraphs(rng, paragraphs, |r| mda_sentence(r, c, year)),
        notes: section_paragraphs(rng, paragraphs, |r| notes_sentence(r, c, year)),
    }
}

fn render_tenk(rng: &mut ChaCha8Rng, c: &Company, year: i32, body: &TenKBody) -> String {
    let mut h = String::new();
    let _ = writeln!(
        h,
        "<html><head><title>{} Form 10-K {year}</title></head>\n<body>\n<h1>{} FORM 10-K</h1>\n<p>Annual report for the fiscal year {year}.</p>\n<p>PART I</p>\n<p>ITEM 1. BUSINESS</p>",
        c.html_name,
        c.html_name.to_uppercase()
    );
    html_paragraphs(&mut h, &body.business);
    h.push_str("<p>ITEM 1A. RISK FACTORS</p>\n");
    html_paragraphs(&mut h, &body.risk);
    h.push_str("<p>PART II</p>\n<p>ITEM 7. MANAGEMENT&#8217;S DISCUSSION AND ANALYSIS OF FINANCIAL CONDITION AND RESULTS OF OPERATIONS</p>\n");
    let split = body.mda.len() / 2;
    html_paragraphs(&mut h, &body.mda[..split]);
    let _ = writeln!(h, "{}", numeric_table(rng, year));
    html_paragraphs(&mut h, &body.mda[split..]);
    h.push_str("<p>ITEM 8. FINANCIAL STATEMENTS AND SUPPLEMENTARY DATA</p>\n<p>NOTES TO CONSOLIDATED FINANCIAL STATEMENTS</p>\n");
    html_paragraphs(&mut h, &body.notes);
    h.push_str("<p>SIGNATURES</p>\n<p>Signed on behalf of the registrant by its duly authorized officers.</p>\n</body></html>");
    h
}

fn render_tenq(rng: &mut ChaCha8Rng, c: &Company, year: i32, quarter: u32, paragraphs: usize) -> String {
    let notes = section_paragraphs(rng, paragraphs, |r| notes_sentence(r, c, year));
    let mda = section_paragraphs(rng, paragraphs, |r| mda_sentence(r, c, year));
    let risk = section_paragraphs(rng, paragraphs, |r| risk_sentence(r, c));
    let mut h = String::new();
    let _ = writeln!(
        h,
        "<html><head><title>{} Form 10-Q Q{quarter} {year}</title></head>\n<body>\n<h1>{} FORM 10-Q</h1>\n<p>PART I</p>\n<p>ITEM 1. FINANCIAL STATEMENTS</p>\n<p>NOTES TO CONDENSED CONSOLIDATED FINANCIAL STATEMENTS</p>",
        c.html_name,
        c.html_name.to_uppercase()
    );
    html_paragraphs(&mut h, &notes);
    h.push_str("<p>ITEM 2. MANAGEMENT&#8217;S DISCUSSION AND ANALYSIS</p>\n");
    html_paragraphs(&mut h, &mda);
    h.push_str("<p>PART II</p>\n<p>ITEM 1A. RISK FACTORS</p>\n");
    html_paragraphs(&mut h, &risk);
    h.push_str("<p>SIGNATURES</p>\n<p>Signed on behalf of the registrant by its duly authorized officers.</p>\n</body></html>");
    h
}

fn render_proxy(rng: &mut ChaCha8Rng, c: &Company, year: i32, paragraphs: usize) -> String {
    let cda = section_paragraphs(rng, paragraphs, |r| cda_sentence(r, year));
    let mut h = String::new();
    let _ = writeln!(
        h,
        "<html><head><title>{} Proxy Statement {year}</title></head>\n<body>\n<h1>{} NOTICE AND PROXY STATEMENT</h1>\n<p>COMPENSATION DISCUSSION AND ANALYSIS</p>",
        c.html_name,
        c.html_name.to_uppercase()
    );
    html_paragraphs(&mut h, &cda);
    h.push_str("</body></html>");
    h
}

const GENERAL_PLACES: &[&str] = &[
    "Kavria", "Morneth", "Tessel", "Ardun", "Volia", "Brenholt", "Sarnive", "Quellan", "Ostrev",
    "Lumara", "Tirnan", "Elvask", "Dornach", "Yssel", "Pellamor", "Crathie", "Nimbra", "Skalden",
    "Veyra", "Oldenmere",
];
const GENERAL_FEATURES: &[&str] = &[
    "lake", "ridge", "valley", "plateau", "glacier", "steppe", "headland", "moraine", "fjord",
    "escarpment", "lagoon", "caldera",
];
const GENERAL_FLORA: &[&str] = &["juniper", "larch", "bramble", "alder", "birch", "sedge"];
const GENERAL_FAUNA: &[&str] = &["heron", "ibex", "marmot", "lynx", "crane", "otter"];
const GENERAL_DISTANCES: &[&str] = &["112", "184", "248", "312", "407", "526", "698"];
const GENERAL_ELEVATIONS: &[&str] = &["1,240", "1,870", "2,480", "3,150", "3,920"];
const GENERAL_DIRECTIONS: &[&str] = &["northeast", "southwest", "northward", "eastward", "upstream"];

fn general_sentence(rng: &mut ChaCha8Rng) -> String {
    let place = |r: &mut ChaCha8Rng| pick(r, GENERAL_PLACES);
    match rng.gen_range(0..6) {
        0 => format!(
            "{} lies beside {} {}, roughly {} kilometres {}.",
            place(rng),
            pick(rng, GENERAL_FEATURES),
            place(rng),
            pick(rng, GENERAL_DISTANCES),
            pick(rng, GENERAL_DIRECTIONS)
        ),
        1 => format!(
            "{} borders {} along {} crests rising {} metres.",
            place(rng),
            place(rng),
            pick(rng, GENERAL_FEATURES),
            pick(rng, GENERAL_ELEVATIONS)
        ),
        2 => format!(
            "Snowmelt feeds {} marshes every thaw, sustaining {} colonies.",
            place(rng),
            pick(rng, GENERAL_FAUNA)
        ),
        3 => format!(
            "Basalt cliffs overlook {} harbour beneath {} headlands.",
            place(rng),
            place(rng)
        ),
        4 => format!(
            "Dense {} groves blanket {} foothills beneath {} icefields.",
            pick(rng, GENERAL_FLORA),
            place(rng),
            place(rng)
        ),
        _ => format!(
            "Rail lines cross {} kilometres linking {} quarries {}.",
            pick(rng, GENERAL_DISTANCES),
            place(rng),
            pick(rng, GENERAL_DIRECTIONS)
        ),
    }
}

fn general_text(rng: &mut ChaCha8Rng, words: usize) -> String {
    let mut out = String::new();
    let mut count = 0usize;
    while count < words {
        let n = rng.gen_range(3..7);
        let para = paragraph(rng, n, general_sentence);
        count += para.split_whitespace().count();
        out.push_str(&para);
        out.push_str("\n\n");
    }
    out
}

fn accession(cik: u64, year: i32, seq: u32) -> String {
    format!("{cik:010}-{:02}-{seq:06}", year % 100)
}

fn wrap_submission(accession_id: &str, form: &str, date: &str, html: &str) -> String {
    format!(
        "<SEC-DOCUMENT>{accession_id}.txt : {date}\n<SEC-HEADER>\nACCESSION NUMBER: {accession_id}\nCONFORMED SUBMISSION TYPE: {form}\nFILED AS OF DATE: {compact}\n</SEC-HEADER>\n<DOCUMENT>\n<TYPE>{form}\n<SEQUENCE>1\n<FILENAME>primary.htm\n<TEXT>\n{html}\n</TEXT>\n</DOCUMENT>\n</SEC-DOCUMENT>\n",
        compact = date.replace('-', "")
    )
}

struct Filing {
    accession_id: String,
    form: &'static str,
    date: String,
    body: String,
}

fn write_filing(root: &Path, cik: u64, filing: &Filing) -> Result<()> {
    let nodash: String = filing.accession_id.chars().filter(|c| *c != '-').collect();
    let dir = root.join(format!("Archives/edgar/data/{cik}/{nodash}"));
    std::fs::create_dir_all(&dir)?;
    std::fs::write(
        dir.join(format!("{}.txt", filing.accession_id)),
        wrap_submission(&filing.accession_id, filing.form, &filing.date, &filing.body),
    )?;
    Ok(())
}

/// Generates the fixture tree under `dir` and returns the path of the run
/// config written alongside it.
pub fn generate(dir: &Path, spec: &FixtureSpec) -> Result<PathBuf> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "fixtures"));
    let edgar = dir.join("edgar");
    std::fs::create_dir_all(edgar.join("files"))?;
    std::fs::create_dir_all(edgar.join("submissions"))?;

    let companies = make_companies(spec.companies, &mut rng);

    let mut ticker_map = String::from("{");
    for (i, c) in companies.iter().enumerate() {
        if i > 0 {
            ticker_map.push(',');
        }
        let _ = write!(
            ticker_map,
            "\"{i}\":{{\"cik_str\":{},\"ticker\":\"{}\",\"title\":\"{}\"}}",
            c.cik,
            c.ticker,
            c.name.replace('&', "and")
        );
    }
    ticker_map.push('}');
    std::fs::write(edgar.join("files/company_tickers.json"), ticker_map)?;

    for c in &companies {
        let mut filings: Vec<Filing> = Vec::new();
        // Amended refilings append a short update to every section and land
        // a few weeks later: near-duplicates, not byte copies.
        let amend_years: Vec<i32> = (0..spec.amendments_per_company)
            .map(|a| spec.start_year + ((c.cik as usize + a * 5) % years(spec)) as i32)
            .collect();
        for year in spec.start_year..=spec.end_year {
            let mut seq = 0u32;

            let body = tenk_body(&mut rng, c, year, spec.tenk_paragraphs);
            let day_offset = (c.cik % 9) as u32;
            seq += 1;
            filings.push(Filing {
                accession_id: accession(c.cik, year, seq),
                form: "10-K",
                date: format!("{year}-02-{:02}", 16 + day_offset),
                body: render_tenk(&mut rng, c, year, &body),
            });

            if amend_years.contains(&year) {
                let tack = "This amendment updates certain previously reported disclosures."
                    .to_string();
                let amended = TenKBody {
                    business: with_extra(&body.business, &tack),
                    risk: with_extra(&body.risk, &tack),
                    mda: with_extra(&body.mda, &tack),
                    notes: with_extra(&body.notes, &tack),
                };
                filings.push(Filing {
                    accession_id: accession(c.cik, year, 900_000 + seq),
                    form: "10-K",
                    date: format!("{year}-03-{:02}", 10 + day_offset),
                    body: render_tenk(&mut rng, c, year, &amended),
                });
            }

            for (quarter, month) in [(1u32, 5u32), (2, 8), (3, 11)] {
                seq += 1;
                filings.push(Filing {
                    accession_id: accession(c.cik, year, seq),
                    form: "10-Q",
                    date: format!("{year}-{month:02}-{:02}", 8 + day_offset),
                    body: render_tenq(&mut rng, c, year, quarter, spec.tenq_paragraphs),
                });
            }

            seq += 1;
            filings.push(Filing {
                accession_id: accession(c.cik, year, seq),
                form: "DEF 14A",
                date: format!("{year}-04-{:02}", 12 + day_offset),
                body: render_proxy(&mut rng, c, year, spec.cda_paragraphs),
            });
        }

        let mut accs = String::new();
        let mut dates = String::new();
        let mut forms = String::new();
        for (i, f) in filings.iter().enumerate() {
            if i > 0 {
                accs.push(',');
                dates.push(',');
                forms.push(',');
            }
            let _ = write!(accs, "\"{}\"", f.accession_id);
            let _ = write!(dates, "\"{}\"", f.date);
            let _ = write!(forms, "\"{}\"", f.form);
        }
        std::fs::write(
            edgar.join(format!("submissions/CIK{:010}.json", c.cik)),
            format!(
                "{{\"cik\":\"{:010}\",\"filings\":{{\"recent\":{{\"accessionNumber\":[{accs}],\"filingDate\":[{dates}],\"form\":[{forms}]}}}}}}",
                c.cik
            ),
        )?;

        for f in &filings {
            write_filing(&edgar, c.cik, f)?;
        }
    }

    let general = general_text(&mut rng, spec.general_words);
    std::fs::write(dir.join("general.txt"), general)?;

    let config_path = dir.join("fixture.conf");
    let window_years = years(spec) as u32;
    std::fs::write(
        &config_path,
        format!(
            "# offline fixture run\n\
             endpoint={}\n\
             out_dir={}\n\
             general_source={}\n\
             user_agent=finscale fixtures research@example.invalid\n\
             run_date={}-12-31\n\
             company_limit={}\n\
             forms=10-K,10-Q,DEF 14A\n\
             years={}\n\
             seq_len={}\n\
             token_budget={}\n\
             domain_val_tokens={}\n\
             general_val_tokens={}\n\
             vocab_size={}\n\
             schedule=geometric\n\
             learner_orders=2,3\n\
             seed={}\n\
             emit_timestamp=false\n",
            edgar.display(),
            dir.join("out").display(),
            dir.join("general.txt").display(),
            spec.end_year,
            spec.companies,
            window_years,
            spec.seq_len,
            spec.token_budget,
            spec.domain_val_tokens,
            spec.general_val_tokens,
            spec.vocab_size,
            spec.seed,
        ),
    )?;
    Ok(config_path)
}

fn years(spec: &FixtureSpec) -> usize {
    (spec.end_year - spec.start_year + 1) as usize
}

fn with_extra(paragraphs: &[String], extra: &str) -> Vec<String> {
    let mut out = paragraphs.to_vec();
    if let Some(last) = out.last_mut() {
        last.push(' ');
        last.push_str(extra);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    use chrono::NaiveDate;
    use finscale_core::edgar::{ClientConfig, EdgarClient, FormType};
    use finscale_core::extract::extract_whitelist;

    fn smoke_corpus(dir: &Path) -> Vec<finscale_core::SectionRecord> {
        let spec = FixtureSpec::smoke(7);
        generate(dir, &spec).unwrap();
        let client = EdgarClient::new(ClientConfig {
            endpoint: dir.join("edgar").display().to_string(),
            user_agent: "fixture tests dev@example.invalid".into(),
            rate_cap: 10,
            cache_dir: dir.join("cache"),
            run_date: NaiveDate::from_ymd_opt(2025, 12, 31).unwrap(),
        })
        .unwrap();
        let mut records = Vec::new();
        for company in client.fetch_ticker_cik_map(spec.companies).unwrap() {
            for fref in client
                .list_filings(
                    &company,
                    &[FormType::Form10K, FormType::Form10Q, FormType::Def14A],
                    3,
                )
                .unwrap()
            {
                let doc = client.fetch_filing(&fref).unwrap();
                records.extend(extract_whitelist(&doc, 2000).into_records());
            }
        }
        records
    }

    #[test]
    fn smoke_tree_extracts_all_sections_with_bounded_vocabulary() {
        let tmp = tempfile::tempdir().unwrap();
        let records = smoke_corpus(tmp.path());

        // 3 companies x 3 years x (4 + 3x3 + 1) sections, plus one amended
        // 10-K per company contributing 4 near-duplicate sections.
        assert_eq!(records.len(), 3 * 3 * 14 + 3 * 4);

        let mut words = BTreeSet::new();
        for r in &records {
            assert!(!r.text.contains('<'), "markup leaked: {}", &r.text[..80]);
            words.extend(r.text.split_whitespace().map(str::to_string));
        }
        assert!(words.len() > 300, "grammar too narrow: {}", words.len());
        assert!(words.len() < 3000, "vocabulary must stay under the default vocab size: {}", words.len());

        let general = std::fs::read_to_string(tmp.path().join("general.txt")).unwrap();
        let general_words: BTreeSet<String> =
            general.split_whitespace().map(str::to_string).collect();
        let shared: Vec<&String> = general_words.intersection(&words).collect();
        assert!(
            shared.is_empty(),
            "general text must share no surface token with filings: {shared:?}"
        );
    }

    #[test]
    fn generation_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate(a.path(), &FixtureSpec::smoke(7)).unwrap();
        generate(b.path(), &FixtureSpec::smoke(7)).unwrap();
        let read = |d: &Path| {
            let mut paths = Vec::new();
            collect_files(d, &mut paths);
            paths.sort();
            paths
                .iter()
                .map(|p| {
                    (
                        p.strip_prefix(d).unwrap().display().to_string(),
                        std::fs::read(p).unwrap(),
                    )
                })
                .collect::<Vec<_>>()
        };
        let (fa, fb) = (read(a.path()), read(b.path()));
        assert_eq!(fa.len(), fb.len());
        for ((pa, ca), (pb, cb)) in fa.iter().zip(&fb) {
            assert_eq!(pa, pb);
            // Config files embed the output path; everything else is
            // byte-identical across directories.
            if pa != "fixture.conf" {
                assert_eq!(ca, cb, "{pa} differs between runs");
            }
        }
    }

    fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                collect_files(&path, out);
            } else {
                out.push(path);
            }
        }
    }

    #[test]
    fn planted_amendments_are_near_but_not_exact_duplicates() {
        let tmp = tempfile::tempdir().unwrap();
        let records = smoke_corpus(tmp.path());
        let amended: Vec<_> = records
            .iter()
            .filter(|r| r.accession.contains("-90"))
            .collect();
        assert!(!amended.is_empty());
        for a in &amended {
            let original = records
                .iter()
                .find(|r| {
                    r.cik == a.cik
                        && r.item_label == a.item_label
                        && r.date < a.date
                        && r.form == a.form
                        && r.accession[..14] == a.accession[..14]
                })
                .expect("amendment must shadow an original");
            assert_ne!(original.text, a.text);
            assert!(a.text.ends_with("disclosures."));
            assert!(a.text.starts_with(&original.text[..original.text.len() / 2]));
        }
    }
}
