//! Power-law fits, diminishing-returns and drift checks, the data-efficiency
//! frontier, and token-requirement extrapolation.
//!
//! All operations are pure functions over [`LossTrace`] values. Fitting works
//! in log-log space where a power law is a straight line; the saturating form
//! adds an irreducible offset found by golden-section search.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::trainer::{LossTrace, Signal};

pub const DEFAULT_TAU: f64 = 0.01;
pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_BAND_FACTOR: f64 = 2.0;
pub const DEFAULT_BASELINE_PARAMS: f64 = 3e9;
pub const DEFAULT_BASELINE_TOKENS: f64 = 4e8;
pub const BOOTSTRAP_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitForm {
    Pure,
    Saturating,
}

impl FitForm {
    pub fn as_str(&self) -> &'static str {
        match self {
            FitForm::Pure => "pure",
            FitForm::Saturating => "saturating",
        }
    }

    pub fn parse(s: &str) -> Result<FitForm> {
        match s {
            "pure" => Ok(FitForm::Pure),
            "saturating" => Ok(FitForm::Saturating),
            other => Err(Error::Format(format!("unknown fit form {other:?}"))),
        }
    }
}

/// L(N) = c + a·N^b, with c absent for the pure form.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    pub c: Option<f64>,
    /// Coefficient of determination in fit (log) space.
    pub r2: f64,
    /// Token range the fit was computed over.
    pub window: (u64, u64),
    pub form: FitForm,
}

impl PowerLawFit {
    pub fn predict(&self, tokens: f64) -> f64 {
        self.c.unwrap_or(0.0) + self.a * tokens.powf(self.b)
    }
}

fn fit_points(trace: &LossTrace) -> Result<Vec<(f64, f64)>> {
    trace.validate()?;
    for p in &trace.points {
        if p.loss <= 0.0 {
            return Err(Error::NonpositiveLoss(format!(
                "loss {} at {} tokens cannot enter a log-space fit",
                p.loss, p.tokens_seen
            )));
        }
    }
    Ok(trace
        .points
        .iter()
        .map(|p| (p.tokens_seen as f64, p.loss))
        .collect())
}

/// Least squares for y = intercept + slope·x, with r² against the mean.
/// A perfectly flat dataset fits exactly, so zero total variance gives r² 1.
fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = y_mean - slope * x_mean;

    let ss_tot: f64 = ys.iter().map(|y| (y - y_mean).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let r2 = if ss_tot <= f64::MIN_POSITIVE {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    (intercept, slope, r2)
}

fn log_ols(points: &[(f64, f64)], offset: f64) -> (f64, f64, f64) {
    let xs: Vec<f64> = points.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, l)| (l - offset).ln()).collect();
    ols(&xs, &ys)
}

/// Fits L = a·N^b by ordinary least squares on (ln N, ln L).
pub fn fit_power_law(trace: &LossTrace) -> Result<PowerLawFit> {
    let points = fit_points(trace)?;
    if points.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "power-law fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    let (intercept, slope, r2) = log_ols(&points, 0.0);
    Ok(PowerLawFit {
        a: intercept.exp(),
        b: slope,
        c: None,
        r2,
        window: (trace.points[0].tokens_seen, trace.points.last().unwrap().tokens_seen),
        form: FitForm::Pure,
    })
}

/// Fits L = c + a·N^b, searching c by golden section over [0, min L) and
/// scoring each candidate with the inner log-space fit's r². When the best
/// offset sits at the zero boundary the pure fit is returned instead.
pub fn fit_saturating_power_law(trace: &LossTrace) -> Result<PowerLawFit> {
    let points = fit_points(trace)?;
    if points.len() < 4 {
        return Err(Error::DegenerateInput(format!(
            "saturating fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    let min_loss = points.iter().map(|(_, l)| *l).fold(f64::INFINITY, f64::min);
    let r2_at = |c: f64| log_ols(&points, c).2;

    let invphi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut lo = 0.0;
    let mut hi = min_loss * (1.0 - 1e-9);
    let mut x1 = hi - invphi * (hi - lo);
    let mut x2 = lo + invphi * (hi - lo);
    let mut f1 = r2_at(x1);
    let mut f2 = r2_at(x2);
    for _ in 0..200 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = r2_at(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = r2_at(x1);
        }
    }
    let c = if f1 > f2 { x1 } else { x2 };

    if c <= 1e-6 * min_loss {
        return fit_power_law(trace);
    }
    let (intercept, slope, r2) = log_ols(&points, c);
    Ok(PowerLawFit {
        a: intercept.exp(),
        b: slope,
        c: Some(c),
        r2,
        window: (trace.points[0].tokens_seen, trace.points.last().unwrap().tokens_seen),
        form: FitForm::Saturating,
    })
}

/// 90% bootstrap interval on the pure-fit exponent: checkpoints resampled
/// with replacement, degenerate draws (fewer than two distinct N) skipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentInterval {
    pub lo: f64,
    pub hi: f64,
    pub draws_used: usize,
}

pub fn bootstrap_exponent(trace: &LossTrace, draws: usize, seed: u64) -> Result<ExponentInterval> {
    let points = fit_points(trace)?;
    fit_power_law(trace)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slopes = Vec::with_capacity(draws);
    for _ in 0..draws {
        let sample: Vec<(f64, f64)> = (0..points.len())
            .map(|_| points[rng.gen_range(0..points.len())])
            .collect();
        let first_n = sample[0].0;
        if sample.iter().all(|(n, _)| *n == first_n) {
            continue;
        }
        slopes.push(log_ols(&sample, 0.0).1);
    }
    if slopes.is_empty() {
        return Err(Error::DegenerateInput(
            "every bootstrap draw collapsed to one token count".into(),
        ));
    }
    slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = |q: f64| ((q * slopes.len() as f64).ceil() as usize).clamp(1, slopes.len()) - 1;
    Ok(ExponentInterval {
        lo: slopes[rank(0.05)],
        hi: slopes[rank(0.95)],
        draws_used: slopes.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainInterval {
    pub from_tokens: u64,
    pub to_tokens: u64,
    /// Loss drop per token doubling over this interval.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalGains {
    pub intervals: Vec<GainInterval>,
    /// Index of the first interval after the first whose gain falls below
    /// half the initial gain.
    pub knee: Option<usize>,
}

/// Loss improvement per doubling for each consecutive checkpoint pair:
/// (L(Nᵢ) − L(Nᵢ₊₁)) / log₂(Nᵢ₊₁ / Nᵢ).
pub fn marginal_gain(trace: &LossTrace) -> Result<MarginalGains> {
    trace.validate()?;
    if trace.points.len() < 2 {
        return Err(Error::DegenerateInput(
            "marginal gains need at least 2 checkpoints".into(),
        ));
    }
    let intervals: Vec<GainInterval> = trace
        .points
        .windows(2)
        .map(|pair| {
            let doublings = (pair[1].tokens_seen as f64 / pair[0].tokens_seen as f64).log2();
            GainInterval {
                from_tokens: pair[0].tokens_seen,
                to_tokens: pair[1].tokens_seen,
                gain: (pair[0].loss - pair[1].loss) / doublings,
            }
        })
        .collect();
    let first_gain = intervals[0].gain;
    let knee = intervals
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, iv)| iv.gain < 0.5 * first_gain)
        .map(|(i, _)| i);
    Ok(MarginalGains { intervals, knee })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftVerdict {
    pub max_abs_delta: f64,
    pub tau: f64,
    pub stable: bool,
}

/// Largest excursion of the trace from its first checkpoint, compared
/// against the noise band `tau`.
pub fn drift_check(trace: &LossTrace, tau: f64) -> DriftVerdict {
    assert!(!trace.points.is_empty(), "drift check needs a non-empty trace");
    let first = trace.points[0].loss;
    let max_abs_delta = trace
        .points
        .iter()
        .map(|p| (p.loss - first).abs())
        .fold(0.0, f64::max);
    DriftVerdict {
        max_abs_delta,
        tau,
        stable: max_abs_delta <= tau,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub tokens_seen: u64,
    /// L_domain(N₀) − L_domain(N): positive means improvement.
    pub delta_domain: f64,
    /// L_general(N₀) − L_general(N): positive means improvement.
    pub delta_general: f64,
    pub model_label: String,
}

/// Per-checkpoint loss improvements relative to the first checkpoint, domain
/// against general. Requires the two traces to share tokens_seen exactly.
pub fn frontier(domain: &LossTrace, general: &LossTrace) -> Result<Vec<FrontierPoint>> {
    domain.validate()?;
    general.validate()?;
    if domain.tokens() != general.tokens() {
        return Err(Error::MisalignedTraces(format!(
            "domain checkpoints {:?} != general checkpoints {:?}",
            domain.tokens(),
            general.tokens()
        )));
    }
    let d0 = domain.points[0].loss;
    let g0 = general.points[0].loss;
    Ok(domain
        .points
        .iter()
        .zip(&general.points)
        .map(|(d, g)| FrontierPoint {
            tokens_seen: d.tokens_seen,
            delta_domain: d0 - d.loss,
            delta_general: g0 - g.loss,
            model_label: domain.model_label.clone(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenEstimate {
    pub param_count: f64,
    /// param_count / baseline params.
    pub ratio: f64,
    pub low: f64,
    pub high: f64,
    pub gamma: f64,
}

/// Scales the observed baseline token requirement to another model size:
/// low = baseline_tokens · (params / baseline_params)^gamma, high = band ×
/// low. The baseline itself is the observed point, so its band collapses.
pub fn extrapolate_tokens(
    param_count: f64,
    baseline_params: f64,
    baseline_tokens: f64,
    gamma: f64,
    band_factor: f64,
) -> TokenEstimate {
    assert!(param_count > 0.0 && baseline_params > 0.0 && baseline_tokens > 0.0);
    assert!(band_factor >= 1.0, "band_factor below 1 would invert the band");
    let ratio = param_count / baseline_params;
    let (low, high) = if ratio == 1.0 {
        (baseline_tokens, baseline_tokens)
    } else {
        let low = baseline_tokens * ratio.powf(gamma);
        (low, band_factor * low)
    };
    TokenEstimate {
        param_count,
        ratio,
        low,
        high,
        gamma,
    }
}

const FIT_HEADER: &str = "signal,form,a,b,c,r2,window_lo,window_hi,b_lo90,b_hi90,model_label";
const FRONTIER_HEADER: &str =
    "tokens_seen,delta_domain_improvement,delta_general_improvement,model_label";
const ESTIMATE_HEADER: &str = "param_count,ratio,low_tokens,high_tokens,gamma";

/// One fitted curve with its provenance, as stored in the fits artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub model_label: String,
    pub signal: Signal,
    pub fit: PowerLawFit,
    pub exponent_interval: Option<ExponentInterval>,
}

pub fn write_fit_summaries(path: &Path, fits: &[FitSummary]) -> Result<()> {
    let mut out = String::from(FIT_HEADER);
    out.push('\n');
    for f in fits {
        let c = f.fit.c.map(|c| c.to_string()).unwrap_or_default();
        let (blo, bhi) = match &f.exponent_interval {
            Some(iv) => (iv.lo.to_string(), iv.hi.to_string()),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            f.signal.as_str(),
            f.fit.form.as_str(),
            f.fit.a,
            f.fit.b,
            c,
            f.fit.r2,
            f.fit.window.0,
            f.fit.window.1,
            blo,
            bhi,
            f.model_label
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_fit_summaries(path: &Path) -> Result<Vec<FitSummary>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(FIT_HEADER) {
        return Err(Error::Format(format!(
            "{}: expected header {FIT_HEADER:?}",
            path.display()
        )));
    }
    let mut fits = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.splitn(11, ',').collect();
        if fields.len() != 11 {
            return Err(Error::Format(format!("{}: short fit row {line:?}", path.display())));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Format(format!("{}: bad number {s:?}", path.display())))
        };
        let c = if fields[4].is_empty() { None } else { Some(num(fields[4])?) };
        let exponent_interval = if fields[8].is_empty() {
            None
        } else {
            Some(ExponentInterval {
                lo: num(fields[8])?,
                hi: num(fields[9])?,
                draws_used: 0,
            })
        };
        fits.push(FitSummary {
            signal: Signal::parse(fields[0])?,
            fit: PowerLawFit {
                form: FitForm::parse(fields[1])?,
                a: num(fields[2])?,
                b: num(fields[3])?,
                c,
                r2: num(fields[5])?,
                window: (
                    num(fields[6])? as u64,
                    num(fields[7])? as u64,
                ),
            },
            exponent_interval,
            model_label: fields[10].to_string(),
        });
    }
    Ok(fits)
}

pub fn write_frontier_csv(path: &Path, points: &[FrontierPoint]) -> Result<()> {
    let mut out = String::from(FRONTIER_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.tokens_seen, p.delta_domain, p.delta_general, p.model_label
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_frontier_csv(path: &Path) -> Result<Vec<FrontierPoint>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(FRONTIER_HEADER) {
        return Err(Error::Format(format!(
            "{}: expected header {FRONTIER_HEADER:?}",
            path.display()
        )));
    }
    let mut points = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.splitn(4, ',').collect();
        if fields.len() != 4 {
            return Err(Error::Format(format!(
                "{}: short frontier row {line:?}",
                path.display()
            )));
        }
        let bad = |s: &str| Error::Format(format!("{}: bad number {s:?}", path.display()));
        points.push(FrontierPoint {
            tokens_seen: fields[0].parse().map_err(|_| bad(fields[0]))?,
            delta_domain: fields[1].parse().map_err(|_| bad(fields[1]))?,
            delta_general: fields[2].parse().map_err(|_| bad(fields[2]))?,
            model_label: fields[3].to_string(),
        });
    }
    Ok(points)
}

pub fn write_estimates_csv(path: &Path, estimates: &[TokenEstimate]) -> Result<()> {
    let mut out = String::from(ESTIMATE_HEADER);
    out.push('\n');
    for e in estimates {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            e.param_count, e.ratio, e.low, e.high, e.gamma
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_estimates_csv(path: &Path) -> Result<Vec<TokenEstimate>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(ESTIMATE_HEADER) {
        return Err(Error::Format(format!(
            "{}: expected header {ESTIMATE_HEADER:?}",
            path.display()
        )));
    }
    let mut estimates = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Format(format!(
                "{}: short estimate row {line:?}",
                path.display()
            )));
        }
        let mut nums = fields.iter().map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("{}: bad number {s:?}", path.display())))
        });
        estimates.push(TokenEstimate {
            param_count: nums.next().unwrap()?,
            ratio: nums.next().unwrap()?,
            low: nums.next().unwrap()?,
            high: nums.next().unwrap()?,
            gamma: nums.next().unwrap()?,
        });
    }
    Ok(estimates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::TracePoint;

    fn trace(points: Vec<(u64, f64)>) -> LossTrace {
        LossTrace {
            run_id: "test".into(),
            signal: Signal::DomainVal,
            model_label: "m".into(),
            points: points
                .into_iter()
                .map(|(tokens_seen, loss)| TracePoint { tokens_seen, loss })
                .collect(),
        }
    }

    fn power_law_trace(a: f64, b: f64, c: f64, tokens: &[u64]) -> LossTrace {
        trace(
            tokens
                .iter()
                .map(|&n| (n, c + a * (n as f64).powf(b)))
                .collect(),
        )
    }

    const MILESTONES: [u64; 4] = [50_000_000, 100_000_000, 200_000_000, 400_000_000];

    #[test]
    fn recovers_exact_power_law_parameters() {
        let fit = fit_power_law(&power_law_trace(3.0, -0.05, 0.0, &MILESTONES)).unwrap();
        assert!((fit.a - 3.0).abs() < 1e-6 * 3.0, "a = {}", fit.a);
        assert!((fit.b + 0.05).abs() < 1e-6 * 0.05, "b = {}", fit.b);
        assert!((fit.r2 - 1.0).abs() < 1e-9);
        assert_eq!(fit.window, (50_000_000, 400_000_000));
        assert_eq!(fit.form, FitForm::Pure);
    }

    #[test]
    fn flat_trace_fits_with_zero_exponent() {
        let fit = fit_power_law(&trace(vec![(100, 2.5), (200, 2.5), (400, 2.5)])).unwrap();
        assert_eq!(fit.b, 0.0);
        assert!((fit.a - 2.5).abs() < 1e-12);
        assert_eq!(fit.r2, 1.0);
    }

    #[test]
    fn decreasing_trace_has_negative_exponent() {
        let fit = fit_power_law(&trace(vec![(100, 3.0), (200, 2.8), (400, 2.7)])).unwrap();
        assert!(fit.b < 0.0);
    }

    #[test]
    fn degenerate_and_nonpositive_inputs_are_rejected() {
        assert!(matches!(
            fit_power_law(&trace(vec![(100, 2.0)])),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            fit_power_law(&trace(vec![(100, 2.0), (200, 0.0)])),
            Err(Error::NonpositiveLoss(_))
        ));
    }

    #[test]
    fn saturating_fit_recovers_offset_curve_within_one_percent() {
        let tokens: Vec<u64> = (0..8).map(|k| 1000 * 4u64.pow(k)).collect();
        let fit = fit_saturating_power_law(&power_law_trace(5.0, -0.3, 2.0, &tokens)).unwrap();
        assert_eq!(fit.form, FitForm::Saturating);
        let c = fit.c.unwrap();
        assert!((fit.a - 5.0).abs() / 5.0 < 0.01, "a = {}", fit.a);
        assert!((fit.b + 0.3).abs() / 0.3 < 0.01, "b = {}", fit.b);
        assert!((c - 2.0).abs() / 2.0 < 0.01, "c = {c}");
        assert!(fit.r2 > 0.999999);
    }

    #[test]
    fn saturating_fit_falls_back_to_pure_on_pure_data() {
        let tokens: Vec<u64> = (0..8).map(|k| 1000 * 4u64.pow(k)).collect();
        let data = power_law_trace(5.0, -0.3, 0.0, &tokens);
        let fit = fit_saturating_power_law(&data).unwrap();
        assert_eq!(fit.form, FitForm::Pure);
        assert_eq!(fit.c, None);
        let pure = fit_power_law(&data).unwrap();
        assert_eq!(fit, pure);
    }

    #[test]
    fn saturating_fit_needs_four_points() {
        let short = trace(vec![(100, 3.0), (200, 2.8), (400, 2.7)]);
        assert!(matches!(
            fit_saturating_power_law(&short),
            Err(Error::DegenerateInput(_))
        ));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        /// Rescaling losses rescales only the amplitude; rescaling token
        /// counts moves amplitude by s^(-b). The exponent never moves.
        #[test]
        fn fit_is_scale_equivariant(
            losses in proptest::collection::vec(0.5f64..5.0, 4..10),
            loss_scale in 0.1f64..10.0,
            token_scale in 1u64..50,
        ) {
            let base: Vec<(u64, f64)> = losses
                .iter()
                .enumerate()
                .map(|(i, &l)| (1000 * 2u64.pow(i as u32), l))
                .collect();
            let fit = fit_power_law(&trace(base.clone())).unwrap();

            let scaled_l: Vec<(u64, f64)> =
                base.iter().map(|&(n, l)| (n, l * loss_scale)).collect();
            let fit_l = fit_power_law(&trace(scaled_l)).unwrap();
            proptest::prop_assert!((fit_l.b - fit.b).abs() < 1e-9);
            proptest::prop_assert!((fit_l.a - fit.a * loss_scale).abs() < 1e-9 * fit_l.a.abs().max(1.0));
            proptest::prop_assert!((fit_l.r2 - fit.r2).abs() < 1e-9);

            let scaled_n: Vec<(u64, f64)> =
                base.iter().map(|&(n, l)| (n * token_scale, l)).collect();
            let fit_n = fit_power_law(&trace(scaled_n)).unwrap();
            proptest::prop_assert!((fit_n.b - fit.b).abs() < 1e-9);
            let expected_a = fit.a * (token_scale as f64).powf(-fit.b);
            proptest::prop_assert!((fit_n.a - expected_a).abs() < 1e-9 * expected_a.abs().max(1.0));
        }
    }

    #[test]
    fn bootstrap_interval_collapses_on_exact_data_and_is_seeded() {
        let exact = power_law_trace(3.0, -0.05, 0.0, &MILESTONES);
        let iv = bootstrap_exponent(&exact, BOOTSTRAP_DRAWS, 42).unwrap();
        assert!(iv.lo <= -0.05 && -0.05 <= iv.hi);
        assert!(iv.hi - iv.lo < 1e-9, "exact data leaves no spread");

        let noisy = trace(vec![
            (50_000_000, 2.61),
            (100_000_000, 2.52),
            (200_000_000, 2.49),
            (400_000_000, 2.41),
        ]);
        let a = bootstrap_exponent(&noisy, BOOTSTRAP_DRAWS, 42).unwrap();
        let b = bootstrap_exponent(&noisy, BOOTSTRAP_DRAWS, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.lo < a.hi);
        let base = fit_power_law(&noisy).unwrap().b;
        assert!(a.lo <= base && base <= a.hi);
    }

    #[test]
    fn gains_decrease_along_an_exact_power_law() {
        let gains = marginal_gain(&power_law_trace(3.0, -0.05, 0.0, &MILESTONES)).unwrap();
        assert_eq!(gains.intervals.len(), 3);
        for pair in gains.intervals.windows(2) {
            assert!(pair[1].gain < pair[0].gain);
        }
    }

    #[test]
    fn log_linear_decay_has_equal_gains_and_no_knee() {
        let points: Vec<(u64, f64)> = (0..5)
            .map(|k| (1000u64 << k, 3.0 - 0.1 * k as f64))
            .collect();
        let gains = marginal_gain(&trace(points)).unwrap();
        for iv in &gains.intervals {
            assert!((iv.gain - 0.1).abs() < 1e-12);
        }
        assert_eq!(gains.knee, None);
    }

    #[test]
    fn knee_flags_the_first_halved_interval() {
        // Gains per doubling: 0.40, 0.30, 0.10: the third drops below half
        // of the first.
        let gains = marginal_gain(&trace(vec![
            (1000, 3.0),
            (2000, 2.6),
            (4000, 2.3),
            (8000, 2.2),
        ]))
        .unwrap();
        assert_eq!(gains.knee, Some(2));
        let two_points = marginal_gain(&trace(vec![(1000, 3.0), (2000, 2.6)])).unwrap();
        assert_eq!(two_points.intervals.len(), 1);
        assert_eq!(two_points.knee, None);
    }

    #[test]
    fn drift_verdicts_follow_the_band() {
        let flat = drift_check(&trace(vec![(100, 2.0), (200, 2.0), (400, 2.0)]), DEFAULT_TAU);
        assert_eq!(flat.max_abs_delta, 0.0);
        assert!(flat.stable);

        let excursion = trace(vec![(100, 2.0), (200, 2.05), (400, 2.0)]);
        let verdict = drift_check(&excursion, 0.01);
        assert!(!verdict.stable);
        assert!((verdict.max_abs_delta - 0.05).abs() < 1e-12);
        // Monotone in tau: widening the band never flips stable to unstable.
        assert!(drift_check(&excursion, 0.06).stable);
    }

    #[test]
    fn frontier_starts_at_the_origin_with_improvement_positive() {
        let domain = trace(vec![(100, 2.50), (200, 2.45), (400, 2.40)]);
        let general = trace(vec![(100, 3.00), (200, 3.00), (400, 3.00)]);
        let points = frontier(&domain, &general).unwrap();
        assert_eq!(points[0].delta_domain, 0.0);
        assert_eq!(points[0].delta_general, 0.0);
        assert!((points[2].delta_domain - 0.10).abs() < 1e-12);
        assert_eq!(points[2].delta_general, 0.0);
    }

    #[test]
    fn misaligned_traces_are_rejected() {
        let domain = trace(vec![(100, 2.5), (200, 2.4)]);
        let general = trace(vec![(100, 3.0), (300, 3.0)]);
        assert!(matches!(
            frontier(&domain, &general),
            Err(Error::MisalignedTraces(_))
        ));
    }

    #[test]
    fn baseline_extrapolation_is_the_observed_point() {
        let e = extrapolate_tokens(3e9, 3e9, 4e8, DEFAULT_GAMMA, DEFAULT_BAND_FACTOR);
        assert_eq!(e.ratio, 1.0);
        assert_eq!(e.low, 4e8);
        assert_eq!(e.high, 4e8);
    }

    #[test]
    fn seven_billion_scales_linearly_with_doubled_band() {
        let e = extrapolate_tokens(7e9, 3e9, 4e8, 1.0, 2.0);
        assert!((e.ratio - 7.0 / 3.0).abs() < 1e-12);
        assert!((e.low - 4e8 * 7.0 / 3.0).abs() < 1.0, "low = {}", e.low);
        assert!((e.high - 2.0 * e.low).abs() < 1e-6);
    }

    #[test]
    fn zero_gamma_pins_low_to_the_baseline() {
        for params in [7e9, 13e9, 70e9] {
            let e = extrapolate_tokens(params, 3e9, 4e8, 0.0, 2.0);
            assert_eq!(e.low, 4e8);
            assert_eq!(e.high, 8e8);
        }
    }

    #[test]
    fn estimates_grow_with_parameter_count() {
        let sizes = [3e9, 7e9, 13e9, 32e9, 70e9];
        let lows: Vec<f64> = sizes
            .iter()
            .map(|&p| extrapolate_tokens(p, 3e9, 4e8, 1.0, 2.0).low)
            .collect();
        for pair in lows.windows(2) {
            assert!(pair[1] > pair[0]);
        }
    }

    #[test]
    fn fit_summaries_round_trip_with_comma_labels() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("fits.csv");
        let data = power_law_trace(3.0, -0.05, 0.0, &MILESTONES);
        let fits = vec![
            FitSummary {
                model_label: "ngram, order 3".into(),
                signal: Signal::DomainVal,
                fit: fit_power_law(&data).unwrap(),
                exponent_interval: Some(ExponentInterval {
                    lo: -0.06,
                    hi: -0.04,
                    draws_used: 0,
                }),
            },
            FitSummary {
                model_label: "ngram, order 3".into(),
                signal: Signal::DomainVal,
                fit: fit_saturating_power_law(&power_law_trace(
                    5.0,
                    -0.3,
                    2.0,
                    &[1000, 4000, 16_000, 64_000, 256_000],
                ))
                .unwrap(),
                exponent_interval: None,
            },
        ];
        write_fit_summaries(&path, &fits).unwrap();
        assert_eq!(read_fit_summaries(&path).unwrap(), fits);
    }

    #[test]
    fn frontier_and_estimate_files_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let frontier_path = tmp.path().join("frontier.csv");
        let domain = trace(vec![(100, 2.5), (200, 2.4)]);
        let general = trace(vec![(100, 3.0), (200, 2.99)]);
        let points = frontier(&domain, &general).unwrap();
        write_frontier_csv(&frontier_path, &points).unwrap();
        assert_eq!(read_frontier_csv(&frontier_path).unwrap(), points);

        let est_path = tmp.path().join("estimates.csv");
        let estimates: Vec<TokenEstimate> = [3e9, 7e9, 70e9]
            .iter()
            .map(|&p| extrapolate_tokens(p, 3e9, 4e8, 1.0, 2.0))
            .collect();
        write_estimates_csv(&est_path, &estimates).unwrap();
        assert_eq!(read_estimates_csv(&est_path).unwrap(), estimates);
    }
}
