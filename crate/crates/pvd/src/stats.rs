//! Statistical machinery for the evaluation: Wilson score intervals for
//! proportions, a seeded percentile bootstrap for the precision gap, and two
//! exact paired tests (Fisher, McNemar).
//!
//! Everything here is deterministic. The bootstrap derives one RNG per
//! resample from `(seed, resample index, redraw attempt)`, so results are
//! bit-for-bit reproducible regardless of execution order, and both exact
//! tests enumerate their null distributions rather than relying on asymptotic
//! approximations.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::metrics::ScoredRecord;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("cannot form an interval over zero trials")]
    ZeroTrials,
    #[error("successes ({successes}) exceed trials ({trials})")]
    SuccessesExceedTrials { successes: u64, trials: u64 },
    #[error("confidence level must lie strictly between 0 and 1, got {0}")]
    InvalidLevel(f64),
    #[error("records must be non-empty to bootstrap")]
    NoRecords,
    #[error("the gap is undefined: every record is {side}, so the other side is empty")]
    DegenerateSplit { side: &'static str },
    #[error("a resample stayed degenerate after {attempts} redraws")]
    ResampleStuck { attempts: u32 },
    #[error("paired samples differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
}

/// A two-sided confidence interval around a point estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    /// The raw point estimate (for proportions, `successes / trials`).
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    /// Coverage level, e.g. 0.95.
    pub level: f64,
}

fn z_for(level: f64) -> Result<f64, StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel(level));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

/// Wilson score interval for a binomial proportion.
///
/// Never escapes `[0, 1]`; the boundary cases are exact (zero successes pin
/// the lower bound to 0, all successes pin the upper bound to 1).
pub fn wilson_interval(
    successes: u64,
    trials: u64,
    level: f64,
) -> Result<ConfidenceInterval, StatsError> {
    if trials == 0 {
        return Err(StatsError::ZeroTrials);
    }
    if successes > trials {
        return Err(StatsError::SuccessesExceedTrials { successes, trials });
    }
    let z = z_for(level)?;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lower = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let upper = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    Ok(ConfidenceInterval { point: p, lower, upper, level })
}

/// Bootstrap estimate of the precision gap (HC precision − non-HC accuracy).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapGap {
    /// Gap on the full record set, as a difference of proportions.
    pub point: f64,
    pub interval: ConfidenceInterval,
    pub resamples: u32,
    /// Resamples that came up with an empty side and were redrawn.
    pub redraws: u32,
}

fn resample_rng(seed: u64, resample: u32, attempt: u32) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"bootstrap-gap");
    hasher.update(seed.to_le_bytes());
    hasher.update(u64::from(resample).to_le_bytes());
    hasher.update(u64::from(attempt).to_le_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

fn gap_of(flags: &[(bool, bool)]) -> Option<f64> {
    let (mut hc_n, mut hc_correct, mut non_n, mut non_correct) = (0u64, 0u64, 0u64, 0u64);
    for &(hc, correct) in flags {
        if hc {
            hc_n += 1;
            hc_correct += correct as u64;
        } else {
            non_n += 1;
            non_correct += correct as u64;
        }
    }
    if hc_n == 0 || non_n == 0 {
        return None;
    }
    Some(hc_correct as f64 / hc_n as f64 - non_correct as f64 / non_n as f64)
}

const MAX_REDRAW_ATTEMPTS: u32 = 1000;

/// Percentile bootstrap CI for the precision gap, resampling questions with
/// replacement. Degenerate resamples (one side empty) are redrawn with a
/// fresh attempt-derived RNG and counted in `redraws`. Errors when the input
/// itself has an empty side, since the statistic does not exist there.
pub fn bootstrap_gap_ci(
    records: &[ScoredRecord],
    resamples: u32,
    seed: u64,
    level: f64,
) -> Result<BootstrapGap, StatsError> {
    if records.is_empty() {
        return Err(StatsError::NoRecords);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel(level));
    }
    if resamples == 0 {
        return Err(StatsError::ZeroTrials);
    }
    let flags: Vec<(bool, bool)> = records.iter().map(|r| (r.hc_flag, r.correct)).collect();
    let point = gap_of(&flags).ok_or_else(|| {
        let side = if flags.iter().all(|(hc, _)| *hc) {
            "high-confidence"
        } else {
            "non-high-confidence"
        };
        StatsError::DegenerateSplit { side }
    })?;

    let n = flags.len();
    let mut gaps = Vec::with_capacity(resamples as usize);
    let mut redraws = 0u32;
    let mut draw = vec![(false, false); n];
    for r in 0..resamples {
        let mut attempt = 0u32;
        let gap = loop {
            let mut rng = resample_rng(seed, r, attempt);
            for slot in draw.iter_mut() {
                *slot = flags[rng.random_range(0..n)];
            }
            if let Some(gap) = gap_of(&draw) {
                break gap;
            }
            attempt += 1;
            redraws += 1;
            if attempt >= MAX_REDRAW_ATTEMPTS {
                return Err(StatsError::ResampleStuck { attempts: attempt });
            }
        };
        gaps.push(gap);
    }
    gaps.sort_by(|a, b| a.partial_cmp(b).expect("gaps are finite"));

    // Type-1 (inverse-ECDF) percentile: the smallest order statistic whose
    // ECDF weight reaches the target quantile.
    let pick = |q: f64| -> f64 {
        let index = ((q * resamples as f64).ceil() as usize).max(1) - 1;
        gaps[index.min(gaps.len() - 1)]
    };
    let alpha = 1.0 - level;
    Ok(BootstrapGap {
        point,
        interval: ConfidenceInterval {
            point,
            lower: pick(alpha / 2.0),
            upper: pick(1.0 - alpha / 2.0),
            level,
        },
        resamples,
        redraws,
    })
}

/// Result of an exact hypothesis test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub p_value: f64,
    /// True when the data carried no information for the test (a zero margin,
    /// or no discordant pairs) and the p-value is 1 by convention.
    pub degenerate: bool,
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Relative tolerance for "as extreme as observed" probability ties, needed
/// because the table probabilities are computed in log space.
const FISHER_TIE_TOLERANCE: f64 = 1e-7;

/// Two-sided Fisher exact test on a 2×2 contingency table
/// `[[a, b], [c, d]]`: the summed probability of all tables with the observed
/// margins that are no more likely than the observed one.
pub fn fisher_exact(table: [[u64; 2]; 2]) -> TestResult {
    let [[a, b], [c, d]] = table;
    let (r1, r2) = (a + b, c + d);
    let (c1, _c2) = (a + c, b + d);
    let n = r1 + r2;
    if r1 == 0 || r2 == 0 || c1 == 0 || c1 == n {
        return TestResult { p_value: 1.0, degenerate: true };
    }
    let ln_p = |x: u64| -> f64 {
        ln_choose(r1, x) + ln_choose(r2, c1 - x) - ln_choose(n, c1)
    };
    let observed = ln_p(a);
    let threshold = observed + FISHER_TIE_TOLERANCE.ln_1p();
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let mut p = 0.0;
    for x in lo..=hi {
        let lp = ln_p(x);
        if lp <= threshold {
            p += lp.exp();
        }
    }
    TestResult { p_value: p.min(1.0), degenerate: false }
}

/// P(X ≤ m) for X ~ Binomial(n, ½), exactly, via a dyadic u128 sum.
/// Valid while C(n, ⌊n/2⌋) fits in u128, i.e. n ≤ 120.
fn binom_half_tail_exact(n: u32, m: u32) -> f64 {
    let mut sum: u128 = 0;
    let mut coeff: u128 = 1; // C(n, 0)
    for i in 0..=m as u128 {
        if i > 0 {
            coeff = coeff * (n as u128 - i + 1) / i;
        }
        sum += coeff;
    }
    // sum / 2^n as a dyadic rational; exact in f64 while sum < 2^53 after
    // shifting, otherwise correctly rounded.
    (sum as f64) * (2f64).powi(-(n as i32))
}

/// P(X ≤ m) for X ~ Binomial(n, ½) in log space, for n beyond the u128 range.
fn binom_half_tail_log(n: u32, m: u32) -> f64 {
    let terms: Vec<f64> =
        (0..=m as u64).map(|i| ln_choose(n as u64, i) - n as f64 * 2f64.ln()).collect();
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
    log_sum.exp()
}

const MCNEMAR_EXACT_LIMIT: u32 = 120;

/// Exact two-sided McNemar test over paired per-question correctness.
/// Only the discordant pairs matter: `p = min(1, 2·P(X ≤ min(b, c)))` with
/// `X ~ Binomial(b + c, ½)`, where `b` and `c` count the questions each
/// method alone got right.
pub fn mcnemar(correct_a: &[bool], correct_b: &[bool]) -> Result<McNemarResult, StatsError> {
    if correct_a.len() != correct_b.len() {
        return Err(StatsError::LengthMismatch { a: correct_a.len(), b: correct_b.len() });
    }
    if correct_a.is_empty() {
        return Err(StatsError::ZeroTrials);
    }
    let mut b = 0u32;
    let mut c = 0u32;
    for (&ra, &rb) in correct_a.iter().zip(correct_b) {
        match (ra, rb) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    let n = b + c;
    if n == 0 {
        return Ok(McNemarResult {
            test: TestResult { p_value: 1.0, degenerate: true },
            a_only: b,
            b_only: c,
        });
    }
    let m = b.min(c);
    let tail = if n <= MCNEMAR_EXACT_LIMIT {
        binom_half_tail_exact(n, m)
    } else {
        binom_half_tail_log(n, m)
    };
    Ok(McNemarResult {
        test: TestResult { p_value: (2.0 * tail).min(1.0), degenerate: false },
        a_only: b,
        b_only: c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    pub test: TestResult,
    /// Questions only the first method answered correctly.
    pub a_only: u32,
    /// Questions only the second method answered correctly.
    pub b_only: u32,
}
