//! Positive-series bookkeeping shared by the certificate modules.
//!
//! Certificates reduce to the behavior of a positive series whose terms have
//! geometrically separated tails (callers group terms, e.g. by generation, to
//! guarantee this). Classification therefore uses the ratio test on a tail
//! window: ratios pinned at or above one mean divergence, ratios bounded away
//! below one mean convergence, and anything straddling the threshold is
//! reported as inconclusive rather than guessed.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Ratio at or above this counts as non-contracting. Slightly below 1 so that
/// float noise on exactly-critical series still lands on the divergent side.
pub const RATIO_THRESHOLD: f64 = 0.999;

/// Number of trailing ratios inspected.
pub const TAIL_WINDOW: usize = 10;

/// Minimum number of terms a series needs before classification is attempted.
pub const MIN_TERMS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesVerdict {
    Diverges,
    Converges,
    Inconclusive,
}

/// A classified positive series.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesReport {
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Consecutive term ratios, `ratios[i] = terms[i+1] / terms[i]`.
    pub ratios: Vec<f64>,
    pub tail_ratio_min: f64,
    pub tail_ratio_max: f64,
    pub verdict: SeriesVerdict,
}

impl SeriesReport {
    /// Classify a finite batch of positive series terms.
    pub fn classify(terms: Vec<f64>) -> Result<SeriesReport> {
        if terms.len() < MIN_TERMS {
            return Err(Error::TooFewTerms { got: terms.len(), need: MIN_TERMS });
        }
        if let Some(bad) = terms.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::InvalidParam(format!(
                "series terms must be positive and finite, got {bad}"
            )));
        }
        let partial_sums: Vec<f64> = terms
            .iter()
            .scan(0.0, |acc, t| {
                *acc += t;
                Some(*acc)
            })
            .collect();
        let ratios: Vec<f64> = terms.windows(2).map(|w| w[1] / w[0]).collect();
        let window = TAIL_WINDOW.min(ratios.len());
        let tail = &ratios[ratios.len() - window..];
        let tail_ratio_min = tail.iter().copied().fold(f64::INFINITY, f64::min);
        let tail_ratio_max = tail.iter().copied().fold(0.0, f64::max);
        let verdict = if tail_ratio_min >= RATIO_THRESHOLD {
            SeriesVerdict::Diverges
        } else if tail_ratio_max < RATIO_THRESHOLD {
            SeriesVerdict::Converges
        } else {
            SeriesVerdict::Inconclusive
        };
        Ok(SeriesReport {
            terms,
            partial_sums,
            ratios,
            tail_ratio_min,
            tail_ratio_max,
            verdict,
        })
    }

    /// Tabulate terms, sums and ratios but take the verdict from the caller.
    /// Used where a sharper analytic criterion decides convergence (for
    /// example p-series-like tails where consecutive ratios tend to 1 and the
    /// ratio heuristic says nothing); the tabulated ratios remain available
    /// as a numeric cross-check.
    pub fn tabulate(terms: Vec<f64>, verdict: SeriesVerdict) -> Result<SeriesReport> {
        let mut report = SeriesReport::classify(terms)?;
        report.verdict = verdict;
        Ok(report)
    }

    pub fn sum(&self) -> f64 {
        *self.partial_sums.last().expect("classified series is nonempty")
    }
}

/// Volume of the unit ball in R^k (V_0 = 1, V_1 = 2, V_2 = pi, ...), via the
/// two-step recurrence V_k = 2 pi V_{k-2} / k.
pub fn unit_ball_volume(k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI * unit_ball_volume(k - 2) / k as f64,
    }
}
