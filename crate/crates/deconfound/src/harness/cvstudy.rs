//! Exhaustive grid study of weight variability.
//!
//! Every cohort is a vector of propensity values drawn from a fixed
//! grid; each member is weighted once as an inverse-probability weight
//! (1/p, every member treated) and once as the complement weight
//! (1 - p). The study enumerates all cohorts and counts how often the
//! complement weights have the strictly smaller coefficient of
//! variation. Constant-probability cohorts give both schemes CV 0 and
//! are counted as ties, never wins.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::weights::population_cv;

/// Which cohorts the grid enumerates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnumerationMode {
    /// Every ordered assignment of grid levels to positions.
    Tuples,
    /// One representative per multiset of levels (order never changes
    /// a CV, so this deduplicates permutations).
    Multisets,
}

impl fmt::Display for EnumerationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnumerationMode::Tuples => f.write_str("tuples"),
            EnumerationMode::Multisets => f.write_str("multisets"),
        }
    }
}

impl FromStr for EnumerationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tuples" => Ok(EnumerationMode::Tuples),
            "multisets" => Ok(EnumerationMode::Multisets),
            other => Err(Error::Config(format!(
                "unknown enumeration mode {other:?} (expected tuples or multisets)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvStudyConfig {
    pub grid_min: f64,
    pub grid_max: f64,
    pub step: f64,
    /// Cohort size: how many probabilities each enumerated vector holds.
    pub cohort_size: usize,
    pub mode: EnumerationMode,
}

impl Default for CvStudyConfig {
    fn default() -> Self {
        CvStudyConfig {
            grid_min: 0.10,
            grid_max: 0.90,
            step: 0.10,
            cohort_size: 6,
            mode: EnumerationMode::Tuples,
        }
    }
}

impl CvStudyConfig {
    /// The grid levels, lowest first.
    pub fn levels(&self) -> Result<Vec<f64>> {
        if !(self.grid_min.is_finite() && self.grid_max.is_finite() && self.step.is_finite()) {
            return Err(Error::Config("grid bounds and step must be finite".into()));
        }
        if self.grid_min <= 0.0 || self.grid_max >= 1.0 || self.grid_min > self.grid_max {
            return Err(Error::Config(format!(
                "grid must satisfy 0 < min <= max < 1, got [{}, {}]",
                self.grid_min, self.grid_max
            )));
        }
        if self.step <= 0.0 {
            return Err(Error::Config(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        let count = ((self.grid_max - self.grid_min) / self.step).round() as usize + 1;
        if count < 2 {
            return Err(Error::Config("grid must hold at least two levels".into()));
        }
        let levels: Vec<f64> = (0..count)
            .map(|i| self.grid_min + i as f64 * self.step)
            .collect();
        if levels.iter().any(|&p| p <= 0.0 || p >= 1.0) {
            return Err(Error::Config(
                "every grid level must lie strictly inside (0, 1)".into(),
            ));
        }
        if self.cohort_size == 0 {
            return Err(Error::Config("cohort size must be at least 1".into()));
        }
        Ok(levels)
    }
}

/// One cohort's pair of dispersion summaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub cv_ipw: f64,
    pub cv_dfw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvStudyResult {
    pub mode: EnumerationMode,
    pub total: usize,
    /// Cohorts where the complement weights were strictly less variable.
    pub wins: usize,
    /// Cohorts where both schemes tied exactly (constant cohorts).
    pub ties: usize,
    pub fraction: f64,
    pub outcomes: Vec<CvOutcome>,
}

/// CVs for one probability cohort under both weightings.
fn cohort_outcome(probabilities: &[f64], scratch: &mut Vec<f64>) -> CvOutcome {
    scratch.clear();
    scratch.extend(probabilities.iter().map(|&p| 1.0 / p));
    let cv_ipw = population_cv(scratch);
    scratch.clear();
    scratch.extend(probabilities.iter().map(|&p| 1.0 - p));
    let cv_dfw = population_cv(scratch);
    CvOutcome { cv_ipw, cv_dfw }
}

fn tally(outcomes: Vec<CvOutcome>, mode: EnumerationMode) -> CvStudyResult {
    let total = outcomes.len();
    let mut wins = 0usize;
    let mut ties = 0usize;
    for o in &outcomes {
        if o.cv_dfw < o.cv_ipw {
            wins += 1;
        } else if o.cv_dfw == o.cv_ipw {
            ties += 1;
        }
    }
    CvStudyResult {
        mode,
        total,
        wins,
        ties,
        fraction: wins as f64 / total as f64,
        outcomes,
    }
}

/// All ordered cohorts, split across the pool by first position. The
/// inner odometer walks the remaining positions in lexicographic
/// order, so concatenating chunks preserves enumeration order.
fn run_tuples(levels: &[f64], size: usize, execution: Execution) -> Vec<CvOutcome> {
    let k = levels.len();
    let per_chunk = k.pow((size - 1) as u32);
    let chunks = execution.map_indexed(k, |first| {
        let mut outcomes = Vec::with_capacity(per_chunk);
        let mut digits = vec![0usize; size - 1];
        let mut cohort = vec![levels[first]; size];
        let mut scratch = Vec::with_capacity(size);
        loop {
            for (slot, &d) in cohort[1..].iter_mut().zip(digits.iter()) {
                *slot = levels[d];
            }
            outcomes.push(cohort_outcome(&cohort, &mut scratch));
            // Advance the odometer, most significant digit first.
            let mut pos = size - 1;
            loop {
                if pos == 0 {
                    return outcomes;
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < k {
                    break;
                }
                digits[pos] = 0;
            }
        }
    });
    chunks.into_iter().flatten().collect()
}

/// One representative per multiset: non-decreasing cohorts only.
fn run_multisets(levels: &[f64], size: usize) -> Vec<CvOutcome> {
    let k = levels.len();
    let mut outcomes = Vec::new();
    let mut digits = vec![0usize; size];
    let mut cohort = vec![0.0f64; size];
    let mut scratch = Vec::with_capacity(size);
    loop {
        for (slot, &d) in cohort.iter_mut().zip(digits.iter()) {
            *slot = levels[d];
        }
        outcomes.push(cohort_outcome(&cohort, &mut scratch));
        // Next non-decreasing index vector.
        let mut pos = size;
        loop {
            if pos == 0 {
                return outcomes;
            }
            pos -= 1;
            if digits[pos] + 1 < k {
                let v = digits[pos] + 1;
                for d in digits[pos..].iter_mut() {
                    *d = v;
                }
                break;
            }
        }
    }
}

/// Runs the enumeration and tallies strict wins for the complement
/// weighting. Single-level special case: one cohort, a tie.
pub fn run_cv_study(config: &CvStudyConfig, execution: Execution) -> Result<CvStudyResult> {
    let levels = config.levels()?;
    let outcomes = match config.mode {
        EnumerationMode::Tuples => {
            if config.cohort_size == 1 {
                // Size-1 cohorts are constant by definition.
                levels
                    .iter()
                    .map(|&p| cohort_outcome(&[p], &mut Vec::new()))
                    .collect()
            } else {
                run_tuples(&levels, config.cohort_size, execution)
            }
        }
        EnumerationMode::Multisets => run_multisets(&levels, config.cohort_size),
    };
    Ok(tally(outcomes, config.mode))
}
