//! Per-domain decision-threshold calibration at a fixed false-positive
//! rate.
//!
//! The search starts at the mean of the human scores and walks toward the
//! target FPR; every time the walk overshoots, the step is halved and its
//! sign flipped, until the achieved FPR is within epsilon of the target or
//! the iteration cap is reached. On non-convergence the best visited
//! threshold is returned: the one whose FPR is closest to the target while
//! staying below it, falling back to the minimal visited FPR.
//!
//! The prediction rule is strict: a document is called machine iff its
//! score is strictly greater than the threshold. Under this rule the
//! maximum human score always yields FPR 0 exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub doc_id: String,
    pub detector_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub target_fpr: f64,
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            target_fpr: 0.05,
            epsilon: 0.0005,
            max_iters: 50,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_fpr > 0.0 && self.target_fpr < 1.0) {
            return Err(Error::Config(format!(
                "target_fpr {} outside (0, 1)",
                self.target_fpr
            )));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::Config(format!("epsilon {} must be > 0", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedThreshold {
    pub detector_id: String,
    pub domain: String,
    pub value: f64,
    pub achieved_fpr: f64,
    pub converged: bool,
    pub iterations_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Fraction of human scores strictly greater than the threshold.
pub fn compute_fpr(human_scores: &[f64], threshold: f64) -> Result<f64> {
    if human_scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let above = human_scores.iter().filter(|&&s| s > threshold).count();
    Ok(above as f64 / human_scores.len() as f64)
}

/// Iterative threshold search.
pub fn search_threshold(
    human_scores: &[f64],
    config: &SearchConfig,
) -> Result<CalibratedThreshold> {
    if human_scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    config.validate()?;
    let n = human_scores.len();
    let max = human_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = human_scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = human_scores.iter().sum::<f64>() / n as f64;

    // Degenerate inputs: constant scores, or too few samples for any FPR in
    // (0, target]. Return the FPR-0 threshold with a warning.
    let unattainable = (1.0 / n as f64) > config.target_fpr;
    if min == max || unattainable {
        let warning = if min == max {
            "constant human scores; returning zero-FPR threshold".to_string()
        } else {
            format!(
                "only {n} human scores; no threshold achieves 0 < FPR <= {}",
                config.target_fpr
            )
        };
        return Ok(CalibratedThreshold {
            detector_id: String::new(),
            domain: String::new(),
            value: max,
            achieved_fpr: 0.0,
            converged: false,
            iterations_used: 0,
            warning: Some(warning),
        });
    }

    // Scale-aware first step that can always overshoot and start the
    // halving regime.
    let mut increment = (max - mean) / 2.0;
    if increment == 0.0 {
        increment = 1.0;
    }

    let mut threshold = mean;
    let mut direction: i8 = 0;
    let mut visited: Vec<(f64, f64)> = Vec::with_capacity(config.max_iters);
    let mut iterations_used = 0;
    for iter in 1..=config.max_iters {
        iterations_used = iter;
        let fpr = compute_fpr(human_scores, threshold)?;
        visited.push((threshold, fpr));
        if (fpr - config.target_fpr).abs() <= config.epsilon {
            return Ok(CalibratedThreshold {
                detector_id: String::new(),
                domain: String::new(),
                value: threshold,
                achieved_fpr: fpr,
                converged: true,
                iterations_used: iter,
                warning: None,
            });
        }
        // FPR above target: raise the threshold. Below: lower it. A change
        // of needed direction is an overshoot: halve and flip.
        let needed: i8 = if fpr > config.target_fpr { 1 } else { -1 };
        if direction == 0 {
            direction = needed;
        } else if direction != needed {
            increment /= 2.0;
            direction = needed;
        }
        threshold += increment * direction as f64;
    }

    // Non-convergence: closest to the target from below, else minimal FPR.
    let best = visited
        .iter()
        .filter(|(_, fpr)| *fpr < config.target_fpr)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .or_else(|| visited.iter().min_by(|a, b| a.1.total_cmp(&b.1)))
        .copied()
        .expect("at least one visited threshold");
    Ok(CalibratedThreshold {
        detector_id: String::new(),
        domain: String::new(),
        value: best.0,
        achieved_fpr: best.1,
        converged: false,
        iterations_used,
        warning: None,
    })
}

/// Exhaustive-scan oracle: the smallest observed score whose FPR is at or
/// below the target.
pub fn quantile_oracle(human_scores: &[f64], target_fpr: f64) -> f64 {
    let mut sorted = human_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // Scan candidates ascending; everything past the last duplicate of
    // sorted[i] is strictly above it.
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let above = n - (j + 1);
        if above as f64 / n as f64 <= target_fpr {
            return sorted[i];
        }
        i = j + 1;
    }
    // The maximum always gives FPR 0 under the strict rule.
    sorted[n - 1]
}

/// Reads a delimited score table (doc_id, detector_id, score), UTF-8.
pub fn load_scores(path: &std::path::Path) -> Result<Vec<ScoreRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut records = Vec::new();
    for (row, record) in reader.deserialize::<ScoreRecord>().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if !record.score.is_finite() {
            return Err(Error::Parse {
                row,
                message: format!("non-finite score for doc `{}`", record.doc_id),
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn save_scores(records: &[ScoreRecord], path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut writer = csv::Writer::from_writer(file);
    for record in records {
        writer.serialize(record).map_err(|e| Error::Parse {
            row: 0,
            message: e.to_string(),
        })?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}
