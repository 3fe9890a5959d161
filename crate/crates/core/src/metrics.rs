//! TPR computation per evaluation cell, stratified aggregation, and team
//! rankings.
//!
//! Every machine document is judged against its own domain's calibrated
//! threshold; cells group documents along the comparison axis (domains or
//! attacks). Per-detector totals are the arithmetic mean of per-cell TPRs
//! and the robustness figure is the population standard deviation across
//! the axis. Values stay at full precision internally; rounding happens
//! only when rendering.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::calibration::{CalibratedThreshold, ScoreRecord};
use crate::corpus::{enum_str, Corpus, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Domain,
    Attack,
}

/// One stratum of the comparison; unset components are wildcards.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoding: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub detector_id: String,
    pub strata: Strata,
    /// True-positive rate in [0, 1].
    pub tpr: f64,
    /// Number of machine documents in the cell.
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub axis: Axis,
    pub cells: Vec<EvalCell>,
    /// Per-detector mean of per-cell TPRs.
    pub totals: BTreeMap<String, f64>,
    /// Per-detector population standard deviation across the axis.
    pub sigma: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionSummary {
    pub submission_id: String,
    pub total: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTeam {
    pub team_id: String,
    pub best_submission_id: String,
    pub total: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamRanking {
    pub teams: Vec<RankedTeam>,
}

/// Fraction of machine scores strictly greater than the threshold. Same
/// boundary rule as the FPR computation.
pub fn tpr(machine_scores: &[f64], threshold: f64) -> Result<f64> {
    if machine_scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let hits = machine_scores.iter().filter(|&&s| s > threshold).count();
    Ok(hits as f64 / machine_scores.len() as f64)
}

/// Mean and population standard deviation (divide by N, not N-1).
pub fn aggregate(cells: &[f64]) -> (f64, f64) {
    if cells.is_empty() {
        return (0.0, 0.0);
    }
    let n = cells.len() as f64;
    let mean = cells.iter().sum::<f64>() / n;
    let variance = cells.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
    (mean, variance.sqrt())
}

pub fn evaluate(
    corpus_view: &Corpus,
    scores: &[ScoreRecord],
    thresholds: &[CalibratedThreshold],
    axis: Axis,
) -> Result<ResultsTable> {
    let score_of: HashMap<(&str, &str), f64> = scores
        .iter()
        .map(|r| ((r.detector_id.as_str(), r.doc_id.as_str()), r.score))
        .collect();
    let threshold_of: HashMap<(&str, &str), f64> = thresholds
        .iter()
        .map(|t| ((t.detector_id.as_str(), t.domain.as_str()), t.value))
        .collect();
    let mut detectors: Vec<&str> = scores.iter().map(|r| r.detector_id.as_str()).collect();
    detectors.sort_unstable();
    detectors.dedup();

    let mut cells = Vec::new();
    let mut totals = BTreeMap::new();
    let mut sigma = BTreeMap::new();
    for detector in detectors {
        // (axis value) -> (hits, support)
        let mut groups: BTreeMap<String, (u64, u64)> = BTreeMap::new();
        for doc in &corpus_view.documents {
            if doc.label != Label::Machine {
                continue;
            }
            let score = *score_of
                .get(&(detector, doc.id.as_str()))
                .ok_or_else(|| Error::MissingScore(doc.id.clone()))?;
            let domain = enum_str(&doc.domain);
            let threshold = *threshold_of
                .get(&(detector, domain.as_str()))
                .ok_or_else(|| Error::MissingThreshold {
                    detector: detector.to_string(),
                    domain: domain.clone(),
                })?;
            let key = match axis {
                Axis::Domain => domain,
                Axis::Attack => doc.attack.map_or("none".to_string(), |k| k.name().to_string()),
            };
            let entry = groups.entry(key).or_insert((0, 0));
            entry.1 += 1;
            if score > threshold {
                entry.0 += 1;
            }
        }
        // Cells with zero machine documents never materialize: groups only
        // hold observed axis values.
        let mut cell_tprs = Vec::with_capacity(groups.len());
        for (value, (hits, support)) in groups {
            let tpr = hits as f64 / support as f64;
            cell_tprs.push(tpr);
            let strata = match axis {
                Axis::Domain => Strata {
                    domain: Some(value),
                    ..Default::default()
                },
                Axis::Attack => Strata {
                    attack: Some(value),
                    ..Default::default()
                },
            };
            cells.push(EvalCell {
                detector_id: detector.to_string(),
                strata,
                tpr,
                support,
            });
        }
        let (mean, std) = aggregate(&cell_tprs);
        totals.insert(detector.to_string(), mean);
        sigma.insert(detector.to_string(), std);
    }
    Ok(ResultsTable {
        axis,
        cells,
        totals,
        sigma,
    })
}

impl ResultsTable {
    pub fn summary(&self, detector_id: &str) -> Option<SubmissionSummary> {
        Some(SubmissionSummary {
            submission_id: detector_id.to_string(),
            total: *self.totals.get(detector_id)?,
            sigma: *self.sigma.get(detector_id)?,
        })
    }

    pub fn summaries(&self) -> Vec<SubmissionSummary> {
        self.totals
            .keys()
            .filter_map(|d| self.summary(d))
            .collect()
    }
}

/// Ranks teams by their best submission: total descending, ties broken by
/// lower sigma, then by team id for determinism.
pub fn rank_teams(
    submissions: &[SubmissionSummary],
    team_of: &BTreeMap<String, String>,
) -> Result<TeamRanking> {
    let mut best: BTreeMap<&str, &SubmissionSummary> = BTreeMap::new();
    for submission in submissions {
        let team = team_of
            .get(&submission.submission_id)
            .ok_or_else(|| Error::UnmappedSubmission(submission.submission_id.clone()))?;
        let slot = best.entry(team.as_str()).or_insert(submission);
        if submission.total > slot.total
            || (submission.total == slot.total && submission.sigma < slot.sigma)
        {
            *slot = submission;
        }
    }
    let mut teams: Vec<RankedTeam> = best
        .into_iter()
        .map(|(team, s)| RankedTeam {
            team_id: team.to_string(),
            best_submission_id: s.submission_id.clone(),
            total: s.total,
            sigma: s.sigma,
        })
        .collect();
    teams.sort_by(|a, b| {
        b.total
            .total_cmp(&a.total)
            .then(a.sigma.total_cmp(&b.sigma))
            .then(a.team_id.cmp(&b.team_id))
    });
    Ok(TeamRanking { teams })
}
