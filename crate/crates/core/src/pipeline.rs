//! End-to-end run orchestration behind the CLI commands.
//!
//! Each command is a pure-ish function over a [`RunConfig`]: it reads the
//! corpus, writes its artifacts under `output_dir`, and returns the
//! structured outcome for the caller to print. Artifacts carry no
//! timestamps, so two runs with the same configuration and master seed
//! produce byte-identical output trees.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::{apply_attack, document_seed, AttackSpec};
use crate::calibration::{
    search_threshold, CalibratedThreshold, ScoreRecord, SearchConfig,
};
use crate::config::{ReportFormat, RunConfig, Subtask};
use crate::corpus::{
    enum_str, filter_view, load_corpus, profile_corpus, save_corpus, Corpus, CorpusFormat,
    CorpusProfile, Document, Label, Predicate,
};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, rank_teams, Axis, ResultsTable, TeamRanking};
use crate::report;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn corpus_file_name(format: CorpusFormat) -> &'static str {
    match format {
        CorpusFormat::RecordLines => "attacked.jsonl",
        CorpusFormat::DelimitedTable => "attacked.csv",
    }
}

fn report_file_name(format: ReportFormat) -> &'static str {
    match format {
        ReportFormat::Delimited => "leaderboard.csv",
        ReportFormat::Aligned => "leaderboard.txt",
        ReportFormat::Markdown => "leaderboard.md",
    }
}

fn ensure_output_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Selects the corpus view for a run: subtask A drops attacked documents,
/// subtask B keeps everything, custom applies the configured filter.
pub fn subtask_view(config: &RunConfig, corpus: &Corpus) -> Result<Corpus> {
    let predicate = match config.subtask {
        Subtask::A => Predicate::subtask_a(),
        Subtask::B => Predicate::subtask_b(),
        Subtask::Custom => Predicate::parse(&config.filter)?,
    };
    Ok(filter_view(corpus, &predicate))
}

fn axis_for(subtask: Subtask) -> Axis {
    match subtask {
        // Without attacks the comparison runs across domains; with them,
        // across attacks.
        Subtask::A | Subtask::Custom => Axis::Domain,
        Subtask::B => Axis::Attack,
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ValidateOutcome {
    pub documents: usize,
    pub profile: CorpusProfile,
    pub integrity_warnings: Vec<String>,
}

pub fn run_validate(config: &RunConfig) -> Result<ValidateOutcome> {
    let corpus = load_corpus(&config.corpus, config.format)?;
    let integrity_warnings = corpus.validate()?;
    let profile = profile_corpus(&corpus);
    Ok(ValidateOutcome {
        documents: corpus.len(),
        profile,
        integrity_warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackManifestEntry {
    pub theta: f64,
    pub documents: u64,
    pub total_sites: u64,
    pub mutated_sites: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackManifest {
    pub tool_version: String,
    pub master_seed: u64,
    pub config_digest: String,
    pub attacks: BTreeMap<String, AttackManifestEntry>,
}

#[derive(Debug)]
pub struct AttackOutcome {
    pub corpus_path: PathBuf,
    pub manifest: AttackManifest,
    pub generated: usize,
    pub warnings: Vec<String>,
}

/// Generates one attacked variant per (unattacked machine document,
/// configured attack). Originals and human documents pass through.
pub fn run_attack(config: &RunConfig) -> Result<AttackOutcome> {
    if config.subtask == Subtask::A {
        return Err(Error::Config(
            "subtask A excludes adversarial attacks; nothing to generate".into(),
        ));
    }
    let corpus = load_corpus(&config.corpus, config.format)?;
    let resources = config.resources.load()?;
    let kinds = config.attacks.effective_kinds();

    let mut warnings = Vec::new();
    let targets: Vec<&Document> = corpus
        .documents
        .iter()
        .filter(|d| d.label == Label::Machine && d.attack.is_none())
        .collect();
    if targets.is_empty() {
        warnings.push("corpus has no unattacked machine documents; nothing to attack".into());
    }

    let mut manifest_entries: BTreeMap<String, AttackManifestEntry> = BTreeMap::new();
    let mut variants = Vec::with_capacity(targets.len() * kinds.len());
    for doc in &targets {
        let seed = document_seed(config.master_seed, &doc.id);
        for &kind in &kinds {
            let spec = AttackSpec::new(kind, config.attacks.theta_for(kind), seed)?;
            let result = apply_attack(&spec, &doc.text, &resources, &config.paraphrase)?;
            let entry = manifest_entries
                .entry(kind.name().to_string())
                .or_insert(AttackManifestEntry {
                    theta: spec.theta,
                    documents: 0,
                    total_sites: 0,
                    mutated_sites: 0,
                });
            entry.documents += 1;
            entry.total_sites += result.total_sites as u64;
            entry.mutated_sites += result.mutated_sites as u64;
            variants.push(Document {
                id: format!("{}__{}", doc.id, kind.name()),
                text: result.text,
                label: Label::Machine,
                model: doc.model,
                domain: doc.domain,
                decoding: doc.decoding,
                attack: Some(kind),
                source_id: doc.source_id.clone(),
                adv_source_id: doc.id.clone(),
            });
        }
    }

    let mut documents = corpus.documents.clone();
    documents.extend(variants);
    let generated = documents.len() - corpus.documents.len();
    let augmented = Corpus {
        documents,
        split: corpus.split,
        ancestor_ids: corpus.ancestor_ids.clone(),
    };
    warnings.extend(augmented.validate()?);

    ensure_output_dir(&config.output_dir)?;
    let corpus_path = config.output_dir.join(corpus_file_name(config.format));
    save_corpus(&augmented, &corpus_path, config.format)?;

    let manifest = AttackManifest {
        tool_version: TOOL_VERSION.to_string(),
        master_seed: config.master_seed,
        config_digest: config.digest(),
        attacks: manifest_entries,
    };
    let manifest_path = config.output_dir.join("attack_manifest.json");
    write_text(
        &manifest_path,
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&manifest).expect("manifest serializes")
        ),
    )?;

    Ok(AttackOutcome {
        corpus_path,
        manifest,
        generated,
        warnings,
    })
}

/// Calibrates one threshold per (detector, domain) pair from the human
/// documents of the view. Domains without human documents are skipped.
pub fn calibrate_thresholds(
    view: &Corpus,
    scores: &[ScoreRecord],
    search: &SearchConfig,
) -> Result<Vec<CalibratedThreshold>> {
    let score_of: BTreeMap<(&str, &str), f64> = scores
        .iter()
        .map(|r| ((r.detector_id.as_str(), r.doc_id.as_str()), r.score))
        .collect();
    let mut detectors: Vec<&str> = scores.iter().map(|r| r.detector_id.as_str()).collect();
    detectors.sort_unstable();
    detectors.dedup();

    let mut human_by_domain: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for doc in &view.documents {
        if doc.label == Label::Human {
            human_by_domain
                .entry(enum_str(&doc.domain))
                .or_default()
                .push(doc.id.as_str());
        }
    }

    let mut thresholds = Vec::new();
    for detector in detectors {
        for (domain, doc_ids) in &human_by_domain {
            let mut human_scores = Vec::with_capacity(doc_ids.len());
            for doc_id in doc_ids {
                let score = score_of
                    .get(&(detector, *doc_id))
                    .ok_or_else(|| Error::MissingScore((*doc_id).to_string()))?;
                human_scores.push(*score);
            }
            let mut threshold = search_threshold(&human_scores, search)?;
            threshold.detector_id = detector.to_string();
            threshold.domain = domain.clone();
            thresholds.push(threshold);
        }
    }
    Ok(thresholds)
}

#[derive(Debug, Serialize, Deserialize)]
struct ThresholdRow {
    detector_id: String,
    domain: String,
    value: f64,
    achieved_fpr: f64,
    converged: bool,
    iterations_used: usize,
    warning: String,
}

pub fn save_thresholds(thresholds: &[CalibratedThreshold], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut writer = csv::Writer::from_writer(file);
    for t in thresholds {
        let row = ThresholdRow {
            detector_id: t.detector_id.clone(),
            domain: t.domain.clone(),
            value: t.value,
            achieved_fpr: t.achieved_fpr,
            converged: t.converged,
            iterations_used: t.iterations_used,
            warning: t.warning.clone().unwrap_or_default(),
        };
        writer
            .serialize(row)
            .map_err(|e| Error::Results(e.to_string()))?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_thresholds(path: &Path) -> Result<Vec<CalibratedThreshold>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut thresholds = Vec::new();
    for record in reader.deserialize::<ThresholdRow>() {
        let row = record.map_err(|e| Error::Results(e.to_string()))?;
        thresholds.push(CalibratedThreshold {
            detector_id: row.detector_id,
            domain: row.domain,
            value: row.value,
            achieved_fpr: row.achieved_fpr,
            converged: row.converged,
            iterations_used: row.iterations_used,
            warning: if row.warning.is_empty() {
                None
            } else {
                Some(row.warning)
            },
        });
    }
    Ok(thresholds)
}

pub fn run_calibrate(config: &RunConfig) -> Result<Vec<CalibratedThreshold>> {
    let corpus = load_corpus(&config.corpus, config.format)?;
    let view = subtask_view(config, &corpus)?;
    let scores = collect_scores(config, &view)?;
    let thresholds = calibrate_thresholds(&view, &scores, &config.search)?;
    ensure_output_dir(&config.output_dir)?;
    save_thresholds(&thresholds, &config.output_dir.join("thresholds.csv"))?;
    Ok(thresholds)
}

fn collect_scores(config: &RunConfig, view: &Corpus) -> Result<Vec<ScoreRecord>> {
    if config.detectors.is_empty() {
        return Err(Error::Config("no detectors configured".into()));
    }
    let mut scores = Vec::new();
    for detector in &config.detectors {
        scores.extend(detector.get_scores(&view.documents)?);
    }
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub tool_version: String,
    pub master_seed: u64,
    pub config_digest: String,
    pub axis: Axis,
    pub totals: BTreeMap<String, f64>,
    pub sigma: BTreeMap<String, f64>,
    pub unconverged: Vec<CalibratedThreshold>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking: Option<TeamRanking>,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct EvaluateOutcome {
    pub table: ResultsTable,
    pub thresholds: Vec<CalibratedThreshold>,
    pub results: RunResults,
}

pub fn run_evaluate(config: &RunConfig) -> Result<EvaluateOutcome> {
    let corpus = load_corpus(&config.corpus, config.format)?;
    let mut warnings = corpus.validate()?;
    let view = subtask_view(config, &corpus)?;
    if view.is_empty() {
        return Err(Error::Config("the configured view selects no documents".into()));
    }
    let scores = collect_scores(config, &view)?;
    let thresholds = calibrate_thresholds(&view, &scores, &config.search)?;
    let axis = axis_for(config.subtask);
    let table = evaluate(&view, &scores, &thresholds, axis)?;

    let ranking = if config.teams.is_empty() {
        None
    } else {
        Some(rank_teams(&table.summaries(), &config.teams)?)
    };
    let unconverged: Vec<CalibratedThreshold> = thresholds
        .iter()
        .filter(|t| !t.converged)
        .cloned()
        .collect();
    for t in &unconverged {
        warnings.push(match &t.warning {
            Some(w) => format!(
                "{}/{}: calibration did not converge: {w}",
                t.detector_id, t.domain
            ),
            None => format!(
                "{}/{}: calibration stopped at FPR {:.4} after {} iterations",
                t.detector_id, t.domain, t.achieved_fpr, t.iterations_used
            ),
        });
    }

    let results = RunResults {
        tool_version: TOOL_VERSION.to_string(),
        master_seed: config.master_seed,
        config_digest: config.digest(),
        axis,
        totals: table.totals.clone(),
        sigma: table.sigma.clone(),
        unconverged,
        ranking,
        warnings,
    };

    ensure_output_dir(&config.output_dir)?;
    save_thresholds(&thresholds, &config.output_dir.join("thresholds.csv"))?;
    report::save_cells(&table, &config.output_dir.join("cells.csv"))?;
    write_text(
        &config.output_dir.join("results.json"),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&results).expect("results serialize")
        ),
    )?;
    for &format in &config.report_formats {
        let rendered = report::render(&table, format, results.ranking.as_ref());
        write_text(&config.output_dir.join(report_file_name(format)), &rendered)?;
    }

    Ok(EvaluateOutcome {
        table,
        thresholds,
        results,
    })
}

/// Re-renders a previously written cells file.
pub fn run_report(config: &RunConfig, cells_path: &Path) -> Result<Vec<PathBuf>> {
    let table = report::load_cells(cells_path)?;
    ensure_output_dir(&config.output_dir)?;
    let mut written = Vec::new();
    for &format in &config.report_formats {
        let rendered = report::render(&table, format, None);
        let path = config.output_dir.join(report_file_name(format));
        write_text(&path, &rendered)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::ScoreRecord;
    use crate::corpus::tests_support::{human_doc, machine_doc};
    use crate::corpus::{Domain, Split};

    fn separable_scores(view: &Corpus, detector: &str) -> Vec<ScoreRecord> {
        view.documents
            .iter()
            .map(|d| ScoreRecord {
                doc_id: d.id.clone(),
                detector_id: detector.to_string(),
                score: match d.label {
                    Label::Human => 0.05,
                    Label::Machine => 0.95,
                },
            })
            .collect()
    }

    #[test]
    fn calibrate_skips_domains_without_humans() {
        let view = Corpus::new(
            vec![
                human_doc("h1", Domain::News),
                machine_doc("m1", "h1", Domain::News),
            ],
            Split::Custom,
        );
        let scores = separable_scores(&view, "det");
        let thresholds =
            calibrate_thresholds(&view, &scores, &SearchConfig::default()).unwrap();
        assert_eq!(thresholds.len(), 1);
        assert_eq!(thresholds[0].domain, "news");
        // One human score is a degenerate sample: zero-FPR fallback.
        assert!(!thresholds[0].converged);
        assert_eq!(thresholds[0].achieved_fpr, 0.0);
    }

    #[test]
    fn thresholds_roundtrip() {
        let thresholds = vec![CalibratedThreshold {
            detector_id: "det".into(),
            domain: "news".into(),
            value: 0.5,
            achieved_fpr: 0.05,
            converged: true,
            iterations_used: 3,
            warning: None,
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        save_thresholds(&thresholds, &path).unwrap();
        assert_eq!(load_thresholds(&path).unwrap(), thresholds);
    }

    #[test]
    fn missing_score_for_human_doc_is_error() {
        let view = Corpus::new(vec![human_doc("h1", Domain::News)], Split::Custom);
        let scores = vec![ScoreRecord {
            doc_id: "other".into(),
            detector_id: "det".into(),
            score: 0.3,
        }];
        let err = calibrate_thresholds(&view, &scores, &SearchConfig::default()).unwrap_err();
        assert!(matches!(err, Error::MissingScore(id) if id == "h1"));
    }
}
