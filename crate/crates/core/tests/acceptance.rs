//! Acceptance gate: one pass/fail line per criterion. Run with
//! `cargo test --test acceptance -- --nocapture`.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::Deserialize;

use mgtd_eval::attack::{apply_attack, budget, normalize, AttackKind, AttackSpec, ParaphraseProvider, ResourceSet};
use mgtd_eval::calibration::{quantile_oracle, search_threshold, SearchConfig};
use mgtd_eval::config::{AttackConfig, ReportFormat, ResourcePaths, RunConfig, Subtask};
use mgtd_eval::corpus::{save_corpus, Corpus, CorpusFormat, Decoding, Document, Domain, Label, Model, Split};
use mgtd_eval::detector::{DetectorHandle, DetectorKind};
use mgtd_eval::metrics::{aggregate, rank_teams, SubmissionSummary};
use mgtd_eval::pipeline;

#[derive(Deserialize)]
struct FixtureRow {
    submission: String,
    team: String,
    cells: Vec<f64>,
    total: f64,
    sigma: f64,
}

#[derive(Deserialize)]
struct RankEntry {
    team: String,
    submission: String,
}

#[derive(Deserialize)]
struct Fixture {
    columns: Vec<String>,
    rows: Vec<FixtureRow>,
    footer: Vec<f64>,
    footer_total: f64,
    footer_sigma: f64,
    ranking: Vec<RankEntry>,
}

fn load_fixture(name: &str) -> Fixture {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    let raw = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("read {path}: {e}"));
    serde_json::from_str(&raw).unwrap_or_else(|e| panic!("parse {path}: {e}"))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol + 1e-9
}

/// Published aggregation fixtures reproduce within ±0.05.
fn criterion_aggregation() -> Result<(), String> {
    let domains = load_fixture("published_domains.json");
    let attacks = load_fixture("published_attacks.json");

    let binoculars_domains = domains
        .rows
        .iter()
        .find(|r| r.submission == "Binoculars")
        .ok_or("Binoculars row missing from domain fixture")?;
    let (total, sigma) = aggregate(&binoculars_domains.cells);
    if !close(total, 79.0, 0.05) || !close(sigma, 2.4, 0.05) {
        return Err(format!("Binoculars domain row: got {total:.3} ({sigma:.3})"));
    }

    let binoculars_attacks = attacks
        .rows
        .iter()
        .find(|r| r.submission == "Binoculars")
        .ok_or("Binoculars row missing from attack fixture")?;
    let (total, sigma) = aggregate(&binoculars_attacks.cells);
    if !close(total, 71.3, 0.05) || !close(sigma, 16.2, 0.05) {
        return Err(format!("Binoculars attack row: got {total:.3} ({sigma:.3})"));
    }

    // Per-domain footer: per-column mean over all submissions.
    for (i, column) in domains.columns.iter().enumerate() {
        let values: Vec<f64> = domains.rows.iter().map(|r| r.cells[i]).collect();
        let (mean, _) = aggregate(&values);
        if !close(mean, domains.footer[i], 0.05) {
            return Err(format!(
                "footer column {column}: got {mean:.3}, published {}",
                domains.footer[i]
            ));
        }
    }
    // The published footer total aggregates the footer row itself.
    let (footer_total, footer_sigma) = aggregate(&domains.footer);
    if !close(footer_total, domains.footer_total, 0.05)
        || !close(footer_sigma, domains.footer_sigma, 0.05)
    {
        return Err(format!(
            "footer total: got {footer_total:.3} ({footer_sigma:.3})"
        ));
    }
    Ok(())
}

/// Published team orderings reproduce exactly, including the tie broken
/// by sigma.
fn criterion_ranking() -> Result<(), String> {
    for name in ["published_domains.json", "published_attacks.json"] {
        let fixture = load_fixture(name);
        let submissions: Vec<SubmissionSummary> = fixture
            .rows
            .iter()
            .map(|r| SubmissionSummary {
                submission_id: r.submission.clone(),
                total: r.total,
                sigma: r.sigma,
            })
            .collect();
        let team_of: BTreeMap<String, String> = fixture
            .rows
            .iter()
            .map(|r| (r.submission.clone(), r.team.clone()))
            .collect();
        let ranking = rank_teams(&submissions, &team_of).map_err(|e| e.to_string())?;
        if ranking.teams.len() != fixture.ranking.len() {
            return Err(format!(
                "{name}: {} teams ranked, expected {}",
                ranking.teams.len(),
                fixture.ranking.len()
            ));
        }
        for (got, want) in ranking.teams.iter().zip(&fixture.ranking) {
            if got.team_id != want.team || got.best_submission_id != want.submission {
                return Err(format!(
                    "{name}: got {} ({}), expected {} ({})",
                    got.team_id, got.best_submission_id, want.team, want.submission
                ));
            }
        }
    }
    Ok(())
}

/// Threshold search converges for >=95% of seeded score sets and always
/// agrees with the quantile oracle to within 0.02 TPR.
fn criterion_threshold_oracle() -> Result<(), String> {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0003);
    let config = SearchConfig::default();
    let cases = 1_000;
    let mut converged = 0usize;
    for case in 0..cases {
        let n = rng.gen_range(100..=10_000);
        let dist = case % 3;
        let draw = |rng: &mut ChaCha20Rng| -> f64 {
            match dist {
                0 => Normal::new(0.0, 1.0).unwrap().sample(rng),
                1 => Uniform::new(0.0, 1.0).sample(rng),
                _ => {
                    let mode = if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
                    Normal::new(mode, 0.5).unwrap().sample(rng)
                }
            }
        };
        let shift = if dist == 1 { 1.0 } else { 4.0 };
        let humans: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let machines: Vec<f64> = (0..1_000).map(|_| draw(&mut rng) + shift).collect();

        let result = search_threshold(&humans, &config).map_err(|e| e.to_string())?;
        if result.converged && result.iterations_used <= config.max_iters {
            converged += 1;
        }
        let oracle = quantile_oracle(&humans, config.target_fpr);
        let tpr_at = |t: f64| {
            machines.iter().filter(|&&m| m > t).count() as f64 / machines.len() as f64
        };
        let diff = (tpr_at(result.value) - tpr_at(oracle)).abs();
        if diff > 0.02 {
            return Err(format!(
                "case {case} (n={n}, dist={dist}): TPR differs from oracle by {diff:.4}"
            ));
        }
    }
    let rate = converged as f64 / cases as f64;
    if rate < 0.95 {
        return Err(format!("convergence rate {rate:.3} < 0.95"));
    }
    let elapsed = start.elapsed();
    if elapsed.as_secs() >= 60 {
        return Err(format!("sweep took {elapsed:?}, budget is 60s"));
    }
    Ok(())
}

fn random_text(rng: &mut ChaCha20Rng) -> String {
    const WORDS: [&str; 24] = [
        "the", "a", "an", "colour", "centre", "until", "really", "happy", "big", "quickly",
        "cat", "dog", "house", "water", "story", "paid", "apple", "forest", "winter", "model",
        "number", "line", "garden", "music",
    ];
    let sentences = rng.gen_range(2..=5);
    let mut text = String::new();
    for s in 0..sentences {
        if s > 0 {
            text.push(' ');
        }
        let words = rng.gen_range(4..=12);
        for w in 0..words {
            if w > 0 {
                text.push(' ');
            }
            if rng.gen_bool(0.15) {
                text.push_str(&rng.gen_range(0..10_000u32).to_string());
            } else {
                let word = WORDS[rng.gen_range(0..WORDS.len())];
                if w == 0 {
                    let mut chars = word.chars();
                    let first = chars.next().unwrap().to_uppercase().to_string();
                    text.push_str(&first);
                    text.push_str(chars.as_str());
                } else {
                    text.push_str(word);
                }
            }
        }
        text.push('.');
    }
    text
}

/// mutated_sites == budget(theta, total_sites) for every attack and every
/// document, at the default theta and at 0, 0.33, 1.0.
fn criterion_budget_exactness() -> Result<(), String> {
    let resources = ResourceSet::builtin();
    let provider = ParaphraseProvider::default();
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0004);
    let texts: Vec<String> = (0..1_000).map(|_| random_text(&mut rng)).collect();
    for kind in AttackKind::ALL {
        for theta in [kind.default_theta(), 0.0, 0.33, 1.0] {
            for (i, text) in texts.iter().enumerate() {
                let spec = AttackSpec::new(kind, theta, i as u64).map_err(|e| e.to_string())?;
                let result =
                    apply_attack(&spec, text, &resources, &provider).map_err(|e| e.to_string())?;
                let expected = budget(theta, result.total_sites);
                if result.mutated_sites != expected {
                    return Err(format!(
                        "{kind} theta={theta} doc {i}: mutated {} sites, budget says {expected} \
                         (surface {})",
                        result.mutated_sites, result.total_sites
                    ));
                }
            }
        }
    }
    Ok(())
}

/// normalize(attack(text)) == normalize(text) for the reversible attacks;
/// article_deletion and number_swap survive normalization.
fn criterion_normalization_roundtrip() -> Result<(), String> {
    let resources = ResourceSet::builtin();
    let provider = ParaphraseProvider::default();
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0005);
    let reversible = [
        AttackKind::ZeroWidthSpace,
        AttackKind::Homoglyph,
        AttackKind::Whitespace,
        AttackKind::InsertParagraphs,
    ];
    for i in 0..10_000u64 {
        let text = random_text(&mut rng);
        let baseline = normalize(&text, &resources);
        for kind in reversible {
            let spec = AttackSpec::with_default_theta(kind, i);
            let attacked =
                apply_attack(&spec, &text, &resources, &provider).map_err(|e| e.to_string())?;
            let recovered = normalize(&attacked.text, &resources);
            if recovered != baseline {
                return Err(format!(
                    "{kind} doc {i}: normalize did not undo the attack\n text: {text:?}\n \
                     attacked: {:?}\n recovered: {recovered:?}\n baseline: {baseline:?}",
                    attacked.text
                ));
            }
        }
        for kind in [AttackKind::ArticleDeletion, AttackKind::NumberSwap] {
            let spec = AttackSpec::with_default_theta(kind, i);
            let attacked =
                apply_attack(&spec, &text, &resources, &provider).map_err(|e| e.to_string())?;
            if attacked.mutated_sites >= 1
                && normalize(&attacked.text, &resources) == baseline
            {
                return Err(format!(
                    "{kind} doc {i}: normalization recovered a destructive attack\n text: {text:?}"
                ));
            }
        }
    }
    Ok(())
}

fn build_corpus(rng: &mut ChaCha20Rng, humans_per_domain: usize, domains: &[Domain]) -> Corpus {
    let mut documents = Vec::new();
    for &domain in domains {
        let tag = format!("{domain:?}").to_lowercase();
        for h in 0..humans_per_domain {
            let human_id = format!("{tag}-h{h}");
            documents.push(Document {
                id: human_id.clone(),
                text: random_text(rng),
                label: Label::Human,
                model: Model::Human,
                domain,
                decoding: Decoding::None,
                attack: None,
                source_id: String::new(),
                adv_source_id: String::new(),
            });
            for (m, decoding) in [
                Decoding::Greedy,
                Decoding::Sampling,
                Decoding::GreedyRepPenalty,
                Decoding::SamplingRepPenalty,
            ]
            .into_iter()
            .enumerate()
            {
                documents.push(Document {
                    id: format!("{tag}-h{h}-m{m}"),
                    text: random_text(rng),
                    label: Label::Machine,
                    model: Model::Gpt2,
                    domain,
                    decoding,
                    attack: None,
                    source_id: human_id.clone(),
                    adv_source_id: String::new(),
                });
            }
        }
    }
    Corpus::new(documents, Split::Custom)
}

fn snapshot_tree(dir: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        for entry in std::fs::read_dir(&current).expect("read output dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                files.insert(rel, std::fs::read(&path).expect("read artifact"));
            }
        }
    }
    files
}

/// Two full attack -> calibrate -> evaluate -> report runs with the same
/// master seed produce byte-identical output trees.
fn criterion_determinism() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0006);
    let corpus = build_corpus(&mut rng, 25, &[Domain::News, Domain::Poetry]);
    let corpus_path = dir.path().join("corpus.jsonl");
    save_corpus(&corpus, &corpus_path, CorpusFormat::RecordLines).map_err(|e| e.to_string())?;

    let attack_out = dir.path().join("attack_out");
    let eval_out = dir.path().join("eval_out");
    let run_once = || -> Result<(), String> {
        let attack_config = RunConfig {
            corpus: corpus_path.clone(),
            format: CorpusFormat::RecordLines,
            subtask: Subtask::B,
            filter: vec![],
            master_seed: 20_250_823,
            output_dir: attack_out.clone(),
            report_formats: vec![ReportFormat::Delimited, ReportFormat::Aligned, ReportFormat::Markdown],
            search: SearchConfig::default(),
            attacks: AttackConfig::default(),
            resources: ResourcePaths::default(),
            paraphrase: ParaphraseProvider::default(),
            detectors: vec![],
            teams: BTreeMap::new(),
        };
        pipeline::run_attack(&attack_config).map_err(|e| e.to_string())?;

        let eval_config = RunConfig {
            corpus: attack_out.join("attacked.jsonl"),
            output_dir: eval_out.clone(),
            detectors: vec![DetectorHandle {
                detector_id: "builtin".into(),
                kind: DetectorKind::BuiltinFrequency { table_path: None },
            }],
            ..attack_config
        };
        let outcome = pipeline::run_evaluate(&eval_config).map_err(|e| e.to_string())?;
        pipeline::run_report(&eval_config, &eval_out.join("cells.csv"))
            .map_err(|e| e.to_string())?;
        drop(outcome);
        Ok(())
    };

    run_once()?;
    let first_attack = snapshot_tree(&attack_out);
    let first_eval = snapshot_tree(&eval_out);
    run_once()?;
    let second_attack = snapshot_tree(&attack_out);
    let second_eval = snapshot_tree(&eval_out);

    for (label, first, second) in [
        ("attack", &first_attack, &second_attack),
        ("evaluate", &first_eval, &second_eval),
    ] {
        if first.keys().collect::<Vec<_>>() != second.keys().collect::<Vec<_>>() {
            return Err(format!("{label}: file sets differ between runs"));
        }
        for (name, bytes) in first {
            if second[name] != *bytes {
                return Err(format!("{label}: `{name}` differs between runs"));
            }
        }
    }
    Ok(())
}

/// Fully separable scores: every cell at TPR 100.0 with per-domain FPR
/// within the target, 10,000 documents in under a minute.
fn criterion_end_to_end() -> Result<(), String> {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0007);
    // 2 domains x (1,000 humans + 4,000 machine docs) = 10,000 documents.
    let corpus = build_corpus(&mut rng, 1_000, &[Domain::News, Domain::Wiki]);
    assert_eq!(corpus.len(), 10_000);
    let corpus_path = dir.path().join("corpus.jsonl");
    save_corpus(&corpus, &corpus_path, CorpusFormat::RecordLines).map_err(|e| e.to_string())?;

    let mut scores_csv = String::from("doc_id,detector_id,score\n");
    for doc in &corpus.documents {
        let score = match doc.label {
            Label::Human => rng.gen_range(0.0..0.1),
            Label::Machine => rng.gen_range(0.9..1.0),
        };
        scores_csv.push_str(&format!("{},passthrough,{score}\n", doc.id));
    }
    let scores_path = dir.path().join("scores.csv");
    std::fs::write(&scores_path, scores_csv).map_err(|e| e.to_string())?;

    let config = RunConfig {
        corpus: corpus_path,
        format: CorpusFormat::RecordLines,
        subtask: Subtask::B,
        filter: vec![],
        master_seed: 7,
        output_dir: dir.path().join("out"),
        report_formats: vec![ReportFormat::Aligned],
        search: SearchConfig::default(),
        attacks: AttackConfig::default(),
        resources: ResourcePaths::default(),
        paraphrase: ParaphraseProvider::default(),
        detectors: vec![DetectorHandle {
            detector_id: "passthrough".into(),
            kind: DetectorKind::ScoresFile { path: scores_path },
        }],
        teams: BTreeMap::new(),
    };
    let outcome = pipeline::run_evaluate(&config).map_err(|e| e.to_string())?;
    for cell in &outcome.table.cells {
        if cell.tpr != 1.0 {
            return Err(format!("cell {:?}: TPR {} != 1.0", cell.strata, cell.tpr));
        }
    }
    for threshold in &outcome.thresholds {
        if threshold.achieved_fpr > config.search.target_fpr + config.search.epsilon {
            return Err(format!(
                "{}/{}: achieved FPR {} above target",
                threshold.detector_id, threshold.domain, threshold.achieved_fpr
            ));
        }
    }
    let elapsed = start.elapsed();
    if elapsed.as_secs() >= 60 {
        return Err(format!("run took {elapsed:?}, budget is 60s"));
    }
    Ok(())
}

#[test]
fn acceptance() {
    let criteria: Vec<(&str, fn() -> Result<(), String>)> = vec![
        ("1 aggregation fixtures reproduce published totals", criterion_aggregation),
        ("2 team rankings reproduce published order", criterion_ranking),
        ("3 threshold search matches quantile oracle", criterion_threshold_oracle),
        ("4 attack budgets are exact", criterion_budget_exactness),
        ("5 normalization round-trips reversible attacks", criterion_normalization_roundtrip),
        ("6 pipeline runs are byte-identical", criterion_determinism),
        ("7 separable corpus evaluates end to end", criterion_end_to_end),
    ];
    let mut failures = Vec::new();
    for (name, run) in criteria {
        match run() {
            Ok(()) => println!("PASS criterion {name}"),
            Err(reason) => {
                println!("FAIL criterion {name}: {reason}");
                failures.push(name);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
