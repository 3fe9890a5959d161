//! Results rendering and cell-file round-tripping.
//!
//! Three output formats: `delimited` (the cells CSV, parseable back into
//! a `ResultsTable`), `aligned` (fixed-width leaderboard, per-column
//! maxima starred), and `markdown` (pipe table, per-column maxima bold).
//! Every rendering carries an "Average Performance" footer row; a team
//! ranking appendix is appended when a ranking is supplied. TPR values
//! render as percentages with one decimal; stored cells keep full
//! precision fractions.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ReportFormat;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, Axis, EvalCell, ResultsTable, Strata, TeamRanking};

#[derive(Debug, Serialize, Deserialize)]
struct CellRow {
    detector_id: String,
    domain: String,
    model: String,
    decoding: String,
    attack: String,
    tpr: f64,
    support: u64,
}

impl From<&EvalCell> for CellRow {
    fn from(cell: &EvalCell) -> Self {
        CellRow {
            detector_id: cell.detector_id.clone(),
            domain: cell.strata.domain.clone().unwrap_or_default(),
            model: cell.strata.model.clone().unwrap_or_default(),
            decoding: cell.strata.decoding.clone().unwrap_or_default(),
            attack: cell.strata.attack.clone().unwrap_or_default(),
            tpr: cell.tpr,
            support: cell.support,
        }
    }
}

fn opt(s: String) -> Option<String> {
    if s.is_empty() {
        None
    } else {
        Some(s)
    }
}

pub fn save_cells(table: &ResultsTable, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut writer = csv::Writer::from_writer(file);
    for cell in &table.cells {
        writer
            .serialize(CellRow::from(cell))
            .map_err(|e| Error::Results(e.to_string()))?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a cells CSV and rebuilds the table, recomputing totals and sigma
/// from the cells.
pub fn load_cells(path: &Path) -> Result<ResultsTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut cells = Vec::new();
    for record in reader.deserialize::<CellRow>() {
        let row = record.map_err(|e| Error::Results(e.to_string()))?;
        cells.push(EvalCell {
            detector_id: row.detector_id,
            strata: Strata {
                domain: opt(row.domain),
                model: opt(row.model),
                decoding: opt(row.decoding),
                attack: opt(row.attack),
            },
            tpr: row.tpr,
            support: row.support,
        });
    }
    let axis = if cells.iter().any(|c| c.strata.attack.is_some()) {
        Axis::Attack
    } else {
        Axis::Domain
    };
    Ok(rebuild_table(cells, axis))
}

/// Recomputes per-detector totals and sigma from the cells.
pub fn rebuild_table(cells: Vec<EvalCell>, axis: Axis) -> ResultsTable {
    let mut totals = std::collections::BTreeMap::new();
    let mut sigma = std::collections::BTreeMap::new();
    let detectors: BTreeSet<String> = cells.iter().map(|c| c.detector_id.clone()).collect();
    for detector in detectors {
        let tprs: Vec<f64> = cells
            .iter()
            .filter(|c| c.detector_id == detector)
            .map(|c| c.tpr)
            .collect();
        let (mean, std) = aggregate(&tprs);
        totals.insert(detector.clone(), mean);
        sigma.insert(detector, std);
    }
    ResultsTable {
        axis,
        cells,
        totals,
        sigma,
    }
}

fn axis_value(cell: &EvalCell, axis: Axis) -> String {
    match axis {
        Axis::Domain => cell.strata.domain.clone().unwrap_or_default(),
        Axis::Attack => cell.strata.attack.clone().unwrap_or_default(),
    }
}

fn pct(fraction: f64) -> String {
    format!("{:.1}", fraction * 100.0)
}

pub fn render(table: &ResultsTable, format: ReportFormat, ranking: Option<&TeamRanking>) -> String {
    match format {
        ReportFormat::Delimited => render_delimited(table),
        ReportFormat::Aligned => render_grid(table, ranking, false),
        ReportFormat::Markdown => render_grid(table, ranking, true),
    }
}

fn render_delimited(table: &ResultsTable) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for cell in &table.cells {
        writer.serialize(CellRow::from(cell)).expect("cell serializes");
    }
    String::from_utf8(writer.into_inner().expect("csv buffer")).expect("utf-8 csv")
}

fn render_grid(table: &ResultsTable, ranking: Option<&TeamRanking>, markdown: bool) -> String {
    let columns: BTreeSet<String> = table
        .cells
        .iter()
        .map(|c| axis_value(c, table.axis))
        .collect();
    let columns: Vec<String> = columns.into_iter().collect();
    let detectors: Vec<&String> = table.totals.keys().collect();

    if table.cells.is_empty() {
        let mut out = String::from("no cells\n");
        if let Some(ranking) = ranking {
            out.push_str(&render_ranking(ranking));
        }
        return out;
    }

    let lookup = |detector: &str, column: &str| -> Option<f64> {
        table
            .cells
            .iter()
            .find(|c| c.detector_id == detector && axis_value(c, table.axis) == *column)
            .map(|c| c.tpr)
    };
    // Per-column maxima, for bolding.
    let max_of: Vec<Option<f64>> = columns
        .iter()
        .map(|col| {
            detectors
                .iter()
                .filter_map(|d| lookup(d, col))
                .max_by(f64::total_cmp)
        })
        .collect();

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["Detector".to_string()];
    header.extend(columns.iter().cloned());
    header.push("Total (σ)".to_string());
    rows.push(header);

    for detector in &detectors {
        let mut row = vec![(*detector).clone()];
        for (ci, column) in columns.iter().enumerate() {
            match lookup(detector, column) {
                Some(tpr) => {
                    let is_max = max_of[ci].map_or(false, |m| tpr == m);
                    let text = pct(tpr);
                    row.push(match (is_max, markdown) {
                        (true, true) => format!("**{text}**"),
                        (true, false) => format!("*{text}"),
                        (false, _) => text,
                    });
                }
                None => row.push("-".to_string()),
            }
        }
        row.push(format!(
            "{} ({})",
            pct(table.totals[*detector]),
            pct(table.sigma[*detector])
        ));
        rows.push(row);
    }

    // Average Performance footer: per-column mean over detectors, plus the
    // aggregate of those column means.
    let mut footer = vec!["Average Performance".to_string()];
    let mut column_means = Vec::new();
    for column in &columns {
        let values: Vec<f64> = detectors.iter().filter_map(|d| lookup(d, column)).collect();
        let (mean, _) = aggregate(&values);
        column_means.push(mean);
        footer.push(pct(mean));
    }
    let (grand_mean, grand_sigma) = aggregate(&column_means);
    footer.push(format!("{} ({})", pct(grand_mean), pct(grand_sigma)));
    rows.push(footer);

    let mut out = if markdown {
        render_markdown_rows(&rows)
    } else {
        render_aligned_rows(&rows)
    };
    if let Some(ranking) = ranking {
        out.push('\n');
        out.push_str(&render_ranking(ranking));
    }
    out
}

fn render_aligned_rows(rows: &[Vec<String>]) -> String {
    let width_count = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0usize; width_count];
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for (ri, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, cell)| {
                if i == 0 {
                    format!("{:<width$}", cell, width = widths[i])
                } else {
                    format!("{:>width$}", cell, width = widths[i])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if ri == 0 {
            let rule_len = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            out.push_str(&"-".repeat(rule_len));
            out.push('\n');
        }
    }
    out
}

fn render_markdown_rows(rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    for (ri, row) in rows.iter().enumerate() {
        out.push_str("| ");
        out.push_str(&row.join(" | "));
        out.push_str(" |\n");
        if ri == 0 {
            out.push_str("|");
            out.push_str(&"---|".repeat(row.len()));
            out.push('\n');
        }
    }
    out
}

fn render_ranking(ranking: &TeamRanking) -> String {
    let mut out = String::from("Team Ranking (by best submission)\n");
    for (i, team) in ranking.teams.iter().enumerate() {
        out.push_str(&format!(
            "{}. {} — {} — {} ({})\n",
            i + 1,
            team.team_id,
            team.best_submission_id,
            pct(team.total),
            pct(team.sigma)
        ));
    }
    out
}
