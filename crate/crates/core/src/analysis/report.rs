//! CSV, JSON and SVG renderings of analysis results.
//!
//! Every renderer is a pure function of its input, so identical inputs give
//! byte-identical output.

use std::fmt::Write as _;

use serde::Serialize;

use super::{BiasReport, ErrorReport, GroupBias, MapReport, MatchupGrid};
use crate::electoral::ECDistribution;

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

fn csv_text(rows: Vec<Vec<String>>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// `k,probability` rows for `k = 0..=E`.
pub fn pmf_csv(dist: &ECDistribution) -> String {
    let mut out = String::from("k,probability\n");
    for (k, p) in dist.pmf().iter().enumerate() {
        let _ = writeln!(out, "{k},{p}");
    }
    out
}

/// Long-format error table with `Average Error` and `Standard Deviation` rows.
pub fn error_csv(report: &ErrorReport) -> String {
    let mut rows = vec![["state", "candidate", "predicted", "actual", "error"].map(String::from).to_vec()];
    for (state, e) in &report.per_state {
        for (name, predicted, actual, error) in [
            (&report.c1, e.predicted_c1, e.actual_c1, e.error_c1),
            (&report.c2, e.predicted_c2, e.actual_c2, e.error_c2),
        ] {
            rows.push(vec![
                state.clone(),
                name.clone(),
                predicted.to_string(),
                actual.to_string(),
                error.to_string(),
            ]);
        }
    }
    for (label, v1, v2) in [
        ("Average Error", report.mean_c1, report.mean_c2),
        ("Standard Deviation", report.stddev_c1, report.stddev_c2),
    ] {
        rows.push(vec![label.into(), report.c1.clone(), String::new(), String::new(), v1.to_string()]);
        rows.push(vec![label.into(), report.c2.clone(), String::new(), String::new(), v2.to_string()]);
    }
    csv_text(rows)
}

pub fn map_csv(report: &MapReport) -> String {
    let mut rows = vec![[
        "state",
        "electoral_votes",
        "mean_c1",
        "mean_c2",
        "winner",
        "p_c1_wins",
        "tie_mass",
        "color",
    ]
    .map(String::from)
    .to_vec()];
    for r in &report.rows {
        rows.push(vec![
            r.state.clone(),
            r.electoral_votes.map(|e| e.to_string()).unwrap_or_default(),
            r.mean_c1.to_string(),
            r.mean_c2.to_string(),
            r.winner.clone(),
            r.p_c1_wins.to_string(),
            r.tie_mass.to_string(),
            r.color.clone(),
        ]);
    }
    csv_text(rows)
}

fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const SVG_COLUMNS: usize = 6;
const TILE_W: usize = 150;
const TILE_H: usize = 56;
const HEADER_H: usize = 40;

/// Grid of labelled rectangles, one per state, filled by c1 win probability.
pub fn map_svg(report: &MapReport) -> String {
    let n = report.rows.len();
    let grid_rows = n.div_ceil(SVG_COLUMNS);
    let width = SVG_COLUMNS * TILE_W;
    let height = HEADER_H + grid_rows * TILE_H;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let mut title = format!(
        "{} vs {} ({}): blue = {} more likely",
        report.c1, report.c2, report.year, report.c1
    );
    if let (Some(a), Some(b)) = (report.ev_c1, report.ev_c2) {
        let _ = write!(title, "; average case {a}-{b}");
    }
    let _ = writeln!(
        out,
        r#"  <text x="8" y="26" font-size="16">{}</text>"#,
        escape_xml(&title)
    );
    for (i, row) in report.rows.iter().enumerate() {
        let x = (i % SVG_COLUMNS) * TILE_W;
        let y = HEADER_H + (i / SVG_COLUMNS) * TILE_H;
        let _ = writeln!(out, r#"  <g class="state" data-state="{}">"#, escape_xml(&row.state));
        let _ = writeln!(
            out,
            r##"    <rect x="{}" y="{}" width="{}" height="{}" fill="{}" stroke="#ffffff" stroke-width="2"/>"##,
            x,
            y,
            TILE_W,
            TILE_H,
            row.color
        );
        let _ = writeln!(
            out,
            r##"    <text x="{}" y="{}" font-size="12" fill="#ffffff">{}</text>"##,
            x + 6,
            y + 22,
            escape_xml(&row.state)
        );
        let _ = writeln!(
            out,
            r##"    <text x="{}" y="{}" font-size="11" fill="#ffffff">{:.1}%</text>"##,
            x + 6,
            y + 42,
            row.p_c1_wins * 100.0
        );
        let _ = writeln!(out, "  </g>");
    }
    out.push_str("</svg>\n");
    out
}

/// One row per grid cell.
pub fn grid_csv(grids: &[MatchupGrid]) -> String {
    let mut rows = vec![[
        "year",
        "c1",
        "c2",
        "expected_ev_c1",
        "win_prob_c1",
        "tie_prob",
        "loss_prob_c1",
        "e_total",
        "threshold",
    ]
    .map(String::from)
    .to_vec()];
    for grid in grids {
        for c in &grid.cells {
            rows.push(vec![
                grid.year.to_string(),
                c.c1.clone(),
                c.c2.clone(),
                c.expected_ev_c1.to_string(),
                c.win_prob_c1.to_string(),
                opt(c.tie_prob),
                c.loss_prob_c1.to_string(),
                c.e_total.to_string(),
                c.threshold.to_string(),
            ]);
        }
    }
    csv_text(rows)
}

/// Group summary; the margin threshold is repeated on every row.
pub fn bias_csv(report: &BiasReport) -> String {
    let mut rows = vec![[
        "margin_threshold",
        "group",
        "states",
        "c1",
        "mean_signed_error_c1",
        "c2",
        "mean_signed_error_c2",
    ]
    .map(String::from)
    .to_vec()];
    let groups: [(&str, &GroupBias); 3] = [
        ("swing", &report.swing),
        ("non_swing", &report.non_swing),
        ("overall", &report.overall),
    ];
    for (name, g) in groups {
        rows.push(vec![
            report.margin_threshold.to_string(),
            name.to_string(),
            g.states.to_string(),
            report.c1.clone(),
            opt(g.mean_signed_c1),
            report.c2.clone(),
            opt(g.mean_signed_c2),
        ]);
    }
    csv_text(rows)
}
