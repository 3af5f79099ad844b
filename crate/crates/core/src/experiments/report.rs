use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::store::{RunKind, RunRecord};
use crate::datagen::ScenarioSplit;
use crate::error::{Error, Result};
use crate::privacy::DpConfig;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Auroc,
    Auprc,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Auroc => "auroc",
            Metric::Auprc => "auprc",
        }
    }

    fn of(&self, r: &RunRecord) -> f64 {
        match self {
            Metric::Auroc => r.auroc,
            Metric::Auprc => r.auprc,
        }
    }

    /// Base RGB of the colour ramp (red for AUROC, blue for AUPRC).
    fn hue(&self) -> (u8, u8, u8) {
        match self {
            Metric::Auroc => (200, 30, 30),
            Metric::Auprc => (30, 60, 200),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub metric: Metric,
    pub x_labels: Vec<String>,
    pub y_labels: Vec<String>,
    /// `cells[y][x]`: seed-averaged metric, `None` where no record exists.
    pub cells: Vec<Vec<Option<f64>>>,
    pub std: Vec<Vec<Option<f64>>>,
    pub csv_path: PathBuf,
    pub svg_path: PathBuf,
}

fn same_split(r: &RunRecord, s: &ScenarioSplit) -> bool {
    r.split_mode == s.mode && (r.split_fraction - s.fraction).abs() < 1e-9
}

fn usable(r: &RunRecord) -> bool {
    r.kind == RunKind::Federated && r.is_ok()
}

/// Split and (R, E) axes present in `records`, in canonical order:
/// homogeneous before heterogeneous, fractions descending, rounds ascending.
pub fn axes_from_records(records: &[RunRecord]) -> (Vec<ScenarioSplit>, Vec<(usize, usize)>) {
    let mut splits: Vec<ScenarioSplit> = Vec::new();
    let mut res: Vec<(usize, usize)> = Vec::new();
    for r in records.iter().filter(|r| usable(r)) {
        if !splits.iter().any(|s| same_split(r, s)) {
            splits.push(ScenarioSplit {
                mode: r.split_mode,
                fraction: r.split_fraction,
            });
        }
        if !res.contains(&(r.rounds, r.epochs)) {
            res.push((r.rounds, r.epochs));
        }
    }
    splits.sort_by(|a, b| {
        a.mode
            .cmp(&b.mode)
            .then(b.fraction.total_cmp(&a.fraction))
    });
    res.sort();
    (splits, res)
}

/// Writes `<out_base>.csv` and `<out_base>.svg` for a split x (R, E) grid of
/// seed-averaged federated results.
pub fn emit_heatmap(
    records: &[RunRecord],
    metric: Metric,
    x_axis: &[ScenarioSplit],
    y_axis: &[(usize, usize)],
    out_base: &Path,
) -> Result<Heatmap> {
    if records.iter().filter(|r| usable(r)).count() == 0 {
        return Err(Error::Store("no successful federated records to report".into()));
    }
    let mut cells = Vec::with_capacity(y_axis.len());
    let mut spread = Vec::with_capacity(y_axis.len());
    for &(rounds, epochs) in y_axis {
        let mut row = Vec::with_capacity(x_axis.len());
        let mut row_std = Vec::with_capacity(x_axis.len());
        for split in x_axis {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| usable(r) && r.rounds == rounds && r.epochs == epochs && same_split(r, split))
                .map(|r| metric.of(r))
                .collect();
            if values.is_empty() {
                row.push(None);
                row_std.push(None);
            } else {
                row.push(Some(stats::mean(&values)));
                row_std.push(Some(stats::std_dev(&values)));
            }
        }
        cells.push(row);
        spread.push(row_std);
    }
    let x_labels: Vec<String> = x_axis.iter().map(ScenarioSplit::label).collect();
    let y_labels: Vec<String> = y_axis.iter().map(|(r, e)| format!("{r}/{e}")).collect();

    let csv_path = out_base.with_extension("csv");
    let svg_path = out_base.with_extension("svg");
    let mut csv = String::from("re_config");
    for x in &x_labels {
        csv.push(',');
        csv.push_str(x);
    }
    csv.push('\n');
    for (y, row) in y_labels.iter().zip(&cells) {
        csv.push_str(y);
        for v in row {
            csv.push(',');
            if let Some(v) = v {
                write!(csv, "{v}").unwrap();
            }
        }
        csv.push('\n');
    }
    std::fs::write(&csv_path, csv)?;
    std::fs::write(&svg_path, render_svg(metric, &x_labels, &y_labels, &cells))?;

    Ok(Heatmap {
        metric,
        x_labels,
        y_labels,
        cells,
        std: spread,
        csv_path,
        svg_path,
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn render_svg(metric: Metric, x: &[String], y: &[String], cells: &[Vec<Option<f64>>]) -> String {
    const CELL_W: usize = 90;
    const CELL_H: usize = 40;
    const LEFT: usize = 70;
    const TOP: usize = 50;
    let width = LEFT + CELL_W * x.len() + 20;
    let height = TOP + CELL_H * y.len() + 20;
    let present: Vec<f64> = cells.iter().flatten().flatten().copied().collect();
    let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (r0, g0, b0) = metric.hue();

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{LEFT}" y="20" font-size="14">{} (rows: rounds/epochs, columns: site split)</text>"#,
        metric.name().to_uppercase()
    )
    .unwrap();
    for (i, label) in x.iter().enumerate() {
        let cx = LEFT + i * CELL_W + CELL_W / 2;
        writeln!(svg, r#"<text x="{cx}" y="{}" text-anchor="middle">{}</text>"#, TOP - 8, escape(label)).unwrap();
    }
    for (j, label) in y.iter().enumerate() {
        let cy = TOP + j * CELL_H + CELL_H / 2 + 4;
        writeln!(svg, r#"<text x="{}" y="{cy}" text-anchor="end">{}</text>"#, LEFT - 8, escape(label)).unwrap();
        for (i, v) in cells[j].iter().enumerate() {
            let (px, py) = (LEFT + i * CELL_W, TOP + j * CELL_H);
            let fill = match v {
                Some(v) => {
                    let t = if hi > lo { (v - lo) / (hi - lo) } else { 1.0 };
                    let mix = |c: u8| (255.0 - (255.0 - c as f64) * (0.15 + 0.85 * t)).round() as u8;
                    format!("rgb({},{},{})", mix(r0), mix(g0), mix(b0))
                }
                None => "white".to_string(),
            };
            writeln!(
                svg,
                r##"<rect x="{px}" y="{py}" width="{CELL_W}" height="{CELL_H}" fill="{fill}" stroke="#888"/>"##
            )
            .unwrap();
            if let Some(v) = v {
                writeln!(
                    svg,
                    r#"<text x="{}" y="{}" text-anchor="middle">{v:.3}</text>"#,
                    px + CELL_W / 2,
                    py + CELL_H / 2 + 4
                )
                .unwrap();
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffRow {
    pub mechanism: String,
    pub noise_param: f64,
    pub gamma_or_q: f64,
    pub auroc: f64,
    pub auroc_std: f64,
    pub epsilon: f64,
    pub runs: usize,
}

/// `(noise parameter, gamma or Q)` of a record's DP setting.
fn dp_params(dp: &DpConfig) -> (f64, f64) {
    match dp {
        DpConfig::None => (0.0, 0.0),
        DpConfig::DpSgd(c) => (c.noise_multiplier, c.max_grad_norm),
        DpConfig::DpSvt(c) => (c.eps1, c.portion),
    }
}

/// Seed-averaged privacy/performance table, one row per mechanism setting.
pub fn tradeoff_rows(records: &[RunRecord]) -> Vec<TradeoffRow> {
    let mut groups: BTreeMap<(String, u64, u64), Vec<&RunRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| usable(r)) {
        let (noise, gq) = dp_params(&r.dp);
        groups
            .entry((r.dp.mechanism().to_string(), noise.to_bits(), gq.to_bits()))
            .or_default()
            .push(r);
    }
    let mut rows: Vec<TradeoffRow> = groups
        .into_iter()
        .map(|((mechanism, noise, gq), rs)| {
            let aurocs: Vec<f64> = rs.iter().map(|r| r.auroc).collect();
            let eps: Vec<f64> = rs.iter().map(|r| r.epsilon).collect();
            TradeoffRow {
                mechanism,
                noise_param: f64::from_bits(noise),
                gamma_or_q: f64::from_bits(gq),
                auroc: stats::mean(&aurocs),
                auroc_std: stats::std_dev(&aurocs),
                epsilon: stats::mean(&eps),
                runs: rs.len(),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.mechanism
            .cmp(&b.mechanism)
            .then(a.noise_param.total_cmp(&b.noise_param))
            .then(a.gamma_or_q.total_cmp(&b.gamma_or_q))
    });
    rows
}

pub fn emit_tradeoff(records: &[RunRecord], out_path: &Path) -> Result<Vec<TradeoffRow>> {
    let rows = tradeoff_rows(records);
    let mut csv = String::from("mechanism,noise_param,gamma_or_Q,auroc,epsilon,auroc_std,runs\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.mechanism, r.noise_param, r.gamma_or_q, r.auroc, r.epsilon, r.auroc_std, r.runs
        )
        .unwrap();
    }
    std::fs::write(out_path, csv)?;
    Ok(rows)
}
