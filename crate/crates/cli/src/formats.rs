//! Output file formats.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use emohlc_core::admixture::EmotionProfileMatrix;
use emohlc_core::emotion::{Emotion, EmotionDistribution, VaPair, NUM_EMOTIONS};
use emohlc_core::hybrid::{JobReport, SelectionTable};
use emohlc_core::metrics::EvaluationReport;
use serde::Serialize;

/// Pretty JSON with a trailing newline. Floats use the shortest
/// representation that reads back to the same value.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

fn emotion_header(first: &str) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain(Emotion::ALL.iter().map(|e| e.name().to_string()))
        .collect()
}

/// Rows of the profile matrix at `concepts`, one per concept.
pub fn write_heatmap_csv(path: &Path, p: &EmotionProfileMatrix, concepts: &[usize]) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(emotion_header("concept"))?;
    for &j in concepts {
        let mut row = vec![concept_name(p, j)];
        row.extend((0..NUM_EMOTIONS).map(|k| p.get(j, k).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn concept_name(p: &EmotionProfileMatrix, j: usize) -> String {
    p.concept_names
        .as_ref()
        .and_then(|n| n.get(j).cloned())
        .unwrap_or_else(|| format!("c{j}"))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Gray level for a value: white at the minimum, black at the maximum.
/// A constant matrix is drawn in a single mid gray.
pub fn shade(value: f64, min: f64, max: f64) -> u8 {
    if max <= min {
        return 128;
    }
    let t = ((value - min) / (max - min)).clamp(0.0, 1.0);
    (255.0 - (t * 255.0).round()) as u8
}

/// Standalone SVG heat map of the profile rows at `concepts`.
pub fn heatmap_svg(p: &EmotionProfileMatrix, concepts: &[usize], title: &str) -> String {
    const CELL_W: usize = 70;
    const CELL_H: usize = 22;
    const LABEL_W: usize = 220;
    const TOP: usize = 60;
    let values: Vec<f64> = concepts
        .iter()
        .flat_map(|&j| (0..NUM_EMOTIONS).map(move |k| p.get(j, k)))
        .collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = LABEL_W + CELL_W * NUM_EMOTIONS + 10;
    let height = TOP + CELL_H * concepts.len() + 30;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="10" y="20" font-size="14">{}</text>"#, xml_escape(title));
    for (k, e) in Emotion::ALL.iter().enumerate() {
        let x = LABEL_W + k * CELL_W + CELL_W / 2;
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, TOP - 8, e.name());
    }
    for (row, &j) in concepts.iter().enumerate() {
        let y = TOP + row * CELL_H;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LABEL_W - 6,
            y + CELL_H - 6,
            xml_escape(&concept_name(p, j))
        );
        for k in 0..NUM_EMOTIONS {
            let g = shade(p.get(j, k), min, max);
            let x = LABEL_W + k * CELL_W;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="rgb({g},{g},{g})" stroke="white"><title>{}</title></rect>"#,
                p.get(j, k)
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="10" y="{}">white = {min}, black = {max}</text>"#,
        height - 10
    );
    s.push_str("</svg>\n");
    s
}

/// `C,gamma,fold,<score>` per fold, then one summary row for the selected
/// cell with `fold = best`.
pub fn write_grid_report(path: &Path, job: &JobReport) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["C", "gamma", "fold", job.cv.objective.column()])?;
    for cell in &job.cv.cells {
        for (f, s) in cell.fold_scores.iter().enumerate() {
            w.write_record([cell.c.to_string(), cell.gamma.to_string(), f.to_string(), s.to_string()])?;
        }
    }
    w.write_record([
        job.cv.best_params.c.to_string(),
        job.cv.best_params.gamma.to_string(),
        "best".to_string(),
        job.cv.best_score.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn grid_report_name(job: &JobReport) -> String {
    format!("{}__{}.csv", job.target, job.subset)
}

/// `target,<subset>...,selected` with the selection score in each cell.
pub fn write_selection_table(path: &Path, t: &SelectionTable) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec![format!("target ({})", t.criterion)];
    header.extend(t.subsets.iter().map(|s| s.to_string()));
    header.push("selected".to_string());
    w.write_record(&header)?;
    for ((name, row), &sel) in t.targets.iter().zip(&t.scores).zip(&t.selected) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        rec.push(t.subsets[sel].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_balance_log(path: &Path, reports: &[JobReport]) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["target", "subset", "job", "positives", "negatives"])?;
    for r in reports {
        let folds = r.cv.fold_balance.iter().enumerate().map(|(f, b)| (format!("fold{f}"), *b));
        for (job, (p, n)) in folds.chain(r.refit_balance.map(|b| ("refit".to_string(), b))) {
            w.write_record([r.target.clone(), r.subset.to_string(), job, p.to_string(), n.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-record predictions for one task.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Distribution(Vec<(String, EmotionDistribution)>),
    Va(Vec<(String, VaPair)>),
    Class(Vec<(String, usize)>),
}

impl Predictions {
    pub fn ids(&self) -> Vec<&str> {
        match self {
            Predictions::Distribution(v) => v.iter().map(|(id, _)| id.as_str()).collect(),
            Predictions::Va(v) => v.iter().map(|(id, _)| id.as_str()).collect(),
            Predictions::Class(v) => v.iter().map(|(id, _)| id.as_str()).collect(),
        }
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv_writer(path)?;
        match self {
            Predictions::Distribution(rows) => {
                let mut header = emotion_header("id");
                header.push("dominant".to_string());
                w.write_record(&header)?;
                for (id, d) in rows {
                    let mut rec = vec![id.clone()];
                    rec.extend(d.probs().iter().map(|v| v.to_string()));
                    rec.push(Emotion::ALL[d.dominant_class()].name().to_string());
                    w.write_record(&rec)?;
                }
            }
            Predictions::Va(rows) => {
                w.write_record(["id", "valence", "arousal"])?;
                for (id, va) in rows {
                    w.write_record([id.clone(), va.valence.to_string(), va.arousal.to_string()])?;
                }
            }
            Predictions::Class(rows) => {
                w.write_record(["id", "class_index"])?;
                for (id, c) in rows {
                    w.write_record([id.clone(), c.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .with_context(|| format!("opening {}", path.display()))?;
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let dist_header = emotion_header("id");
        // the trailing `dominant` column is informational and optional
        let is_dist = header.len() >= dist_header.len()
            && header[..dist_header.len()] == dist_header[..]
            && header[dist_header.len()..].iter().all(|h| h == "dominant");
        let num = |line: u64, col: &str, cell: &str| -> anyhow::Result<f64> {
            cell.parse::<f64>()
                .map_err(|_| anyhow!("{}: row {line}, column {col:?}: cannot parse {cell:?}", path.display()))
        };
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.with_context(|| format!("reading {}", path.display()))?;
            if rec.len() != header.len() {
                bail!("{}: row has {} cells, header has {}", path.display(), rec.len(), header.len());
            }
            records.push(rec);
        }
        if is_dist && header.len() <= dist_header.len() + 1 {
            let rows = records
                .iter()
                .map(|r| {
                    let line = r.position().map_or(0, |p| p.line());
                    let mut probs = [0.0; NUM_EMOTIONS];
                    for k in 0..NUM_EMOTIONS {
                        probs[k] = num(line, &header[k + 1], &r[k + 1])?;
                    }
                    let d = EmotionDistribution::new(probs)
                        .map_err(|e| anyhow!("{}: row {line}: {e}", path.display()))?;
                    Ok((r[0].to_string(), d))
                })
                .collect::<anyhow::Result<_>>()?;
            Ok(Predictions::Distribution(rows))
        } else if header == ["id", "valence", "arousal"] {
            let rows = records
                .iter()
                .map(|r| {
                    let line = r.position().map_or(0, |p| p.line());
                    let va = VaPair::new(num(line, "valence", &r[1])?, num(line, "arousal", &r[2])?)?;
                    Ok((r[0].to_string(), va))
                })
                .collect::<anyhow::Result<_>>()?;
            Ok(Predictions::Va(rows))
        } else if header == ["id", "class_index"] {
            let rows = records
                .iter()
                .map(|r| {
                    let line = r.position().map_or(0, |p| p.line());
                    let c: usize = r[1]
                        .parse()
                        .map_err(|_| anyhow!("{}: row {line}: bad class index {:?}", path.display(), &r[1]))?;
                    Ok((r[0].to_string(), c))
                })
                .collect::<anyhow::Result<_>>()?;
            Ok(Predictions::Class(rows))
        } else {
            bail!("{}: unrecognized predictions header {}", path.display(), header.join(","))
        }
    }
}

/// Per-record evaluation rows: `id,kld,bc,pred,true` for distributions,
/// `id,valence_abs_error,arousal_abs_error` for VA, `id,pred,true` for
/// class labels.
pub fn write_evaluation_csv(path: &Path, report: &EvaluationReport, va_rows: &[(String, f64, f64)], class_rows: &[(String, usize, usize)]) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    if !report.per_record.is_empty() {
        w.write_record(["id", "kld", "bc", "pred", "true"])?;
        for r in &report.per_record {
            w.write_record([
                r.id.clone(),
                r.kld.to_string(),
                r.bc.to_string(),
                Emotion::ALL[r.predicted].name().to_string(),
                Emotion::ALL[r.truth].name().to_string(),
            ])?;
        }
    } else if !va_rows.is_empty() {
        w.write_record(["id", "valence_abs_error", "arousal_abs_error"])?;
        for (id, v, a) in va_rows {
            w.write_record([id.clone(), v.to_string(), a.to_string()])?;
        }
    } else {
        w.write_record(["id", "pred", "true"])?;
        for (id, p, t) in class_rows {
            w.write_record([id.clone(), p.to_string(), t.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
