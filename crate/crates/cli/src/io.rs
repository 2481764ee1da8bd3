//! Dataset manifests and the CSV files they reference.
//!
//! A manifest is JSON:
//!
//! ```json
//! {
//!   "name": "emotion6",
//!   "families": [{"tag": "imagenet", "dimension": 1000, "file": "imagenet.csv"}],
//!   "labels": {"file": "labels.csv", "kind": "distribution"}
//! }
//! ```
//!
//! Paths are relative to the manifest. Feature files have the header
//! `id,<col>,...`; label files are `id,anger,...,neutral[,valence,arousal]`,
//! `id,valence,arousal` or `id,class_index`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use emohlc_core::dataset::{Dataset, FamilyTag, FeatureFamily, FeatureRecord, LabelKind, Labels};
use emohlc_core::emotion::{Emotion, EmotionDistribution, VaPair, NUM_EMOTIONS};
use serde::{Deserialize, Serialize};

/// Label rows whose sum is this close to one are renormalized on load;
/// published label files are rounded to a few decimals.
pub const LABEL_SUM_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub families: Vec<FamilyEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<LabelEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyEntry {
    /// `llf`, `imagenet` or `places` (`places205` accepted).
    pub tag: String,
    pub dimension: usize,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub file: String,
    pub kind: LabelKind,
}

/// A loaded dataset with the column names of each family file.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub column_names: BTreeMap<FamilyTag, Vec<String>>,
}

fn reader(path: &Path) -> anyhow::Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))
}

fn parse_cell(path: &Path, line: u64, column: &str, cell: &str) -> anyhow::Result<f64> {
    let v: f64 = cell
        .parse()
        .map_err(|_| anyhow!("{}: row {line}, column {column:?}: cannot parse {cell:?} as a number", path.display()))?;
    if !v.is_finite() {
        bail!("{}: row {line}, column {column:?}: value {cell:?} is not finite", path.display());
    }
    Ok(v)
}

/// Rows of a numeric CSV keyed by id, in file order.
struct Table {
    columns: Vec<String>,
    rows: Vec<(String, Vec<f64>)>,
}

fn read_table(path: &Path) -> anyhow::Result<Table> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().with_context(|| format!("reading header of {}", path.display()))?.clone();
    if header.get(0) != Some("id") {
        bail!("{}: first header column must be \"id\"", path.display());
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut seen = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != columns.len() + 1 {
            bail!(
                "{}: row {line} has {} cells, header has {}",
                path.display(),
                rec.len(),
                columns.len() + 1
            );
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            bail!("{}: row {line} has an empty id", path.display());
        }
        if let Some(prev) = seen.insert(id.clone(), line) {
            bail!("{}: duplicate id {id:?} on rows {prev} and {line}", path.display());
        }
        let values = rec
            .iter()
            .skip(1)
            .zip(&columns)
            .map(|(cell, col)| parse_cell(path, line, col, cell))
            .collect::<anyhow::Result<Vec<f64>>>()?;
        rows.push((id, values));
    }
    Ok(Table { columns, rows })
}

fn expected_label_columns(kind: LabelKind) -> Vec<String> {
    let mut cols: Vec<String> = Vec::new();
    match kind {
        LabelKind::Distribution | LabelKind::DistributionVa => {
            cols.extend(Emotion::ALL.iter().map(|e| e.name().to_string()));
            if kind == LabelKind::DistributionVa {
                cols.extend(["valence".to_string(), "arousal".to_string()]);
            }
        }
        LabelKind::Va => cols.extend(["valence".to_string(), "arousal".to_string()]),
        LabelKind::Hard => cols.push("class_index".to_string()),
    }
    cols
}

fn distribution_from_row(path: &Path, id: &str, values: &[f64]) -> anyhow::Result<EmotionDistribution> {
    let mut probs = [0.0; NUM_EMOTIONS];
    probs.copy_from_slice(&values[..NUM_EMOTIONS]);
    if probs.iter().any(|p| *p < 0.0) {
        bail!("{}: label for id {id:?} has a negative probability", path.display());
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > LABEL_SUM_SLACK {
        bail!("{}: label for id {id:?} sums to {sum}, not 1", path.display());
    }
    for p in &mut probs {
        *p /= sum;
    }
    EmotionDistribution::new(probs).map_err(|e| anyhow!("{}: label for id {id:?}: {e}", path.display()))
}

fn read_labels(path: &Path, kind: LabelKind) -> anyhow::Result<HashMap<String, Labels>> {
    let table = read_table(path)?;
    let expected = expected_label_columns(kind);
    if table.columns != expected {
        bail!(
            "{}: label header must be id,{} for kind {}; found id,{} (label vector length {})",
            path.display(),
            expected.join(","),
            kind.name(),
            table.columns.join(","),
            table.columns.len()
        );
    }
    let mut out = HashMap::with_capacity(table.rows.len());
    for (id, values) in table.rows {
        let mut labels = Labels::default();
        match kind {
            LabelKind::Distribution => labels.distribution = Some(distribution_from_row(path, &id, &values)?),
            LabelKind::DistributionVa => {
                labels.distribution = Some(distribution_from_row(path, &id, &values)?);
                labels.va = Some(VaPair::new(values[7], values[8])?);
            }
            LabelKind::Va => labels.va = Some(VaPair::new(values[0], values[1])?),
            LabelKind::Hard => {
                let c = values[0];
                if c < 0.0 || c.fract() != 0.0 {
                    bail!("{}: class_index for id {id:?} must be a non-negative integer, got {c}", path.display());
                }
                labels.class = Some(c as usize);
            }
        }
        out.insert(id, labels);
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> anyhow::Result<Manifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
}

/// Load every family and the labels named by a manifest, aligned by id.
///
/// Record order follows the first family file.
pub fn load_dataset(manifest_path: &Path) -> anyhow::Result<Loaded> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    if manifest.families.is_empty() {
        bail!("manifest declares no feature families");
    }
    let mut families = Vec::new();
    let mut tables = Vec::new();
    let mut column_names = BTreeMap::new();
    for entry in &manifest.families {
        let tag: FamilyTag = entry.tag.parse().map_err(|e| anyhow!("manifest: {e}"))?;
        let path = base.join(&entry.file);
        let table = read_table(&path)?;
        if table.columns.len() != entry.dimension {
            bail!(
                "{}: dimension mismatch: manifest declares {} columns for {tag}, file has {}",
                path.display(),
                entry.dimension,
                table.columns.len()
            );
        }
        families.push(FeatureFamily {
            tag,
            dimension: entry.dimension,
        });
        column_names.insert(tag, table.columns.clone());
        tables.push((tag, path, table));
    }

    let (_, first_path, first) = &tables[0];
    if first.rows.is_empty() {
        bail!("{}: dataset is empty", first_path.display());
    }
    let mut records: Vec<FeatureRecord> = first
        .rows
        .iter()
        .map(|(id, _)| FeatureRecord {
            id: id.clone(),
            features: BTreeMap::new(),
            labels: Labels::default(),
        })
        .collect();
    let index: HashMap<&str, usize> = first.rows.iter().enumerate().map(|(i, (id, _))| (id.as_str(), i)).collect();
    for (tag, path, table) in &tables {
        if table.rows.len() != records.len() {
            bail!(
                "{}: {} rows, but {} has {}",
                path.display(),
                table.rows.len(),
                first_path.display(),
                records.len()
            );
        }
        for (id, values) in &table.rows {
            let &i = index
                .get(id.as_str())
                .ok_or_else(|| anyhow!("{}: id {id:?} does not appear in {}", path.display(), first_path.display()))?;
            records[i].features.insert(*tag, values.clone());
        }
    }

    let kind = match &manifest.labels {
        Some(entry) => {
            let path = base.join(&entry.file);
            let mut labels = read_labels(&path, entry.kind)?;
            for rec in &mut records {
                rec.labels = labels
                    .remove(&rec.id)
                    .ok_or_else(|| anyhow!("{}: missing label for id {:?}", path.display(), rec.id))?;
            }
            if let Some(extra) = labels.keys().min() {
                bail!("{}: label for unknown id {extra:?}", path.display());
            }
            Some(entry.kind)
        }
        None => None,
    };
    let dataset = Dataset::new(manifest.name.clone(), families, kind, records, manifest_path.display().to_string())
        .map_err(|e| anyhow!("invalid dataset: {e}"))?;
    Ok(Loaded { dataset, column_names })
}

fn write_csv_file(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn family_file_name(tag: FamilyTag) -> String {
    format!("{}.csv", tag.name())
}

/// Write a dataset as `manifest.json` plus one CSV per family and a label
/// file. Returns the manifest path.
pub fn write_dataset(dir: &Path, ds: &Dataset) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut entries = Vec::new();
    for fam in ds.families() {
        let file = family_file_name(fam.tag);
        let mut header = vec!["id".to_string()];
        header.extend((0..fam.dimension).map(|j| format!("f{j}")));
        let rows = ds.records().iter().map(|r| {
            let mut row = vec![r.id.clone()];
            row.extend(r.features[&fam.tag].iter().map(|v| v.to_string()));
            row
        });
        write_csv_file(&dir.join(&file), &header, rows)?;
        entries.push(FamilyEntry {
            tag: fam.tag.name().to_string(),
            dimension: fam.dimension,
            file,
        });
    }
    let labels = match ds.label_kind() {
        Some(kind) => {
            let mut header = vec!["id".to_string()];
            header.extend(expected_label_columns(kind));
            let rows = ds.records().iter().map(|r| {
                let mut row = vec![r.id.clone()];
                if let Some(d) = &r.labels.distribution {
                    row.extend(d.probs().iter().map(|v| v.to_string()));
                }
                if let Some(va) = r.labels.va {
                    row.push(va.valence.to_string());
                    row.push(va.arousal.to_string());
                }
                if let Some(c) = r.labels.class {
                    row.push(c.to_string());
                }
                row
            });
            write_csv_file(&dir.join("labels.csv"), &header, rows)?;
            Some(LabelEntry {
                file: "labels.csv".to_string(),
                kind,
            })
        }
        None => None,
    };
    let manifest = Manifest {
        name: ds.name().to_string(),
        families: entries,
        labels,
    };
    let path = dir.join("manifest.json");
    crate::formats::write_json(&path, &manifest)?;
    Ok(path)
}
