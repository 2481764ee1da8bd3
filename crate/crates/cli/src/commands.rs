//! Subcommand implementations.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _};
use emohlc_core::admixture::{build_problem, solve_admixture, top_concepts, EmotionProfileMatrix};
use emohlc_core::dataset::{stratified_split, ConceptFilter, Dataset, FamilyTag, LabelKind};
use emohlc_core::emotion::{Emotion, EmotionDistribution};
use emohlc_core::hybrid::{build_artphoto, build_hybrid, build_va, JobReport, SelectionTable};
use emohlc_core::metrics::{aad, accuracy, evaluate_distributions, mean_defined, per_class_tpr, EvaluationReport};
use emohlc_core::synth::{synth_admixture, synth_artphoto, synth_hybrid, ArtphotoSynthConfig, HybridSynthConfig, HybridTruth};
use serde::{Deserialize, Serialize};

use crate::bundle::{Bundle, Model};
use crate::config::{ConfigRecord, RunConfig};
use crate::formats::{self, write_json, Predictions};
use crate::io::{load_dataset, write_dataset, Loaded};
use crate::parallel::PoolRunner;

/// How a command ended when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Artifacts were written but some solver hit its iteration cap.
    NotConverged,
}

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub runner: PoolRunner,
}

impl Context {
    fn prepare_out(&self, command: &str) -> anyhow::Result<()> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        write_json(
            &self.out.join("run_config.json"),
            &ConfigRecord {
                command,
                config: &self.config,
            },
        )
    }
}

// ---------------------------------------------------------------- ingest

pub fn ingest(manifest: &Path) -> anyhow::Result<Status> {
    let Loaded { dataset: ds, .. } = load_dataset(manifest)?;
    println!("dataset      {}", ds.name());
    println!("records      {}", ds.len());
    println!("labels       {}", ds.label_kind().map_or("none", LabelKind::name));
    for f in ds.families() {
        println!("family       {:<9} dimension {}", f.tag.name(), f.dimension);
    }
    if let Some(kind) = ds.label_kind() {
        if kind != LabelKind::Va {
            println!();
            println!("{:<12} {:>7}", "class", "images");
            let counts = ds.class_counts();
            let n_rows = if kind == LabelKind::Hard { counts.len() } else { Emotion::ALL.len() };
            for c in 0..n_rows {
                let name = match kind {
                    LabelKind::Hard => format!("class_{c}"),
                    _ => Emotion::ALL[c].name().to_string(),
                };
                println!("{:<12} {:>7}", name, counts.get(c).copied().unwrap_or(0));
            }
            println!("{:<12} {:>7}", "total", ds.len());
        }
    }
    Ok(Status::Ok)
}

// ------------------------------------------------------------- admixture

pub struct AdmixtureArgs {
    pub manifest: PathBuf,
    pub family: Option<String>,
    pub truth: Option<PathBuf>,
}

pub fn admixture(ctx: &Context, args: &AdmixtureArgs) -> anyhow::Result<Status> {
    let Loaded { dataset: ds, column_names } = load_dataset(&args.manifest)?;
    if !ds.label_kind().is_some_and(LabelKind::has_distribution) {
        bail!("admixture needs distribution labels");
    }
    let families: Vec<FamilyTag> = match &args.family {
        Some(name) => {
            let tag: FamilyTag = name.parse().map_err(|e| anyhow!("{e}"))?;
            if !tag.is_concept() {
                bail!("family {tag} is not a concept family");
            }
            if !ds.has_family(tag) {
                bail!("dataset has no {tag} family");
            }
            vec![tag]
        }
        None => ds.families().iter().map(|f| f.tag).filter(|t| t.is_concept()).collect(),
    };
    if families.is_empty() {
        bail!("dataset has no concept family");
    }
    let truth = match &args.truth {
        Some(p) => match formats::read_json::<Truth>(p)? {
            Truth::Admixture { profile, .. } => Some(profile),
            _ => bail!("{} is not an admixture ground-truth file", p.display()),
        },
        None => None,
    };
    for &tag in &families {
        let dim = ds.family(tag).expect("checked").dimension;
        if ctx.config.top_k > dim {
            bail!("--topk {} exceeds the {dim} concepts of {tag}", ctx.config.top_k);
        }
    }

    ctx.prepare_out("admixture")?;
    let mut status = Status::Ok;
    for tag in families {
        let rows = ds.family_rows(tag)?;
        let filter = ConceptFilter::fit(&rows, ctx.config.detect_threshold, ctx.config.frequency_threshold)?;
        let problem = build_problem(&ds, tag, &filter)?;
        let (mut profile, report) = solve_admixture(&problem, ctx.config.admixture)?;
        let names = &column_names[&tag];
        profile.concept_names = Some(filter.kept_indices.iter().map(|&j| names[j].clone()).collect());
        let k = ctx.config.top_k.min(profile.dimension());
        let top = top_concepts(&profile, k)?;

        let stem = tag.name();
        write_json(&ctx.out.join(format!("{stem}_profile.json")), &profile)?;
        write_json(&ctx.out.join(format!("{stem}_solver_report.json")), &report)?;
        write_json(&ctx.out.join(format!("{stem}_top_concepts.json")), &top)?;
        write_json(&ctx.out.join(format!("{stem}_concept_filter.json")), &filter)?;
        formats::write_heatmap_csv(&ctx.out.join(format!("{stem}_heatmap.csv")), &profile, &top.union)?;
        let title = format!("Top {k} concepts per emotion, {stem}");
        fs::write(ctx.out.join(format!("{stem}_heatmap.svg")), formats::heatmap_svg(&profile, &top.union, &title))?;

        println!(
            "{stem}: kept {} of {} concepts; iterations {}; objective {:.6e}; stationarity {:.3e}; kkt {:.3e}; converged {}",
            filter.output_dimension(),
            filter.input_dimension,
            report.iterations,
            report.final_objective,
            report.stationarity,
            report.kkt_residual,
            report.converged
        );
        for (c, list) in top.per_class.iter().enumerate() {
            let names: Vec<String> = list
                .iter()
                .map(|(j, _)| profile.concept_names.as_ref().map_or(format!("c{j}"), |n| n[*j].clone()))
                .collect();
            println!("  {:<9} {}", Emotion::ALL[c].name(), names.join(", "));
        }
        if let Some(truth) = &truth {
            if truth.dimension() == filter.input_dimension {
                let restricted = restrict_profile(truth, &filter.kept_indices)?;
                let errs = profile.column_l1_errors(&restricted);
                let shown: Vec<String> = errs.iter().map(|e| format!("{e:.4e}")).collect();
                println!("  recovered-vs-true column L1 errors: {}", shown.join(" "));
            } else {
                println!("  ground truth has dimension {}, skipping comparison", truth.dimension());
            }
        }
        if !report.converged {
            status = Status::NotConverged;
        }
    }
    Ok(status)
}

/// The true profile on the kept concepts, each column renormalized.
fn restrict_profile(p: &EmotionProfileMatrix, kept: &[usize]) -> anyhow::Result<EmotionProfileMatrix> {
    let cols = p
        .columns
        .iter()
        .map(|c| {
            let v: Vec<f64> = kept.iter().map(|&j| c[j]).collect();
            let s: f64 = v.iter().sum();
            if s > 0.0 {
                v.iter().map(|x| x / s).collect()
            } else {
                vec![1.0 / kept.len() as f64; kept.len()]
            }
        })
        .collect();
    Ok(EmotionProfileMatrix::from_columns(cols)?)
}

// ------------------------------------------------------------------ train

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Task {
    Distribution,
    Va,
    Artphoto,
}

/// The train/test partition used by `train`, by record id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub seed: u64,
    pub test_fraction: f64,
    pub train: Vec<String>,
    pub test: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub struct TrainArgs {
    pub manifest: PathBuf,
    pub task: Task,
    pub report: bool,
}

pub fn train(ctx: &Context, args: &TrainArgs) -> anyhow::Result<Status> {
    let Loaded { dataset: ds, .. } = load_dataset(&args.manifest)?;
    let kind = ds.label_kind();
    let ok = match args.task {
        Task::Distribution => kind.is_some_and(LabelKind::has_distribution),
        Task::Va => kind.is_some_and(LabelKind::has_va),
        Task::Artphoto => kind == Some(LabelKind::Hard),
    };
    if !ok {
        bail!(
            "task {:?} does not match the dataset's labels ({})",
            args.task,
            kind.map_or("none", LabelKind::name)
        );
    }
    let split = stratified_split(&ds, ctx.config.split_fraction, ctx.config.seed)?;
    for w in &split.warnings {
        eprintln!("warning: {w}");
    }
    let cfg = ctx.config.train_config();
    let (model, table, reports) = match args.task {
        Task::Distribution => {
            let t = build_hybrid(&split.train, &cfg, &ctx.runner)?;
            let table = t.ensemble.table.clone();
            (Model::Distribution(t.ensemble), table, t.reports)
        }
        Task::Va => {
            let t = build_va(&split.train, &cfg, &ctx.runner)?;
            let table = t.ensemble.table.clone();
            (Model::Va(t.ensemble), table, t.reports)
        }
        Task::Artphoto => {
            let t = build_artphoto(&split.train, &cfg, &ctx.runner)?;
            let table = t.ensemble.table.clone();
            (Model::Artphoto(t.ensemble), table, t.reports)
        }
    };

    ctx.prepare_out("train")?;
    let ids = |d: &Dataset| d.records().iter().map(|r| r.id.clone()).collect::<Vec<_>>();
    write_json(
        &ctx.out.join("split.json"),
        &SplitFile {
            seed: ctx.config.seed,
            test_fraction: ctx.config.split_fraction,
            train: ids(&split.train),
            test: ids(&split.test),
            warnings: split.warnings.clone(),
        },
    )?;
    write_json(&ctx.out.join("bundle.json"), &Bundle::new(model))?;
    formats::write_selection_table(&ctx.out.join("selection.csv"), &table)?;
    if args.task == Task::Artphoto {
        formats::write_balance_log(&ctx.out.join("balance.csv"), &reports)?;
    }
    if args.report {
        let dir = ctx.out.join("grid");
        fs::create_dir_all(&dir)?;
        for job in &reports {
            formats::write_grid_report(&dir.join(formats::grid_report_name(job)), job)?;
        }
    }
    print_selection(&table);
    println!("train {} / test {} records", split.train.len(), split.test.len());
    Ok(convergence_status(&reports))
}

fn print_selection(t: &SelectionTable) {
    println!("selection by {}:", t.criterion);
    for ((name, row), &sel) in t.targets.iter().zip(&t.scores).zip(&t.selected) {
        println!("  {:<10} {:<22} {:.6e}", name, t.subsets[sel].to_string(), row[sel]);
    }
}

fn convergence_status(reports: &[JobReport]) -> Status {
    let mut status = Status::Ok;
    for r in reports {
        for w in &r.cv.warnings {
            eprintln!("warning: {} / {}: {w}", r.target, r.subset);
            status = Status::NotConverged;
        }
        if !r.refit_converged {
            eprintln!("warning: {} / {}: refit hit the iteration cap", r.target, r.subset);
            status = Status::NotConverged;
        }
    }
    status
}

// ---------------------------------------------------------------- predict

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Part {
    All,
    Train,
    Test,
}

fn select_part(ds: Dataset, split: Option<&Path>, part: Part) -> anyhow::Result<Dataset> {
    let Some(path) = split else {
        if part != Part::All {
            bail!("--part {part:?} needs --split");
        }
        return Ok(ds);
    };
    let split: SplitFile = formats::read_json(path)?;
    let ids: BTreeSet<String> = match part {
        Part::All => split.train.into_iter().chain(split.test).collect(),
        Part::Train => split.train.into_iter().collect(),
        Part::Test => split.test.into_iter().collect(),
    };
    let known: BTreeSet<&str> = ds.records().iter().map(|r| r.id.as_str()).collect();
    if let Some(missing) = ids.iter().find(|id| !known.contains(id.as_str())) {
        bail!("split id {missing:?} is not in the dataset");
    }
    Ok(ds.select_ids(&ids))
}

pub struct PredictArgs {
    pub bundle: PathBuf,
    pub manifest: PathBuf,
    pub split: Option<PathBuf>,
    pub part: Part,
}

pub fn predict(ctx: &Context, args: &PredictArgs) -> anyhow::Result<Status> {
    let bundle: Bundle = formats::read_json(&args.bundle)?;
    bundle.check()?;
    let Loaded { dataset, .. } = load_dataset(&args.manifest)?;
    let ds = select_part(dataset, args.split.as_deref(), args.part)?;
    let preds = bundle.predict(&ds)?;
    ctx.prepare_out("predict")?;
    preds.write(&ctx.out.join("predictions.csv"))?;
    println!("wrote {} predictions", ds.len());
    Ok(Status::Ok)
}

// --------------------------------------------------------------- evaluate

pub struct EvaluateArgs {
    pub predictions: PathBuf,
    pub manifest: PathBuf,
    pub reference: bool,
}

/// Published Emotion6 results: feature set, accuracy (%), KLD, BC.
pub const REFERENCE_DISTRIBUTION: [(&str, Option<f64>, f64, f64); 9] = [
    ("LLF", Some(38.9), 0.577, 0.820),
    ("CNNR", None, 0.480, 0.847),
    ("ImageNet", Some(45.83), 0.559, 0.818),
    ("Places205", Some(43.16), 0.548, 0.827),
    ("LLF+ImageNet", Some(44.50), 0.588, 0.824),
    ("LLF+Places205", Some(47.00), 0.583, 0.831),
    ("ImageNet+Places205", Some(49.83), 0.518, 0.830),
    ("LLF+ImageNet+Places205", Some(42.00), 0.574, 0.823),
    ("Hybrid Model", Some(52.00), 0.493, 0.839),
];

/// Published Emotion6 valence / arousal AAD.
pub const REFERENCE_VA: [(&str, f64, f64); 9] = [
    ("LLF", 1.347, 0.734),
    ("CNNR", 1.219, 0.741),
    ("ImageNet", 1.5851, 0.6898),
    ("Places205", 1.3544, 0.6826),
    ("LLF+ImageNet", 1.5831, 0.6781),
    ("LLF+Places205", 1.2093, 0.6766),
    ("ImageNet+Places205", 1.273, 0.6802),
    ("LLF+ImageNet+Places205", 1.265, 0.6703),
    ("Hybrid Model", 1.2093, 0.6802),
];

fn fmt_opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map_or("-".to_string(), f)
}

fn print_reference(report: &EvaluationReport) {
    if report.mean_kld.is_some() {
        println!();
        println!("Emotion6 reference (published) vs measured:");
        println!("  {:<24} {:>8} {:>8} {:>8}", "feature set", "Acc(%)", "KLD", "BC");
        for (name, acc, kld, bc) in REFERENCE_DISTRIBUTION {
            println!(
                "  {:<24} {:>8} {:>8.3} {:>8.3}",
                name,
                fmt_opt(acc, |a| format!("{a:.2}")),
                kld,
                bc
            );
        }
        println!(
            "  {:<24} {:>8} {:>8} {:>8}",
            "measured",
            fmt_opt(report.accuracy, |a| format!("{:.2}", 100.0 * a)),
            fmt_opt(report.mean_kld, |v| format!("{v:.3}")),
            fmt_opt(report.mean_bc, |v| format!("{v:.3}"))
        );
    }
    if report.valence_aad.is_some() {
        println!();
        println!("Emotion6 reference (published) vs measured:");
        println!("  {:<24} {:>12} {:>12}", "feature set", "Valence AAD", "Arousal AAD");
        for (name, v, a) in REFERENCE_VA {
            println!("  {:<24} {:>12.4} {:>12.4}", name, v, a);
        }
        println!(
            "  {:<24} {:>12} {:>12}",
            "measured",
            fmt_opt(report.valence_aad, |v| format!("{v:.4}")),
            fmt_opt(report.arousal_aad, |v| format!("{v:.4}"))
        );
    }
}

pub fn evaluate(ctx: &Context, args: &EvaluateArgs) -> anyhow::Result<Status> {
    let preds = Predictions::read(&args.predictions)?;
    let Loaded { dataset: ds, .. } = load_dataset(&args.manifest)?;
    let by_id: BTreeMap<&str, usize> = ds.records().iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
    let ids = preds.ids();
    if ids.is_empty() {
        bail!("{}: no predictions", args.predictions.display());
    }
    let mut seen = BTreeSet::new();
    for id in &ids {
        if !by_id.contains_key(id) {
            bail!("prediction id {id:?} is not in the dataset");
        }
        if !seen.insert(*id) {
            bail!("prediction id {id:?} appears twice");
        }
    }
    let rec = |id: &str| &ds.records()[by_id[id]];
    let opts = ctx.config.kld_options();
    let mut va_rows = Vec::new();
    let mut class_rows = Vec::new();
    let report = match &preds {
        Predictions::Distribution(rows) => {
            let truth = rows
                .iter()
                .map(|(id, _)| rec(id).distribution().copied())
                .collect::<Result<Vec<EmotionDistribution>, _>>()?;
            let pred: Vec<EmotionDistribution> = rows.iter().map(|(_, d)| *d).collect();
            let names: Vec<String> = rows.iter().map(|(id, _)| id.clone()).collect();
            evaluate_distributions(&names, &pred, &truth, opts)?
        }
        Predictions::Va(rows) => {
            let truth = rows.iter().map(|(id, _)| rec(id).va()).collect::<Result<Vec<_>, _>>()?;
            let pv: Vec<f64> = rows.iter().map(|(_, p)| p.valence).collect();
            let pa: Vec<f64> = rows.iter().map(|(_, p)| p.arousal).collect();
            let tv: Vec<f64> = truth.iter().map(|t| t.valence).collect();
            let ta: Vec<f64> = truth.iter().map(|t| t.arousal).collect();
            for ((id, p), t) in rows.iter().zip(&truth) {
                va_rows.push((id.clone(), (p.valence - t.valence).abs(), (p.arousal - t.arousal).abs()));
            }
            let mut r = EvaluationReport::empty(rows.len(), opts);
            r.valence_aad = Some(aad(&pv, &tv)?);
            r.arousal_aad = Some(aad(&pa, &ta)?);
            r
        }
        Predictions::Class(rows) => {
            let truth = rows
                .iter()
                .map(|(id, _)| rec(id).labels.stratum().ok_or_else(|| anyhow!("record {id:?} has no class label")))
                .collect::<anyhow::Result<Vec<usize>>>()?;
            let pred: Vec<usize> = rows.iter().map(|(_, c)| *c).collect();
            let n_classes = truth.iter().chain(&pred).max().map_or(0, |m| m + 1);
            for ((id, p), t) in rows.iter().zip(&truth) {
                class_rows.push((id.clone(), *p, *t));
            }
            let tpr = per_class_tpr(&pred, &truth, n_classes)?;
            let mut r = EvaluationReport::empty(rows.len(), opts);
            r.accuracy = Some(accuracy(&pred, &truth)?);
            r.mean_tpr = mean_defined(&tpr);
            r.per_class_tpr = Some(tpr);
            r
        }
    };

    ctx.prepare_out("evaluate")?;
    write_json(&ctx.out.join("evaluation.json"), &report)?;
    formats::write_evaluation_csv(&ctx.out.join("evaluation.csv"), &report, &va_rows, &class_rows)?;

    println!("records      {}", report.n_records);
    if let Some(a) = report.accuracy {
        println!("accuracy     {:.2}%", 100.0 * a);
    }
    if let Some(k) = report.mean_kld {
        println!("mean KLD     {k:.4}");
    }
    if let Some(b) = report.mean_bc {
        println!("mean BC      {b:.4}");
    }
    if let Some(v) = report.valence_aad {
        println!("valence AAD  {v:.4}");
    }
    if let Some(v) = report.arousal_aad {
        println!("arousal AAD  {v:.4}");
    }
    if let Some(t) = report.mean_tpr {
        println!("mean TPR     {t:.4}");
    }
    if args.reference || ds.name().to_lowercase().contains("emotion6") {
        print_reference(&report);
    }
    Ok(Status::Ok)
}

// ------------------------------------------------------------------ synth

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SynthKind {
    Admixture,
    Hybrid,
    Artphoto,
}

/// Ground-truth sidecar written next to a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Truth {
    Admixture {
        seed: u64,
        d: usize,
        n: usize,
        noise_std: f64,
        profile: EmotionProfileMatrix,
    },
    Hybrid {
        seed: u64,
        config: HybridSynthConfig,
        map: HybridTruth,
    },
    Artphoto {
        seed: u64,
        config: ArtphotoSynthConfig,
    },
}

pub struct SynthArgs {
    pub kind: SynthKind,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub noise: Option<f64>,
    pub classes: Option<usize>,
}

pub fn synth(ctx: &Context, args: &SynthArgs) -> anyhow::Result<Status> {
    let seed = ctx.config.seed;
    let (ds, truth) = match args.kind {
        SynthKind::Admixture => {
            let (d, n, noise) = (args.d.unwrap_or(50), args.n.unwrap_or(2000), args.noise.unwrap_or(0.001));
            let (ds, profile) = synth_admixture(d, n, noise, seed)?;
            (ds, Truth::Admixture { seed, d, n, noise_std: noise, profile })
        }
        SynthKind::Hybrid => {
            let def = HybridSynthConfig::default();
            let config = HybridSynthConfig {
                n: args.n.unwrap_or(def.n),
                dimension: args.d.unwrap_or(def.dimension),
                noise: args.noise.unwrap_or(def.noise),
            };
            let (ds, map) = synth_hybrid(&config, seed)?;
            (ds, Truth::Hybrid { seed, config, map })
        }
        SynthKind::Artphoto => {
            if args.noise.is_some() {
                bail!("--noise does not apply to artphoto data");
            }
            let def = ArtphotoSynthConfig::default();
            let config = ArtphotoSynthConfig {
                n: args.n.unwrap_or(def.n),
                n_classes: args.classes.unwrap_or(def.n_classes),
                dimension: args.d.unwrap_or(def.dimension),
            };
            (synth_artphoto(&config, seed)?, Truth::Artphoto { seed, config })
        }
    };
    ctx.prepare_out("synth")?;
    let manifest = write_dataset(&ctx.out, &ds)?;
    write_json(&ctx.out.join("truth.json"), &truth)?;
    println!("wrote {} records to {}", ds.len(), manifest.display());
    if let Truth::Hybrid { map, .. } = &truth {
        for (e, f) in Emotion::ALL.iter().zip(&map.class_family) {
            println!("  {:<9} <- {}", e.name(), f.name());
        }
    }
    Ok(Status::Ok)
}
