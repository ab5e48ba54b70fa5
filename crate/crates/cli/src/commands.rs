use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use pfl_core::classify::{AnnModel, AnnParams, ConfusionMatrix, KnnModel, Metric, SplitSpec, Task, TaskData};
use pfl_core::classify::{patterns, split};
use pfl_core::io::{
    read_curve, read_json, read_labels, read_series, write_atomic, write_confusion, write_curve, write_json,
    write_labels, write_patterns, write_series, write_uq,
};
use pfl_core::labeling::{label_binary, label_location9, label_multi3, label_multi4, LabelScheme, LabelVector};
use pfl_core::mesh::{
    build_specimen, parse_mesh_text, select_sensors, write_mesh_text, GridSpec, Mesh, SensorSet, SpecimenParams,
    DESK_EDGE, PRODUCTION_EDGE,
};
use pfl_core::sensing::PhiSeries;
use pfl_core::timestepper::{run_case, CaseConfig, StopReason};
use pfl_core::uq::{derive_seed, mc_accuracy_on, Algorithm, UqSpec};
use pfl_core::Error;

use crate::manifest::Recorder;
use crate::{DataArgs, LabelArgs, MetricKind, ModelKind, ReportArgs, SimulateArgs, TaskKind, TrainEvalArgs, UqArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    /// 2 for bad invocations and configurations, 3 for numerical failures,
    /// 4 for bad data.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(Error::Config(_) | Error::Parameter(_)) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} {} does not exist", path.display())))
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Core(e.into()))
}

/// Everything `simulate` needs besides the mesh; written as `config.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub case: CaseConfig,
    #[serde(default)]
    pub specimen: SpecimenParams,
    #[serde(default = "production_edge")]
    pub edge: f64,
}

fn production_edge() -> f64 {
    PRODUCTION_EDGE
}

/// Summary of a simulation, written as `run.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub case_id: Option<u8>,
    pub steps: usize,
    pub nodes: usize,
    pub elements: usize,
    pub sensors: usize,
    pub stop_reason: StopReason,
    pub failure_time: Option<f64>,
    pub peak_force: f64,
    pub peak_force_time: f64,
}

fn parse_resolution(s: &str) -> Result<f64> {
    match s {
        "desk" => Ok(DESK_EDGE),
        "production" => Ok(PRODUCTION_EDGE),
        other => match other.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
            _ => Err(usage(format!("resolution must be desk, production or a positive length, got '{other}'"))),
        },
    }
}

pub fn simulate(a: &SimulateArgs, argv: &[String]) -> Result<()> {
    let mut rec = Recorder::new("simulate", argv);
    let mut cfg = match (&a.config, a.case) {
        (Some(path), _) => {
            require_file(path, "config")?;
            rec.input(path);
            read_json::<RunConfig>(path)?
        }
        (None, Some(id)) => {
            RunConfig { case: CaseConfig::for_case(id)?, specimen: SpecimenParams::default(), edge: PRODUCTION_EDGE }
        }
        (None, None) => return Err(usage("either --case or --config is required")),
    };
    if let Some(r) = &a.resolution {
        cfg.edge = parse_resolution(r)?;
    }
    if let Some(dt) = a.dt {
        cfg.case.dt = dt;
    }
    if let Some(v) = a.pull_rate {
        cfg.case.pull_rate = v;
    }
    if a.continue_after_failure {
        cfg.case.stop.continue_after_failure = true;
    }
    cfg.case.validate()?;
    rec.config(&cfg);

    let (mesh, sensors) = match &a.mesh {
        Some(path) => {
            require_file(path, "mesh")?;
            rec.input(path);
            let text = fs::read_to_string(path).map_err(Error::from)?;
            let parsed = parse_mesh_text(&text)?;
            let sensors = match parsed.sets.get("sensors") {
                Some(ids) => SensorSet {
                    node_ids: ids.clone(),
                    layout_descriptor: format!("SET sensors of {}", path.display()),
                    landmarks: Vec::new(),
                },
                None => select_sensors(&parsed.mesh, &GridSpec::coarse_to_fine(&cfg.specimen))?,
            };
            (parsed.mesh, sensors)
        }
        None => {
            let mesh = build_specimen(&cfg.specimen, cfg.edge)?;
            let sensors = select_sensors(&mesh, &GridSpec::coarse_to_fine(&cfg.specimen))?;
            (mesh, sensors)
        }
    };

    let record = run_case(&cfg.case, &mesh, &sensors)?;
    let series = PhiSeries::from_record(&record, &sensors)?;
    let curve = pfl_core::labeling::compute_load_curve(&record)?;
    let summary = RunSummary {
        case_id: record.case_id,
        steps: record.n_steps(),
        nodes: mesh.n_nodes(),
        elements: mesh.n_elements(),
        sensors: sensors.len(),
        stop_reason: record.stop_reason,
        failure_time: record.failure_time,
        peak_force: record.reaction.iter().copied().fold(0.0, f64::max),
        peak_force_time: record.peak_force_time(),
    };

    create_dir(&a.out)?;
    let out = |name: &str| a.out.join(name);
    write_series(&out("series.csv"), &series)?;
    write_patterns(&out("patterns.csv"), &series.to_patterns())?;
    write_curve(&out("curve.csv"), &curve)?;
    write_json(&out("sensors.json"), &sensors)?;
    write_json(&out("run.json"), &summary)?;
    write_json(&out("config.json"), &cfg)?;
    let mut files = vec!["series.csv", "patterns.csv", "curve.csv", "sensors.json", "run.json", "config.json"];
    if a.snapshot {
        write_atomic(&out("snapshot.mesh"), snapshot(&mesh, &sensors, &record.final_state).as_bytes())?;
        files.push("snapshot.mesh");
    }
    for f in files {
        rec.output(&out(f));
    }
    rec.finish(&a.out)?;
    println!(
        "case {:?}: {} steps, stop {:?}, failure {:?}, peak force {:.4e} N at {:.4} s",
        summary.case_id, summary.steps, summary.stop_reason, summary.failure_time, summary.peak_force, summary.peak_force_time
    );
    Ok(())
}

fn snapshot(mesh: &Mesh, sensors: &SensorSet, s: &pfl_core::assembly::FieldState) -> String {
    let ux: Vec<f64> = s.u.iter().step_by(2).copied().collect();
    let uy: Vec<f64> = s.u.iter().skip(1).step_by(2).copied().collect();
    write_mesh_text(
        mesh,
        &[("fixed", &mesh.fixed_set), ("loaded", &mesh.loaded_set), ("sensors", &sensors.node_ids)],
        &[("phi", &s.phi), ("fatigue", &s.fat), ("ux", &ux), ("uy", &uy)],
    )
}

/// Case id from the `run.json` next to a series file.
fn case_from_run(series: &Path) -> Result<u8> {
    let run = series.with_file_name("run.json");
    if !run.is_file() {
        return Err(usage(format!("no --case given and no run.json next to {}", series.display())));
    }
    let s: RunSummary = read_json(&run)?;
    s.case_id.ok_or_else(|| usage(format!("{} has no case id; pass --case", run.display())))
}

fn case_ids(series: &[PathBuf], given: &[u8]) -> Result<Vec<u8>> {
    if given.is_empty() {
        series.iter().map(|p| case_from_run(p)).collect()
    } else if given.len() == series.len() {
        Ok(given.to_vec())
    } else {
        Err(usage(format!("{} --case values for {} series", given.len(), series.len())))
    }
}

fn label_one(scheme: LabelScheme, series: &PhiSeries, curve: &pfl_core::labeling::LoadCurve) -> Result<LabelVector> {
    let lv = match scheme {
        LabelScheme::Binary(c) => label_binary(curve, c)?,
        LabelScheme::Multi3 => label_multi3(curve)?,
        LabelScheme::Multi4(t) => label_multi4(&series.to_patterns(), t)?,
        LabelScheme::Location9 => unreachable!("handled by the caller"),
    };
    Ok(lv)
}

pub fn label(a: &LabelArgs, argv: &[String]) -> Result<()> {
    let mut rec = Recorder::new("label", argv);
    let scheme = LabelScheme::parse(&a.scheme).map_err(|e| usage(e.to_string()))?;
    if a.series.len() != a.curve.len() {
        return Err(usage(format!("{} --series for {} --curve", a.series.len(), a.curve.len())));
    }
    for (s, c) in a.series.iter().zip(&a.curve) {
        require_file(s, "series")?;
        require_file(c, "curve")?;
        rec.input(s);
        rec.input(c);
    }
    let cases = case_ids(&a.series, &a.case)?;
    let base = if scheme == LabelScheme::Location9 {
        match LabelScheme::parse(&a.base).map_err(|e| usage(e.to_string()))? {
            b @ (LabelScheme::Multi3 | LabelScheme::Multi4(_)) => b,
            _ => return Err(usage(format!("location9 needs base multi3 or multi4, got '{}'", a.base))),
        }
    } else {
        scheme
    };
    rec.config(&(scheme, base, &cases));

    let mut times = Vec::new();
    let mut per_case = Vec::new();
    for ((s, c), &id) in a.series.iter().zip(&a.curve).zip(&cases) {
        let series = read_series(s, Some(id))?;
        let curve = read_curve(c)?;
        if series.times.len() != curve.len() {
            return Err(Error::Data(format!("{}: {} rows, curve has {}", s.display(), series.times.len(), curve.len())).into());
        }
        times.extend_from_slice(&series.times);
        per_case.push((id, label_one(base, &series, &curve)?));
    }
    let labels = if scheme == LabelScheme::Location9 {
        label_location9(&per_case)?
    } else {
        let all: Vec<u8> = per_case.iter().flat_map(|(_, lv)| lv.labels.iter().copied()).collect();
        LabelVector::new(scheme, all)?
    };

    create_dir(&a.out)?;
    let path = a.out.join("labels.csv");
    write_labels(&path, &times, &labels, &cases)?;
    rec.output(&path);
    rec.output(&path.with_extension("json"));
    rec.finish(&a.out)?;
    let mut counts = vec![0usize; labels.class_domain.len()];
    for &l in &labels.labels {
        if let Some(i) = labels.class_domain.iter().position(|&c| c == l) {
            counts[i] += 1;
        }
    }
    println!("{} rows labeled; class counts {:?} for classes {:?}", labels.len(), counts, labels.class_domain);
    Ok(())
}

/// Series and labels of `train-eval` and `uq`, joined into task data.
fn load_task(d: &DataArgs, rec: &mut Recorder) -> Result<TaskData> {
    require_file(&d.labels, "labels file")?;
    require_file(&d.labels.with_extension("json"), "labels sidecar")?;
    rec.input(&d.labels);
    let (_, labels) = read_labels(&d.labels)?;
    let meta: pfl_core::io::LabelsMeta = read_json(&d.labels.with_extension("json"))?;
    if meta.cases.len() != d.series.len() {
        return Err(usage(format!("labels cover {} case(s) but {} --series given", meta.cases.len(), d.series.len())));
    }
    let task = match labels.scheme {
        LabelScheme::Location9 => Task::Location,
        _ if meta.cases.len() == 1 => Task::Presence { case_id: meta.cases[0] },
        _ => return Err(usage("presence labels must come from a single case")),
    };
    match (d.task, task) {
        (Some(TaskKind::Presence), Task::Location) | (Some(TaskKind::Location), Task::Presence { .. }) => {
            return Err(usage("--task does not match the labels"))
        }
        _ => {}
    }
    let mut parts: Vec<Array2<f64>> = Vec::new();
    let mut sensor_ids: Option<Vec<usize>> = None;
    for (p, &id) in d.series.iter().zip(&meta.cases) {
        require_file(p, "series")?;
        rec.input(p);
        let s = read_series(p, Some(id))?;
        match &sensor_ids {
            Some(ids) if *ids != s.sensor_ids => return Err(Error::Data("series use different sensor sets".into()).into()),
            _ => sensor_ids = Some(s.sensor_ids.clone()),
        }
        parts.push(s.phi);
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    let phi = concatenate(Axis(0), &views).map_err(|e| Error::Data(e.to_string()))?;
    if phi.nrows() != labels.len() {
        return Err(Error::Data(format!("{} series rows but {} labels", phi.nrows(), labels.len())).into());
    }
    Ok(TaskData { task, phi, labels })
}

fn metric(m: MetricKind) -> Metric {
    match m {
        MetricKind::Cosine => Metric::Cosine,
        MetricKind::Euclidean => Metric::Euclidean,
    }
}

fn ann_params(d: &DataArgs) -> AnnParams {
    AnnParams { learning_rate: d.learning_rate, max_epochs: d.epochs, patience: d.patience, ..AnnParams::default() }
}

#[derive(Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
enum SavedModel<'a> {
    Knn(&'a KnnModel),
    Ann(&'a AnnModel),
}

pub fn train_eval(a: &TrainEvalArgs, seed: u64, argv: &[String]) -> Result<()> {
    let d = &a.data;
    let mut rec = Recorder::new("train-eval", argv);
    let data = load_task(d, &mut rec)?;
    let ds = data.dataset()?;
    let split_seed = derive_seed(seed, 0, 0);
    let init_seed = derive_seed(seed, 0, 1);
    rec.seed("base", seed);
    rec.seed("split", split_seed);
    let parts = split(&ds.y, &SplitSpec { comb: d.comb, seed: split_seed, ..SplitSpec::default() })?;
    let test = ds.subset(&parts.test);

    create_dir(&d.out)?;
    let model_path = d.out.join("model.json");
    let preds = match a.model {
        ModelKind::Knn => {
            rec.config(&(data.task, data.labels.scheme, d.comb, d.k, metric(d.metric)));
            let pool: Vec<usize> = parts.train.iter().chain(&parts.val).copied().collect();
            let model = KnnModel::fit(&ds.subset(&pool), d.k, metric(d.metric))?;
            write_json(&model_path, &SavedModel::Knn(&model))?;
            model.predict_all(&test.x)?
        }
        ModelKind::Ann => {
            let params = ann_params(d);
            rec.config(&(data.task, data.labels.scheme, d.comb, params));
            rec.seed("init", init_seed);
            let model = AnnModel::train(&ds.subset(&parts.train), &ds.subset(&parts.val), params, init_seed)?;
            write_json(&model_path, &SavedModel::Ann(&model))?;
            model.predict_all(&test.x)
        }
    };
    let cm = ConfusionMatrix::new(&preds, &test.y, &ds.class_domain)?;
    let cm_path = d.out.join("confusion.json");
    write_confusion(&cm_path, &cm)?;
    rec.output(&cm_path);
    rec.output(&model_path);
    rec.finish(&d.out)?;
    println!(
        "train {} val {} test {}; total accuracy {:.4}",
        parts.train.len(),
        parts.val.len(),
        parts.test.len(),
        cm.total_accuracy()
    );
    Ok(())
}

pub fn uq(a: &UqArgs, seed: u64, argv: &[String]) -> Result<()> {
    let d = &a.data;
    let mut rec = Recorder::new("uq", argv);
    if let Some(s) = a.noise_std.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
        return Err(usage(format!("noise std must be finite and >= 0, got {s}")));
    }
    if a.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    let data = load_task(d, &mut rec)?;
    let algorithms = if a.model.is_empty() {
        vec![Algorithm::Knn, Algorithm::Ann]
    } else {
        a.model
            .iter()
            .map(|m| match m {
                ModelKind::Knn => Algorithm::Knn,
                ModelKind::Ann => Algorithm::Ann,
            })
            .collect()
    };
    let spec = UqSpec {
        runs: a.runs,
        noise_stds: a.noise_std.clone(),
        task: data.task,
        scheme: data.labels.scheme,
        algorithms,
        base_seed: seed,
        comb: d.comb,
        k: d.k,
        metric: metric(d.metric),
        ann: ann_params(d),
    };
    rec.config(&spec);
    rec.seed("base", seed);
    let result = mc_accuracy_on(&spec, &data)?;
    for w in &result.warnings {
        eprintln!("pfl: warning: {w}");
    }
    create_dir(&d.out)?;
    let report = d.out.join("uq_report.csv");
    let raw = d.out.join("uq_raw.csv");
    write_uq(&report, &raw, &result)?;
    rec.output(&report);
    rec.output(&raw);
    rec.finish(&d.out)?;
    for c in &result.cells {
        println!("{} noise {}: mean {:.4} std {:.4} over {} runs", c.algorithm.name(), c.noise_std, c.mean, c.std, c.runs);
    }
    Ok(())
}

/// Directories under `root` (itself included, one level deep) holding a
/// file called `marker`, sorted by path.
fn dirs_with(root: &Path, marker: &str) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    if root.join(marker).is_file() {
        found.push(root.to_path_buf());
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(Error::from)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    found.extend(subdirs.into_iter().filter(|p| p.join(marker).is_file()));
    Ok(found)
}

fn run_name(root: &Path, dir: &Path) -> String {
    match dir.strip_prefix(root) {
        Ok(rel) if !rel.as_os_str().is_empty() => rel.to_string_lossy().replace(['/', '\\'], "_"),
        _ => root.file_name().map_or("run".into(), |n| n.to_string_lossy().into_owned()),
    }
}

const PLOT_SCRIPT: &str = r#"# Plots the tables written by `pfl report`. Needs pandas and matplotlib.
import glob
import os

import matplotlib.pyplot as plt
import pandas as pd

here = os.path.dirname(os.path.abspath(__file__))

for path in sorted(glob.glob(os.path.join(here, "*_sensors.csv"))):
    df = pd.read_csv(path)
    ax = df.plot(x="t", legend=True)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("g(phi)")
    ax.figure.savefig(path.replace(".csv", ".png"), dpi=150)
    plt.close(ax.figure)

for path in sorted(glob.glob(os.path.join(here, "*_curve.csv"))):
    df = pd.read_csv(path)
    ax = df.plot(x="u", y="f", legend=False)
    ax.set_xlabel("displacement (m)")
    ax.set_ylabel("force (N)")
    ax.figure.savefig(path.replace(".csv", ".png"), dpi=150)
    plt.close(ax.figure)

path = os.path.join(here, "accuracy_vs_noise.csv")
if os.path.exists(path):
    df = pd.read_csv(path)
    fig, ax = plt.subplots()
    for (source, alg), g in df.groupby(["source", "algorithm"]):
        ax.errorbar(g["noise_std"], g["mean_acc"], yerr=g["std_acc"], marker="o", label=f"{source} {alg}")
    ax.set_xlabel("noise std")
    ax.set_ylabel("accuracy")
    ax.legend()
    fig.savefig(path.replace(".csv", ".png"), dpi=150)
"#;

fn csv_line(fields: &[String]) -> String {
    let mut s = fields.join(",");
    s.push('\n');
    s
}

pub fn report(a: &ReportArgs, argv: &[String]) -> Result<()> {
    let mut rec = Recorder::new("report", argv);
    if !a.input.is_dir() {
        return Err(usage(format!("input directory {} does not exist", a.input.display())));
    }
    let runs = dirs_with(&a.input, "run.json")?;
    let uqs = dirs_with(&a.input, "uq_report.csv")?;
    if runs.is_empty() && uqs.is_empty() {
        return Err(usage(format!("no simulation or uq outputs under {}", a.input.display())));
    }
    create_dir(&a.out)?;
    let mut written = Vec::new();

    for dir in &runs {
        let name = run_name(&a.input, dir);
        let (series_p, curve_p, sensors_p) = (dir.join("series.csv"), dir.join("curve.csv"), dir.join("sensors.json"));
        for p in [&series_p, &curve_p, &sensors_p] {
            require_file(p, "run output")?;
            rec.input(p);
        }
        let series = read_series(&series_p, None)?;
        let sensors: SensorSet = read_json(&sensors_p)?;
        let g = patterns(&series.phi);
        let mut cols: Vec<(String, usize)> =
            sensors.landmarks.iter().filter(|(_, i)| *i < g.ncols()).map(|(n, i)| (n.clone(), *i)).collect();
        if cols.is_empty() {
            cols = (0..g.ncols()).map(|j| (format!("s{}", series.sensor_ids[j]), j)).collect();
        }
        let mut header = vec!["t".to_string()];
        header.extend(cols.iter().map(|(n, j)| format!("{n}_s{}", series.sensor_ids[*j])));
        let mut text = csv_line(&header);
        for (i, t) in series.times.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(cols.iter().map(|(_, j)| g[[i, *j]].to_string()));
            text.push_str(&csv_line(&row));
        }
        let p = a.out.join(format!("{name}_sensors.csv"));
        write_atomic(&p, text.as_bytes())?;
        written.push(p);
        let p = a.out.join(format!("{name}_curve.csv"));
        write_curve(&p, &read_curve(&curve_p)?)?;
        written.push(p);
    }

    if !uqs.is_empty() {
        let mut text = csv_line(&["source", "algorithm", "noise_std", "mean_acc", "std_acc", "runs"].map(String::from));
        for dir in &uqs {
            let p = dir.join("uq_report.csv");
            rec.input(&p);
            let body = fs::read_to_string(&p).map_err(Error::from)?;
            let mut lines = body.lines();
            if lines.next() != Some("algorithm,noise_std,mean_acc,std_acc,runs") {
                return Err(Error::Data(format!("{}: unexpected header", p.display())).into());
            }
            let source = run_name(&a.input, dir);
            for l in lines.filter(|l| !l.trim().is_empty()) {
                text.push_str(&format!("{source},{l}\n"));
            }
        }
        let p = a.out.join("accuracy_vs_noise.csv");
        write_atomic(&p, text.as_bytes())?;
        written.push(p);
    }

    let p = a.out.join("plot.py");
    write_atomic(&p, PLOT_SCRIPT.as_bytes())?;
    written.push(p);
    for p in &written {
        rec.output(p);
    }
    rec.finish(&a.out)?;
    println!("{} run(s), {} uq report(s) -> {}", runs.len(), uqs.len(), a.out.display());
    Ok(())
}
