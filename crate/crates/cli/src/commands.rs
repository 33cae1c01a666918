use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use specenc::encode::{self, Representation};
use specenc::models::{default_toy_dims, toy_gradient_check, ParamSpec};
use specenc::spectrum::SplitName;
use specenc::tensor::save_tensors;
use specenc::train::{self, config_hash, prepare_dataset, PreparedData};
use specenc::{ModelConfig, ModelKind, RunHistory, TrainConfig};

use crate::checkpoint;
use crate::error::{CliError, CliResult};
use crate::report::{self, Format, Row};
use crate::runspec::RunSpec;

/// Tolerance for the finite-difference suite.
pub const GRAD_TOL: f64 = 1e-6;

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn output_dir(spec: &RunSpec, out: Option<PathBuf>) -> CliResult<PathBuf> {
    out.or_else(|| spec.output_dir.clone())
        .ok_or_else(|| CliError::validation("no output directory: pass --out or set output_dir"))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EncodeIndex {
    pub representation: Representation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<encode::BinConfig>,
    pub count: usize,
    pub entries: Vec<IndexEntry>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub file: String,
    pub label: Option<f64>,
    pub shapes: Vec<Vec<usize>>,
}

pub const INDEX: &str = "index.json";

/// Parses, preprocesses, and encodes every spectrum into `<out>/NNNNNN.spectnsr`.
pub fn encode(mut spec: RunSpec, seed: Option<u64>, out: Option<PathBuf>) -> CliResult<String> {
    if let (Some(seed), Some(syn)) = (seed, spec.data.synthetic.as_mut()) {
        syn.seed = seed;
    }
    spec.validate()?;
    let out = output_dir(&spec, out)?;
    let loaded = spec.load_data()?;
    let mut warnings = loaded.warnings;
    if loaded.spectra.is_empty() {
        warnings.push("input holds no spectra".into());
    }
    std::fs::create_dir_all(&out)?;

    let mut entries = Vec::with_capacity(loaded.spectra.len());
    let mut dropped = 0;
    for (i, s) in loaded.spectra.iter().enumerate() {
        if s.peaks.is_empty() {
            warnings.push(format!("spectrum '{}' has no peaks; skipped", s.id));
            continue;
        }
        let (enc, w) = encode::encode(s, spec.representation, &spec.bins)?;
        dropped += w.dropped_peaks;
        let tensors = enc.to_tensors();
        let file = format!("{i:06}.spectnsr");
        save_tensors(&out.join(&file), &tensors)?;
        entries.push(IndexEntry {
            id: s.id.clone(),
            file,
            label: s.label,
            shapes: tensors.iter().map(|t| t.shape().to_vec()).collect(),
        });
    }
    if dropped > 0 {
        warnings.push(format!("{dropped} peak(s) fell outside the bin range and were dropped"));
    }
    warnings.iter().for_each(|w| warn(w));
    let index = EncodeIndex {
        representation: spec.representation,
        bins: (spec.representation == Representation::Binned).then_some(spec.bins),
        count: entries.len(),
        entries,
        warnings,
    };
    write_json(&out.join(INDEX), &index)?;
    Ok(format!("encoded {} spectra into {}\n", index.count, out.display()))
}

fn prepare(spec: &RunSpec) -> CliResult<PreparedData> {
    let loaded = spec.load_data()?;
    loaded.warnings.iter().for_each(|w| warn(w));
    let split = spec.split(&loaded.spectra)?;
    let data = prepare_dataset(&loaded.spectra, &split, spec.representation, &spec.bins)?;
    data.warnings.iter().for_each(|w| warn(w));
    Ok(data)
}

fn thread_count() -> usize {
    std::env::var("SPECENC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const HISTORY: &str = "history.json";
pub const CHECKPOINT_DIR: &str = "checkpoint";

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    model: &'a ModelConfig,
    seeds: &'a [u64],
    test: &'a Row,
}

/// Trains one replicate per seed and writes histories, checkpoints, and the
/// aggregate test-metric table.
pub fn train(mut spec: RunSpec, seed: Option<u64>, out: Option<PathBuf>, format: Format) -> CliResult<String> {
    if let Some(seed) = seed {
        spec.seeds = vec![seed];
    }
    spec.validate()?;
    let model = spec.model()?.clone();
    let out = output_dir(&spec, out)?;
    let data = prepare(&spec)?;
    if data.test.len() < 2 {
        return Err(CliError::validation("test split needs at least 2 spectra"));
    }
    std::fs::create_dir_all(&out)?;

    let seeds = spec.seeds.clone();
    let results: Mutex<Vec<Option<CliResult<RunHistory>>>> = Mutex::new((0..seeds.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let run_one = |i: usize| -> CliResult<RunHistory> {
        let cfg = TrainConfig { seed: seeds[i], ..spec.train.clone() };
        let outcome = train::train(&model, &data, &cfg)?;
        let dir = seed_dir(&out, seeds[i]);
        std::fs::create_dir_all(&dir)?;
        write_json(&dir.join(HISTORY), &outcome.history)?;
        let manifest = checkpoint::new_manifest(&model, seeds[i], &cfg, &config_hash(&model, &cfg), &spec);
        checkpoint::save(&dir.join(CHECKPOINT_DIR), &manifest, &outcome.params)?;
        Ok(outcome.history)
    };
    std::thread::scope(|s| {
        for _ in 0..thread_count().min(seeds.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= seeds.len() {
                    break;
                }
                let r = run_one(i);
                results.lock().expect("no poisoned runs")[i] = Some(r);
            });
        }
    });
    let histories = results
        .into_inner()
        .expect("no poisoned runs")
        .into_iter()
        .map(|r| r.expect("every seed ran"))
        .collect::<CliResult<Vec<_>>>()?;

    let tests: Vec<_> = histories.iter().filter_map(|h| h.test).collect();
    let row = Row::from_runs(model.kind().as_str(), model.param_count(), &tests);
    std::fs::write(out.join(SUMMARY_CSV), report::csv_table(std::slice::from_ref(&row)))?;
    write_json(&out.join(SUMMARY_JSON), &Summary { model: &model, seeds: &seeds, test: &row })?;
    Ok(report::render(&[row], format))
}

/// Metrics of a saved checkpoint on one split of the data it was trained on.
pub fn eval(checkpoint_dir: &Path, split: &str, format: Format) -> CliResult<String> {
    let which: SplitName = split.parse()?;
    let (manifest, params) = checkpoint::load(checkpoint_dir)?;
    let data = prepare(&manifest.runspec)?;
    let metrics = train::evaluate(&manifest.model, &params, data.split(which))?;
    let row = Row::from_runs(manifest.model.kind().as_str(), manifest.model.param_count(), &[metrics]);
    Ok(report::render(&[row], format))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GradReport {
    pub model: ModelKind,
    pub dims: Vec<usize>,
    pub seed: u64,
    pub max_rel_error: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub evaluations: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// Runs the toy finite-difference check; the report is printed even when the
/// check fails (the error then carries only the verdict).
pub fn gradcheck(kind: &str, dims: Option<Vec<usize>>, seed: u64, fault: bool, format: Format) -> CliResult<(String, bool)> {
    let kind: ModelKind = kind.parse()?;
    let dims = dims.unwrap_or_else(|| default_toy_dims(kind));
    let rep = toy_gradient_check(kind, &dims, seed, fault)?;
    let names = specenc::models::toy_config(kind, &dims)?.param_specs();
    let g = GradReport {
        model: kind,
        dims,
        seed,
        max_rel_error: rep.max_rel_error,
        worst_tensor: names[rep.worst_input].name.clone(),
        worst_index: rep.worst_index,
        evaluations: rep.evaluations,
        tolerance: GRAD_TOL,
        pass: rep.passes(GRAD_TOL),
    };
    let text = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&g)?;
            s.push('\n');
            s
        }
        Format::Csv => format!(
            "model,dims,seed,max_rel_error,worst_tensor,worst_index,evaluations,pass\n{},{},{},{:e},{},{},{},{}\n",
            g.model,
            g.dims.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
            g.seed,
            g.max_rel_error,
            g.worst_tensor,
            g.worst_index,
            g.evaluations,
            g.pass
        ),
        Format::Text => format!(
            "{} toy {:?} seed {}: max relative error {:.3e} at {}[{}] ({} evaluations) {}\n",
            g.model,
            g.dims,
            g.seed,
            g.max_rel_error,
            g.worst_tensor,
            g.worst_index,
            g.evaluations,
            if g.pass { "PASS" } else { "FAIL" }
        ),
    };
    Ok((text, g.pass))
}

/// Parameter breakdown; the JSON form reuses the checkpoint manifest's
/// `model` and `tensors` fields.
#[derive(Debug, Serialize, Deserialize)]
pub struct ParamsReport {
    pub model: ModelConfig,
    pub tensors: Vec<ParamSpec>,
    pub total: usize,
}

pub fn params(model: Option<&str>, spec: Option<&Path>, config: Option<&Path>, format: Format) -> CliResult<String> {
    let cfg = match (model, spec, config) {
        (Some(kind), None, None) => ModelConfig::default_for(kind.parse()?),
        (None, Some(path), None) => RunSpec::load(path)?.model()?.clone(),
        (None, None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?
        }
        _ => return Err(CliError::validation("give exactly one of --model, --spec, --config")),
    };
    cfg.validate()?;
    let report = ParamsReport { tensors: cfg.param_specs(), total: cfg.param_count(), model: cfg };
    Ok(match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report)?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::from("name,shape,numel\n");
            for t in &report.tensors {
                let shape: Vec<String> = t.shape.iter().map(usize::to_string).collect();
                s.push_str(&format!("{},{},{}\n", t.name, shape.join("x"), t.numel()));
            }
            s.push_str(&format!("total,,{}\n", report.total));
            s
        }
        Format::Text => {
            let w = report.tensors.iter().map(|t| t.name.len()).max().unwrap_or(0).max(5);
            let mut s = String::new();
            for t in &report.tensors {
                s.push_str(&format!("{:<w$}  {:>14}  {:>10}\n", t.name, format!("{:?}", t.shape), t.numel()));
            }
            s.push_str(&format!("{:<w$}  {:>14}  {:>10}\n", "total", "", report.total));
            s
        }
    })
}
