use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use vbd_core::anomaly::{detect_all, evaluate_detector, sweep_tau, sweep_w, write_verdicts_csv};
use vbd_core::autoencoder::{train_ae, AeArchitecture, TrainConfig};
use vbd_core::crossconcat::{cross_concatenate_with, CrossConcatOptions};
use vbd_core::dataset::{
    load_csv, load_features_csv, split_binary, write_csv, write_vectors_csv, CsvOptions, LabelColumn, LabeledDataset,
    NormalizationStats,
};
use vbd_core::eval::{run_cv_experiment, stability_probe, MeanMetrics};
use vbd_core::model_io::StoredModel;
use vbd_core::vbd::{synth_large, synth_small, ConcatConfig};

use crate::config::{AnomalyRunConfig, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::{Algorithm, ClassFilter, Cli, Command, Format, GlobalArgs, InputArgs, VERSION};

pub(crate) fn dispatch(cli: &Cli) -> CliResult<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Synth { input, algorithm, c, u } => synth(g, input, *algorithm, *c, *u),
        Command::Project { input, max_pairs } => project(g, input, *max_pairs),
        Command::TrainAe {
            input,
            architecture,
            preset,
            vbd,
            epochs,
            learning_rate,
            batch_size,
            validation_fraction,
            report,
        } => {
            let cfg = TrainConfig {
                epochs: *epochs,
                learning_rate: *learning_rate,
                batch_size: *batch_size,
                seed: g.seed.unwrap_or(0),
                validation_fraction: *validation_fraction,
                ..TrainConfig::default()
            };
            let plan = Plan {
                architecture: architecture.as_deref(),
                preset: preset.as_deref(),
                vbd: *vbd,
            };
            train(g, input, plan, &cfg, report.as_deref())
        }
        Command::Anomaly { u, w, tau } => anomaly(g, *u, *w, *tau),
        Command::Experiment => experiment(g),
        Command::Stability { repeats } => stability(g, *repeats),
    }
}

fn tool() -> Value {
    json!({"name": "vbd", "version": VERSION})
}

/// CSV comment lines naming the tool and the resolved configuration.
fn preamble(config: &Value) -> Vec<String> {
    vec![format!("tool: vbd {VERSION}"), format!("config: {config}")]
}

/// A JSON artifact: tool, config and one payload field.
fn document(config: &Value, key: &str, body: Value) -> CliResult<Vec<u8>> {
    let mut doc = serde_json::Map::new();
    doc.insert("tool".into(), tool());
    doc.insert("config".into(), config.clone());
    doc.insert(key.into(), body);
    let mut text = serde_json::to_string_pretty(&Value::Object(doc)).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn to_value<T: serde::Serialize>(v: &T) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| CliError::Runtime(e.to_string()))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Write to `--output` or, without one, to stdout. Returns whether stdout
/// was used.
fn emit(output: Option<&Path>, bytes: &[u8]) -> CliResult<bool> {
    match output {
        Some(p) => write_file(p, bytes).map(|_| false),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Runtime(format!("stdout: {e}")))?;
            Ok(true)
        }
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(buf)
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn require_input(g: &GlobalArgs) -> CliResult<&Path> {
    g.input
        .as_deref()
        .ok_or_else(|| CliError::Validation("--input is required".into()))
}

fn input_json(g: &GlobalArgs, a: &InputArgs) -> Value {
    json!({
        "input": g.input.as_deref().map(path_str),
        "label_column": a.label_column,
        "positive_label": a.positive_label,
        "class": format!("{:?}", a.class).to_lowercase(),
        "has_header": !a.no_header,
        "normalize": a.normalize,
    })
}

fn csv_options(a: &InputArgs, column: &str) -> CliResult<CsvOptions> {
    let column = column.parse::<LabelColumn>()?;
    let opts = CsvOptions::new(column, a.positive_label.clone());
    Ok(if a.no_header { opts.without_header() } else { opts })
}

/// Rows (and labels, when a label column was named) from `--input`.
type Rows = (Vec<Vec<f64>>, Option<Vec<u8>>);

fn load_rows(g: &GlobalArgs, a: &InputArgs) -> CliResult<Rows> {
    let path = require_input(g)?;
    let (mut rows, labels) = match &a.label_column {
        Some(col) => {
            let data = load_csv(path, &csv_options(a, col)?)?;
            let keep = match a.class {
                ClassFilter::All => None,
                ClassFilter::Positive => Some(1),
                ClassFilter::Negative => Some(0),
            };
            let (rows, labels) = data.into_parts();
            let (rows, labels): (Vec<_>, Vec<_>) = rows
                .into_iter()
                .zip(labels)
                .filter(|(_, l)| keep.is_none_or(|k| k == *l))
                .unzip();
            (rows, Some(labels))
        }
        None => {
            if a.class != ClassFilter::All {
                return Err(CliError::Validation("--class needs --label-column".into()));
            }
            (load_features_csv(path, !a.no_header)?, None)
        }
    };
    if rows.is_empty() {
        return Err(CliError::Validation(format!("{}: no data rows", path.display())));
    }
    if a.normalize {
        rows = NormalizationStats::fit(&rows)?.apply_rows(&rows)?;
    }
    Ok((rows, labels))
}

fn announce(to_stdout: bool, msg: String) {
    if to_stdout {
        eprintln!("{msg}");
    } else {
        println!("{msg}");
    }
}

fn synth(g: &GlobalArgs, a: &InputArgs, algorithm: Algorithm, c: usize, u: Option<usize>) -> CliResult<()> {
    let (rows, _) = load_rows(g, a)?;
    let seed = g.seed.unwrap_or(0);
    let vbd = match algorithm {
        Algorithm::Small => synth_small(&rows)?,
        Algorithm::Large => {
            let size = u.ok_or_else(|| CliError::Validation("--u is required for the large algorithm".into()))?;
            synth_large(&rows, &ConcatConfig { factor: c, size, seed })?
        }
    };
    let mut config = input_json(g, a);
    config["command"] = json!("synth");
    config["algorithm"] = json!(format!("{algorithm:?}").to_lowercase());
    config["c"] = json!(if algorithm == Algorithm::Small { 2 } else { c });
    config["u"] = json!(u);
    config["seed"] = json!(seed);
    let bytes = match g.format.unwrap_or(Format::Csv) {
        Format::Csv => csv_bytes(|b| write_vectors_csv(b, &vbd.vectors, None, &preamble(&config)))?,
        Format::Json => document(
            &config,
            "vbd",
            json!({"rows": vbd.len(), "dim": vbd.dim(), "vectors": vbd.vectors}),
        )?,
    };
    let stdout = emit(g.output.as_deref(), &bytes)?;
    announce(stdout, format!("{} rows of dimension {}", vbd.len(), vbd.dim()));
    Ok(())
}

fn project(g: &GlobalArgs, a: &InputArgs, max_pairs: Option<usize>) -> CliResult<()> {
    let mut a = a.clone();
    a.label_column.get_or_insert_with(|| "class".into());
    if a.class != ClassFilter::All {
        return Err(CliError::Validation("--class cannot be used with project".into()));
    }
    let (rows, labels) = load_rows(g, &a)?;
    let data = LabeledDataset::new(rows, labels.expect("label column set"))?;
    let split = split_binary(&data)?;
    let pair = cross_concatenate_with(&split.minority, &split.majority, &CrossConcatOptions { max_pairs })?;
    let projected = pair.to_labeled();
    let mut config = input_json(g, &a);
    config["command"] = json!("project");
    config["max_pairs"] = json!(max_pairs);
    config["minority_label"] = json!(split.minority_label);
    let bytes = match g.format.unwrap_or(Format::Csv) {
        Format::Csv => csv_bytes(|b| write_csv(b, &projected, &preamble(&config)))?,
        Format::Json => document(
            &config,
            "projection",
            json!({
                "minority": split.minority.len(),
                "majority": split.majority.len(),
                "rows_per_class": pair.len(),
                "projected_minority": pair.projected_minority,
                "projected_majority": pair.projected_majority,
            }),
        )?,
    };
    let stdout = emit(g.output.as_deref(), &bytes)?;
    announce(
        stdout,
        format!(
            "{} rows of dimension {} ({} minority x {} majority)",
            projected.instance_count(),
            projected.feature_count(),
            split.minority.len(),
            split.majority.len()
        ),
    );
    Ok(())
}

struct Plan<'a> {
    architecture: Option<&'a str>,
    preset: Option<&'a str>,
    vbd: bool,
}

fn parse_architecture(s: &str) -> CliResult<AeArchitecture> {
    let sizes = s
        .split(',')
        .map(|w| w.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::field("architecture", format!("expected comma-separated widths, got '{s}'")))?;
    AeArchitecture::new(sizes).map_err(|e| CliError::field("architecture", e))
}

fn train(g: &GlobalArgs, a: &InputArgs, plan: Plan, cfg: &TrainConfig, report: Option<&Path>) -> CliResult<()> {
    let output = g
        .output
        .as_deref()
        .ok_or_else(|| CliError::Validation("--output is required for train-ae".into()))?;
    cfg.validate()?;
    let (rows, _) = load_rows(g, a)?;
    let d = rows[0].len();
    let arch = match (plan.architecture, plan.preset) {
        (Some(s), _) => parse_architecture(s)?,
        (None, Some(name)) => AeArchitecture::preset(name, plan.vbd)
            .ok_or_else(|| CliError::field("preset", format!("unknown preset '{name}'")))?,
        (None, None) if plan.vbd => AeArchitecture::default_for(d)?.doubled(),
        (None, None) => AeArchitecture::default_for(d)?,
    };
    let data = if plan.vbd { synth_small(&rows)?.vectors } else { rows };
    if arch.input_dim() != data[0].len() {
        return Err(CliError::field(
            "architecture",
            format!(
                "input width {} does not match data dimension {}",
                arch.input_dim(),
                data[0].len()
            ),
        ));
    }
    let (model, rep) = train_ae(&data, &arch, cfg)?;
    let mut config = input_json(g, a);
    config["command"] = json!("train-ae");
    config["architecture"] = json!(arch.layer_sizes());
    config["vbd"] = json!(plan.vbd);
    config["train"] = to_value(cfg)?;
    let meta = json!({"tool": tool(), "config": config});
    let model_json = StoredModel::Autoencoder(model).to_json_with(Some(meta))?;
    write_file(output, (model_json + "\n").as_bytes())?;
    if let Some(path) = report {
        let bytes = match g.format.unwrap_or(Format::Csv) {
            Format::Csv => csv_bytes(|b| rep.write_csv(b, &preamble(&config)))?,
            Format::Json => document(&config, "report", to_value(&rep)?)?,
        };
        write_file(path, &bytes)?;
    }
    let last = |v: &[f64]| v.last().map_or("n/a".to_string(), |x| format!("{x:.6}"));
    println!(
        "trained {:?} on {} rows for {} epochs: train loss {}, validation loss {}",
        arch.layer_sizes(),
        data.len(),
        cfg.epochs,
        last(&rep.train_loss),
        last(&rep.val_loss)
    );
    Ok(())
}

fn require_config(g: &GlobalArgs) -> CliResult<&Path> {
    g.config
        .as_deref()
        .ok_or_else(|| CliError::Validation("--config is required".into()))
}

fn anomaly(g: &GlobalArgs, u: Option<usize>, w: Option<usize>, tau: Option<f64>) -> CliResult<()> {
    let mut cfg = AnomalyRunConfig::load(require_config(g)?)?;
    if let Some(u) = u {
        cfg.u = u;
    }
    if let Some(w) = w {
        cfg.w = w;
    }
    if tau.is_some() {
        cfg.tau = tau;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.output {
        cfg.output_dir = o.clone();
    }
    cfg.check()?;
    let opts = cfg.csv_options()?;
    let train = load_csv(&cfg.train_path, &opts)?.rows_with_label(1);
    if train.is_empty() {
        return Err(CliError::field(
            "train",
            format!("no rows labeled '{}'", cfg.normal_label),
        ));
    }
    let test = load_csv(&cfg.test_path, &opts)?;
    if test.is_empty() {
        return Err(CliError::field("test", "test file has no rows"));
    }
    let stats = NormalizationStats::fit(&train)?;
    let train = stats.apply_rows(&train)?;
    let test_rows = stats.apply_rows(test.features())?;
    let is_normal: Vec<bool> = test.labels().iter().map(|&l| l == 1).collect();
    let d = train[0].len();

    let arch = match &cfg.architecture {
        Some(a) => AeArchitecture::new(a.clone())?,
        None => AeArchitecture::default_for(d)?.doubled(),
    };
    if arch.input_dim() != 2 * d {
        return Err(CliError::field(
            "architecture",
            format!("input width {} must be twice the feature count {d}", arch.input_dim()),
        ));
    }
    let vbd = synth_small(&train)?;
    let (model, _) = train_ae(&vbd.vectors, &arch, &cfg.train_config(cfg.epochs))?;
    let verdicts = detect_all(&model, &train, &test_rows, &cfg.detector())?;

    let (baseline, _) = train_ae(
        &train,
        &AeArchitecture::default_for(d)?,
        &cfg.train_config(cfg.baseline_epochs),
    )?;
    let errors = test_rows
        .iter()
        .map(|t| baseline.reconstruction_error(t))
        .collect::<vbd_core::Result<Vec<f64>>>()?;

    let both = is_normal.contains(&true) && is_normal.contains(&false);
    let flagged: Vec<bool> = verdicts.iter().map(|v| v.is_anomaly).collect();
    let (vbd_metrics, sweep, tau_used, base_metrics) = if both {
        let vbd_metrics = evaluate_detector(&is_normal, &flagged)?;
        let sweep = sweep_w(&verdicts, &is_normal)?;
        let (tau_used, base_metrics) = match cfg.tau {
            Some(t) => {
                let f: Vec<bool> = errors.iter().map(|&e| e > t).collect();
                (t, evaluate_detector(&is_normal, &f)?)
            }
            None => sweep_tau(&errors, &is_normal)?,
        };
        (Some(vbd_metrics), Some(sweep), Some(tau_used), Some(base_metrics))
    } else {
        (None, None, cfg.tau, None)
    };

    let config = cfg.to_json();
    let dir = &cfg.output_dir;
    let verdict_csv = csv_bytes(|b| write_verdicts_csv(b, &verdicts, Some(&is_normal), &preamble(&config)))?;
    write_file(&dir.join("verdicts.csv"), &verdict_csv)?;
    let sweep_json: Option<Vec<Value>> = sweep
        .as_ref()
        .map(|s| s.iter().map(|(w, m)| json!({"w": w, "metrics": m})).collect());
    let body = json!({
        "u": cfg.u,
        "w": cfg.w,
        "test_rows": test_rows.len(),
        "normal_rows": is_normal.iter().filter(|n| **n).count(),
        "vbd": vbd_metrics,
        "w_sweep": sweep_json,
        "traditional": {"tau": tau_used, "tau_chosen_by_sweep": cfg.tau.is_none(), "metrics": base_metrics},
    });
    write_file(&dir.join("metrics.json"), &document(&config, "report", body)?)?;

    println!("thresholds: u={} w={}", cfg.u, cfg.w);
    match (&vbd_metrics, &base_metrics) {
        (Some(v), Some(b)) => {
            println!(
                "vbd          precision {:.4} recall {:.4} f1 {:.4}",
                v.precision, v.recall, v.f1
            );
            println!(
                "traditional  precision {:.4} recall {:.4} f1 {:.4} (tau {:.6})",
                b.precision,
                b.recall,
                b.f1,
                tau_used.unwrap_or(f64::NAN)
            );
        }
        _ => println!(
            "{} of {} test rows flagged",
            flagged.iter().filter(|f| **f).count(),
            flagged.len()
        ),
    }
    println!("wrote {}", path_str(dir));
    Ok(())
}

fn load_experiment(g: &GlobalArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(require_config(g)?)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.output {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.4}"))
}

fn print_summary(
    format: Format,
    method: &str,
    classifier: &str,
    mean: &MeanMetrics,
    std: &MeanMetrics,
) -> CliResult<()> {
    match format {
        Format::Json => {
            let v = json!({"method": method, "classifier": classifier, "mean": mean, "std": std});
            println!(
                "{}",
                serde_json::to_string_pretty(&v).map_err(|e| CliError::Runtime(e.to_string()))?
            );
        }
        Format::Csv => {
            println!("method,classifier,precision,precision_std,recall,recall_std,f1,f1_std,auc,auc_std");
            println!(
                "{method},{classifier},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{},{}",
                mean.precision,
                std.precision,
                mean.recall,
                std.recall,
                mean.f1,
                std.f1,
                fmt_opt(mean.auc),
                fmt_opt(std.auc)
            );
        }
    }
    Ok(())
}

fn experiment(g: &GlobalArgs) -> CliResult<()> {
    let cfg = load_experiment(g)?;
    let data = cfg.dataset.load()?;
    let result = run_cv_experiment(&data, &cfg.spec())?;
    let config = cfg.to_json();
    let dir: PathBuf = cfg.output_dir.clone();
    write_file(
        &dir.join("result.json"),
        &document(&config, "result", to_value(&result)?)?,
    )?;
    let folds = csv_bytes(|b| result.write_fold_csv(b, &preamble(&config)))?;
    write_file(&dir.join("folds.csv"), &folds)?;
    print_summary(
        g.format.unwrap_or(Format::Csv),
        cfg.method.name(),
        cfg.classifier.kind.name(),
        &result.mean,
        &result.std,
    )?;
    eprintln!("wrote {}", path_str(&dir));
    Ok(())
}

fn stability(g: &GlobalArgs, repeats: Option<usize>) -> CliResult<()> {
    let mut cfg = load_experiment(g)?;
    if let Some(r) = repeats {
        if r < 2 {
            return Err(CliError::field("repeats", "must be at least 2"));
        }
        cfg.repeats = r;
    }
    let data = cfg.dataset.load()?;
    let report = stability_probe(&data, &cfg.spec(), cfg.repeats)?;
    let config = cfg.to_json();
    let path = cfg.output_dir.join("stability.json");
    write_file(&path, &document(&config, "stability", to_value(&report)?)?)?;
    let v = &report.variance;
    match g.format.unwrap_or(Format::Csv) {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&json!({"method": report.method, "variance": v}))
                .map_err(|e| CliError::Runtime(e.to_string()))?
        ),
        Format::Csv => {
            println!("method,repeats,var_precision,var_recall,var_f1,var_auc");
            println!(
                "{},{},{:e},{:e},{:e},{}",
                report.method,
                report.repeats.len(),
                v.precision,
                v.recall,
                v.f1,
                v.auc.map_or("n/a".into(), |x| format!("{x:e}"))
            );
        }
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}
