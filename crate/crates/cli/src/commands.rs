use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use kgqa_core::classifier::{self, GeneralizationLevel};
use kgqa_core::dataset::{
    self, save_generic, Dataset, DatasetError, DatasetFormat, SourceSplit, SplitManifest, SplitName,
};
use kgqa_core::metrics;
use kgqa_core::resplit::{self, SplitConfig};
use kgqa_core::sparql::{KgProfile, ProfileError};
use serde_json::{json, Value};

use crate::args::*;

/// Errors in flags or their values; exit code 1. Everything else is a data
/// error with exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Fetch(a) => fetch(cli, a),
        Command::Convert(a) => convert(cli, a),
        Command::Stats(a) => stats(cli, a),
        Command::Classify(a) => classify(cli, a),
        Command::Resplit(a) => resplit(cli, a),
        Command::Validate(a) => validate(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Profile(a) => profile(a),
    }
}

/// Guess the format of a benchmark file from its JSON shape.
pub fn infer_format(bytes: &[u8]) -> Option<DatasetFormat> {
    match serde_json::from_slice::<Value>(bytes) {
        Ok(Value::Object(map)) if map.contains_key("questions") => Some(DatasetFormat::Qald),
        Ok(Value::Object(map)) if map.contains_key("logical_form") => Some(DatasetFormat::Generic),
        Ok(Value::Array(items)) => {
            let first = items.first()?;
            if first.get("_id").is_some() {
                Some(DatasetFormat::LcQuad1)
            } else if first.get("uid").is_some() {
                Some(DatasetFormat::LcQuad2)
            } else {
                None
            }
        }
        Ok(_) => None,
        // Several JSON values, one per line.
        Err(_) => Some(DatasetFormat::Generic),
    }
}

fn parse_spec(spec: &str) -> Result<(Option<SourceSplit>, PathBuf)> {
    if let Some((prefix, path)) = spec.split_once('=') {
        if let Ok(split) = prefix.parse::<SourceSplit>() {
            return Ok((Some(split), PathBuf::from(path)));
        }
    }
    if spec.is_empty() {
        return Err(usage("empty input path"));
    }
    Ok((None, PathBuf::from(spec)))
}

fn load_one(spec: &str, format: Option<DatasetFormat>) -> Result<Dataset> {
    let (split, path) = parse_spec(spec)?;
    let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    let format = match format {
        Some(f) => f,
        None => infer_format(&bytes)
            .ok_or_else(|| usage(format!("cannot infer the format of {}; pass --format", path.display())))?,
    };
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    let mut ds = format
        .load(&bytes, split.unwrap_or_default(), name)
        .with_context(|| format!("loading {} as {format}", path.display()))?;
    if let (Some(split), DatasetFormat::Generic) = (split, format) {
        for r in &mut ds.records {
            r.source_split = split;
        }
    }
    tracing::info!(path = %path.display(), %format, records = ds.len(), "loaded");
    Ok(ds)
}

/// Load and pool inputs. Ids that collide across files are qualified with
/// their source split.
fn load_inputs(specs: &[String], format: Option<DatasetFormat>) -> Result<Dataset> {
    let parts = specs
        .iter()
        .map(|s| load_one(s, format))
        .collect::<Result<Vec<_>>>()?;
    let name = parts.first().map(|p| p.name.clone()).unwrap_or_default();
    if parts.len() == 1 {
        return Ok(parts.into_iter().next().unwrap());
    }
    match Dataset::merge(name.clone(), parts.clone()) {
        Ok(ds) => Ok(ds),
        Err(DatasetError::DuplicateId(id)) => {
            tracing::warn!(%id, "ids collide across inputs; prefixing ids with their split");
            let mut parts = parts;
            for p in &mut parts {
                p.qualify_ids();
            }
            Dataset::merge(name, parts).context("ids still collide after qualifying them with their split")
        }
        Err(e) => Err(e.into()),
    }
}

fn resolve_profile(cli: &Cli, dataset: &Dataset) -> Result<KgProfile> {
    let name = cli.profile.as_deref().unwrap_or(&dataset.kg_profile_name);
    match KgProfile::resolve(name) {
        Ok(p) => Ok(p),
        Err(e @ ProfileError::Unknown(_)) => Err(usage(e.to_string())),
        Err(e) => Err(e.into()),
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn fetch(cli: &Cli, a: &FetchArgs) -> Result<ExitCode> {
    let catalog = match &a.catalog {
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            dataset::load_catalog(&bytes)?
        }
        None => dataset::builtin_catalog(),
    };
    let known: HashSet<&str> = catalog.iter().map(|e| e.name.as_str()).collect();
    if let Some(bad) = a.names.iter().find(|n| !known.contains(n.as_str())) {
        let mut names: Vec<_> = known.into_iter().collect();
        names.sort_unstable();
        return Err(usage(format!("unknown catalog entry '{bad}' (known: {})", names.join(", "))));
    }
    let selected: Vec<_> = catalog
        .iter()
        .filter(|e| a.names.is_empty() || a.names.contains(&e.name))
        .collect();

    let mut out = String::new();
    if a.list {
        for e in &selected {
            for src in &e.download_urls {
                out.push_str(&format!("{}\t{}\t{}\t{}\n", e.name, e.format, src.split, src.url));
            }
        }
        write_output(None, out.as_bytes())?;
        return Ok(ExitCode::SUCCESS);
    }

    let cache = cli.cache_dir.clone().unwrap_or_else(dataset::default_cache_dir);
    for e in selected {
        for f in dataset::fetch(e, &cache, &dataset::FileOrHttp)? {
            let path = match &a.export {
                Some(dir) => {
                    let target = dir.join(&e.name).join(format!("{}.json", f.split));
                    fs::create_dir_all(target.parent().unwrap())?;
                    fs::copy(&f.path, &target).with_context(|| format!("copying to {}", target.display()))?;
                    target
                }
                None => f.path,
            };
            out.push_str(&format!("{}\t{}\t{}\n", e.name, f.split, path.display()));
        }
    }
    write_output(None, out.as_bytes())?;
    Ok(ExitCode::SUCCESS)
}

fn convert(cli: &Cli, a: &ConvertArgs) -> Result<ExitCode> {
    let ds = load_inputs(&a.input, cli.format)?;
    write_output(a.out.as_deref(), &save_generic(&ds))?;
    Ok(ExitCode::SUCCESS)
}

fn stats(cli: &Cli, a: &StatsArgs) -> Result<ExitCode> {
    let train = load_inputs(&a.train, cli.format)?;
    let test = load_inputs(&a.test, cli.format)?;
    let profile = resolve_profile(cli, &test)?;
    let s = classifier::stats(&test.records, &train.records, &profile)?;
    let body = match a.report_format {
        ReportFormat::Table => s.to_table(),
        ReportFormat::Csv => s.to_csv(),
        ReportFormat::Json => format!("{}\n", serde_json::to_string_pretty(&s)?),
    };
    write_output(None, body.as_bytes())?;
    Ok(ExitCode::SUCCESS)
}

fn classify(cli: &Cli, a: &ClassifyArgs) -> Result<ExitCode> {
    let train = load_inputs(&a.train, cli.format)?;
    let test = load_inputs(&a.test, cli.format)?;
    let profile = resolve_profile(cli, &test)?;
    let mut out = Vec::new();
    for (id, label) in classifier::classify(&test.records, &train.records, &profile) {
        let line = match label {
            Ok(level) => json!({ "id": id, "level": level }),
            Err(e) => json!({ "id": id, "level": null, "excluded": e.reason }),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.push(b'\n');
    }
    write_output(a.out.as_deref(), &out)?;
    Ok(ExitCode::SUCCESS)
}

fn resplit(cli: &Cli, a: &ResplitArgs) -> Result<ExitCode> {
    let config = SplitConfig {
        r_zero: a.r_zero,
        r_compo: a.r_compo,
        r_iid: a.r_iid,
        r_dev: a.r_dev,
        seed: a.seed,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let ds = load_inputs(&a.input, cli.format)?;
    let profile = resolve_profile(cli, &ds)?;
    let result = resplit::resplit(&ds, &config, &profile)?;
    write_output(a.out.as_deref(), result.manifest.to_json_pretty().as_bytes())?;

    if let Some(dir) = &a.emit_splits {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for name in SplitName::ALL {
            let records = match name {
                SplitName::Train => &result.train,
                SplitName::Dev => &result.dev,
                SplitName::TestIid => &result.test_iid,
                SplitName::TestCompositional => &result.test_compo,
                SplitName::TestZeroShot => &result.test_zero,
            };
            let part = Dataset {
                name: ds.name.clone(),
                kg_profile_name: ds.kg_profile_name.clone(),
                records: records.clone(),
            };
            let path = dir.join(format!("{name}.jsonl"));
            fs::write(&path, save_generic(&part)).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    if !cli.quiet {
        let s = &result.manifest.splits;
        eprintln!(
            "train {}, dev {}, test_iid {}, test_compositional {}, test_zero_shot {}, excluded {}",
            s.train.len(),
            s.dev.len(),
            s.test_iid.len(),
            s.test_compositional.len(),
            s.test_zero_shot.len(),
            result.manifest.excluded.len()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(cli: &Cli, a: &ValidateArgs) -> Result<ExitCode> {
    let bytes = fs::read(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    let manifest = SplitManifest::from_json(&bytes).with_context(|| format!("parsing {}", a.manifest.display()))?;
    let ds = load_inputs(&a.input, cli.format)?;
    let profile = resolve_profile(cli, &ds)?;
    let report = resplit::check_manifest(&ds, &manifest, &profile)?;
    let listed: HashSet<&str> = manifest.all_ids().map(String::as_str).collect();
    let unassigned: Vec<&str> = ds
        .records
        .iter()
        .map(|r| r.id.as_str())
        .filter(|id| !listed.contains(id))
        .collect();
    if !unassigned.is_empty() {
        tracing::warn!(count = unassigned.len(), "dataset records missing from the manifest");
    }

    let body = match a.report_format {
        ReportFormat::Json => format!(
            "{}\n",
            serde_json::to_string_pretty(&json!({
                "checked": report.checked,
                "violations": report.violations,
                "unassigned": unassigned,
            }))?
        ),
        ReportFormat::Table | ReportFormat::Csv => {
            let mut s = String::new();
            for v in &report.violations {
                let actual = v.actual.map_or("unclassifiable".to_string(), |l| l.to_string());
                s.push_str(&format!("{}: filed as {}, is {}\n", v.id, v.claimed, actual));
            }
            s.push_str(&format!("{} violations\n", report.violations.len()));
            s
        }
    };
    write_output(None, body.as_bytes())?;
    Ok(if report.is_clean() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<ExitCode> {
    let gold = load_inputs(&a.gold, cli.format)?;
    let bytes = fs::read(&a.predictions).with_context(|| format!("reading {}", a.predictions.display()))?;
    let predictions = metrics::load_predictions(&bytes)?;

    let mut levels: HashMap<String, GeneralizationLevel> = HashMap::new();
    if let Some(path) = &a.manifest {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let manifest = SplitManifest::from_json(&bytes)?;
        for level in GeneralizationLevel::ALL {
            for id in manifest.splits.get(SplitName::for_level(level)) {
                levels.insert(id.clone(), level);
            }
        }
    } else {
        let train = load_inputs(&a.train, cli.format)?;
        let profile = resolve_profile(cli, &gold)?;
        for (id, label) in classifier::classify(&gold.records, &train.records, &profile) {
            if let Ok(level) = label {
                levels.insert(id, level);
            }
        }
    }

    let known: HashSet<&str> = gold.records.iter().map(|r| r.id.as_str()).collect();
    if let Some(id) = levels.keys().find(|id| !known.contains(id.as_str())) {
        bail!(DatasetError::UnknownId(id.clone()));
    }
    if let Some(p) = predictions.iter().find(|p| !known.contains(p.question_id.as_str())) {
        bail!(metrics::MetricsError::UnknownQuestionId(p.question_id.clone()));
    }
    let evaluated: Vec<_> = gold
        .records
        .iter()
        .filter(|r| levels.contains_key(&r.id))
        .cloned()
        .collect();
    let in_scope: HashSet<&str> = evaluated.iter().map(|r| r.id.as_str()).collect();
    let skipped = gold.len() - evaluated.len();
    if skipped > 0 {
        tracing::info!(skipped, "gold questions without a level are not evaluated");
    }
    let predictions: Vec<_> = predictions
        .into_iter()
        .filter(|p| in_scope.contains(p.question_id.as_str()))
        .collect();

    let report = metrics::evaluate(&evaluated, &predictions, &levels)?;
    let body = match a.report_format {
        ReportFormat::Json => report.to_json_pretty(),
        ReportFormat::Table | ReportFormat::Csv => report.to_table(),
    };
    write_output(a.out.as_deref(), body.as_bytes())?;
    Ok(ExitCode::SUCCESS)
}

fn profile(a: &ProfileArgs) -> Result<ExitCode> {
    let p = KgProfile::builtin(&a.name).map_err(|e| usage(e.to_string()))?;
    write_output(None, p.to_json_pretty().as_bytes())?;
    Ok(ExitCode::SUCCESS)
}
