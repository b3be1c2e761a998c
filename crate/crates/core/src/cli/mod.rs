//! Config-driven commands behind the `propnsm` binary.
//!
//! A run is described by a JSON [`RunConfig`]. `--set key=value` overrides
//! are applied to the parsed JSON before it is deserialized, so every
//! artifact records the fully resolved configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifiers::{ConseConfig, MethodKind};
use crate::data::{
    fmt_f64, load_dataset, load_embeddings, make_split, FeatureDataset, SplitFile, SplitSpec,
};
use crate::error::{Error, Result};
use crate::eval::{run_protocol, EvalOptions, EvalReport, Learner, ProtocolConfig};
use crate::gradcheck::{run_gradcheck, GradcheckReport};
use crate::math::Mat;
use crate::nsm::{NsmConfig, NsmModelFile};
use crate::pipeline::{ModelSettings, ZeroShotTask};
use crate::property::{PropertyConfig, PropertyModelFile};

/// How `split` and `train` choose unseen labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    /// Existing split file. When absent a split is sampled.
    pub path: Option<PathBuf>,
    pub n_unseen: usize,
    pub seed: u64,
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self {
            path: None,
            n_unseen: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSettings {
    pub instances: usize,
    pub seed: u64,
}

impl Default for GradcheckSettings {
    fn default() -> Self {
        Self {
            instances: 20,
            seed: 0,
        }
    }
}

/// Everything one run needs. Relative paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub embeddings: PathBuf,
    pub dataset: PathBuf,
    pub output_dir: PathBuf,
    pub split: SplitSettings,
    pub protocol: ProtocolConfig,
    pub property: PropertyConfig,
    pub nsm: NsmConfig,
    pub lm_lambda: f64,
    pub conse: ConseConfig,
    pub methods: Vec<MethodKind>,
    pub standardize_features: bool,
    pub gradcheck: GradcheckSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let settings = ModelSettings::default();
        Self {
            embeddings: PathBuf::new(),
            dataset: PathBuf::new(),
            output_dir: PathBuf::new(),
            split: SplitSettings::default(),
            protocol: ProtocolConfig::default(),
            property: settings.property,
            nsm: settings.nsm,
            lm_lambda: settings.lm_lambda,
            conse: settings.conse,
            methods: MethodKind::ALL.to_vec(),
            standardize_features: false,
            gradcheck: GradcheckSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn settings(&self) -> ModelSettings {
        ModelSettings {
            property: self.property.clone(),
            nsm: self.nsm.clone(),
            lm_lambda: self.lm_lambda,
            conse: self.conse.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        self.settings().validate()?;
        if self.methods.is_empty() {
            return Err(Error::invalid("methods must not be empty"));
        }
        if self.gradcheck.instances == 0 {
            return Err(Error::invalid("gradcheck.instances must be >= 1"));
        }
        Ok(())
    }

    fn require_paths(&self) -> Result<()> {
        for (name, p) in [
            ("embeddings", &self.embeddings),
            ("dataset", &self.dataset),
            ("output_dir", &self.output_dir),
        ] {
            if p.as_os_str().is_empty() {
                return Err(Error::Config(format!("`{name}` path is required")));
            }
        }
        Ok(())
    }
}

/// Sets `path` (dot separated) in a JSON object, creating objects on the way.
pub fn set_dotted(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("bad override key `{path}`")));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        let obj = node.as_object_mut().ok_or_else(|| {
            Error::Config(format!("override `{path}` descends into a non-object"))
        })?;
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    node.as_object_mut()
        .ok_or_else(|| Error::Config(format!("override `{path}` descends into a non-object")))?
        .insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Parses `key=value`; the value is read as JSON, falling back to a plain string.
pub fn parse_override(spec: &str) -> Result<(String, Value)> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    Ok((key.trim().to_owned(), value))
}

/// A config plus the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// The config as it is embedded in artifacts.
    pub fn resolved_json(&self) -> Value {
        serde_json::to_value(&self.config).expect("config serializes")
    }
}

/// Reads the config file (if any) and applies overrides.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<LoadedConfig> {
    let (mut root, base_dir) = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (v, dir)
        }
        None => (Value::Object(Default::default()), PathBuf::new()),
    };
    if !root.is_object() {
        return Err(Error::Config("config must be a JSON object".into()));
    }
    for spec in overrides {
        let (k, v) = parse_override(spec)?;
        set_dotted(&mut root, &k, v)?;
    }
    let config: RunConfig =
        serde_json::from_value(root).map_err(|e| Error::Config(e.to_string()))?;
    config
        .validate()
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(LoadedConfig { config, base_dir })
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::Coverage(_)
        | Error::Parse { .. }
        | Error::EmptyDataset(_)
        | Error::MissingData(_)
        | Error::Shape(_) => 3,
        Error::Numeric(_) | Error::Singular(_) | Error::DegenerateTest(_) => 4,
        Error::Io(_) => 1,
    }
}

/// The single line printed on failure.
pub fn error_line(err: &Error) -> String {
    format!(
        "error kind={} exit={} message={}",
        err.kind(),
        exit_code(err),
        serde_json::to_string(&err.to_string()).expect("string serializes")
    )
}

struct Inputs {
    dataset: FeatureDataset,
    semantics: Mat,
}

fn load_inputs(lc: &LoadedConfig) -> Result<Inputs> {
    lc.config.require_paths()?;
    let table = load_embeddings(lc.resolve(&lc.config.embeddings))?;
    let dataset = load_dataset(lc.resolve(&lc.config.dataset), &table)?;
    let semantics = dataset.class_semantics(&table)?;
    Ok(Inputs { dataset, semantics })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn output_dir(lc: &LoadedConfig) -> Result<PathBuf> {
    let dir = lc.resolve(&lc.config.output_dir);
    fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

/// Split artifact on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitArtifact {
    pub config: Value,
    pub split: SplitFile,
}

/// Trained model artifact on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub config: Value,
    pub split: SplitFile,
    pub property: PropertyModelFile,
    pub nsm: NsmModelFile,
    pub property_objective: f64,
    pub nsm_objective: f64,
}

/// One row of a `report` summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub protocol: String,
    pub master_seed: u64,
    pub method: String,
    pub metric: String,
    pub mean: f64,
    pub trials: usize,
}

fn read_split(path: &Path, lc: &LoadedConfig, ds: &FeatureDataset) -> Result<SplitSpec> {
    let path = lc.resolve(path);
    let text =
        fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let file = serde_json::from_str::<SplitArtifact>(&text)
        .map(|a| a.split)
        .or_else(|_| serde_json::from_str::<SplitFile>(&text))
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    SplitSpec::from_file(&file, &ds.classes)
}

/// Samples a split and writes `split_seed{seed}.json`.
pub fn cmd_split(lc: &LoadedConfig) -> Result<PathBuf> {
    let inputs = load_inputs(lc)?;
    let s = &lc.config.split;
    let split = make_split(&inputs.dataset, s.n_unseen, s.seed)?;
    let out = output_dir(lc)?.join(format!("split_seed{}.json", s.seed));
    write_json(
        &out,
        &SplitArtifact {
            config: lc.resolved_json(),
            split: split.to_file(&inputs.dataset.classes),
        },
    )?;
    Ok(out)
}

/// Fits the property model and NSM_PB map for one split.
pub fn cmd_train(lc: &LoadedConfig) -> Result<PathBuf> {
    let inputs = load_inputs(lc)?;
    let s = &lc.config.split;
    let split = match &s.path {
        Some(p) => read_split(p, lc, &inputs.dataset)?,
        None => make_split(&inputs.dataset, s.n_unseen, s.seed)?,
    };
    let settings = lc.config.settings();
    let task = ZeroShotTask::new(
        &inputs.dataset,
        &inputs.semantics,
        &split,
        &settings,
        split.seed,
        lc.config.standardize_features,
    )?;
    let fit = task.property_fit()?;
    let model = fit.model();
    let classes = model.class_matrix(task.n_classes())?;
    let nsm = task.fit_nsm_against(&classes)?;
    let vocab = &inputs.dataset.classes;
    let out = output_dir(lc)?.join(format!("model_seed{}.json", split.seed));
    write_json(
        &out,
        &ModelArtifact {
            config: lc.resolved_json(),
            split: split.to_file(vocab),
            property: model.to_file(vocab),
            nsm: nsm.model.to_file(vocab),
            property_objective: fit.trace.last().copied().unwrap_or(f64::NAN),
            nsm_objective: -nsm.trace.last().copied().unwrap_or(f64::NAN),
        },
    )?;
    Ok(out)
}

/// Runs the configured protocol; returns the report and its JSON and CSV paths.
pub fn cmd_eval(lc: &LoadedConfig, jobs: usize) -> Result<(EvalReport, PathBuf, PathBuf)> {
    let inputs = load_inputs(lc)?;
    let options = EvalOptions {
        settings: lc.config.settings(),
        standardize_features: lc.config.standardize_features,
        jobs: jobs.max(1),
    };
    let learners: Vec<&dyn Learner> = lc
        .config
        .methods
        .iter()
        .map(|m| m as &dyn Learner)
        .collect();
    let mut report = run_protocol(
        &inputs.dataset,
        &inputs.semantics,
        &learners,
        &lc.config.protocol,
        &options,
    )?;
    report.config = lc.resolved_json();
    let dir = output_dir(lc)?;
    let stem = report.file_stem();
    let json = dir.join(format!("{stem}.json"));
    let csv = dir.join(format!("{stem}.csv"));
    write_json(&json, &report)?;
    fs::write(&csv, report.to_csv()).map_err(|e| Error::Io(format!("{}: {e}", csv.display())))?;
    Ok((report, json, csv))
}

pub fn cmd_gradcheck(lc: &LoadedConfig) -> Result<GradcheckReport> {
    let g = &lc.config.gradcheck;
    run_gradcheck(g.instances, g.seed)
}

/// Reads reports and flattens their summaries.
pub fn summarize_reports(paths: &[PathBuf]) -> Result<Vec<SummaryRow>> {
    if paths.is_empty() {
        return Err(Error::Config("report needs at least one input".into()));
    }
    let mut rows = Vec::new();
    for p in paths {
        let text = fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        let report: EvalReport = serde_json::from_str(&text)
            .map_err(|e| Error::parse(e.line(), format!("{}: {e}", p.display())))?;
        for s in &report.summary {
            for metric in &report.metrics {
                if let Some(&mean) = s.means.get(metric) {
                    rows.push(SummaryRow {
                        protocol: report.protocol.kind.to_string(),
                        master_seed: report.protocol.master_seed,
                        method: s.method.clone(),
                        metric: metric.clone(),
                        mean,
                        trials: report.trials.len(),
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("protocol,master_seed,method,metric,mean,trials\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.protocol,
            r.master_seed,
            r.method,
            r.metric,
            fmt_f64(r.mean),
            r.trials
        ));
    }
    out
}

pub fn cmd_report(inputs: &[PathBuf], output: &Path) -> Result<()> {
    let rows = summarize_reports(inputs)?;
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(output, summary_csv(&rows))
        .map_err(|e| Error::Io(format!("{}: {e}", output.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn dotted_overrides() {
        let mut v = json!({"protocol": {"trials": 5}});
        set_dotted(&mut v, "protocol.trials", json!(9)).unwrap();
        set_dotted(&mut v, "nsm.gd.step_size", json!(0.5)).unwrap();
        assert_eq!(
            v,
            json!({"protocol": {"trials": 9}, "nsm": {"gd": {"step_size": 0.5}}})
        );
        assert!(set_dotted(&mut v, "protocol.trials.x", json!(1)).is_err());
        assert!(set_dotted(&mut v, "a..b", json!(1)).is_err());
    }

    #[test]
    fn override_values() {
        assert_eq!(parse_override("a.b=3").unwrap(), ("a.b".into(), json!(3)));
        assert_eq!(
            parse_override("kind=kway").unwrap(),
            ("kind".into(), json!("kway"))
        );
        assert_eq!(
            parse_override("m=[\"LM\"]").unwrap(),
            ("m".into(), json!(["LM"]))
        );
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn zero_trials_is_config_error() {
        let err = load_config(None, &["protocol.trials=0".into()]).unwrap_err();
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn unknown_key_is_config_error() {
        let err = load_config(None, &["protocl.trials=3".into()]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn overrides_are_echoed() {
        let lc = load_config(None, &["lm_lambda=2".into(), "methods=[\"LM\"]".into()]).unwrap();
        let v = lc.resolved_json();
        assert_eq!(v["lm_lambda"], json!(2.0));
        assert_eq!(v["methods"], json!(["LM"]));
        assert_eq!(v["property"]["alpha"], json!(0.1));
    }

    #[test]
    fn error_line_is_single_line() {
        let line = error_line(&Error::Numeric("a\nb".into()));
        assert!(!line.contains('\n'));
        assert!(line.starts_with("error kind=numeric exit=4 "));
    }
}
