use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::synth::SynthSpec;
use super::BenchError;
use crate::classic::{Family, GridDecl, ParamValue};
use crate::dataio::{ColumnSchema, ReturnKind};
use crate::neural::{NetConfig, NetKind};
use crate::pipeline::{FeatureSpec, LabelSource, LabelSpec, Mode};

/// A model family the drivers can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilyId {
    Classic(Family),
    Net(NetKind),
}

impl FamilyId {
    pub fn name(self) -> &'static str {
        match self {
            FamilyId::Classic(f) => f.name(),
            FamilyId::Net(k) => k.name(),
        }
    }
}

impl std::fmt::Display for FamilyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyId {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "convtimenet" => Ok(FamilyId::Net(NetKind::Convtimenet)),
            "lstm" => Ok(FamilyId::Net(NetKind::Lstm)),
            other => Family::from_str(other)
                .map(FamilyId::Classic)
                .map_err(|_| BenchError::Config(format!("unknown family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub initial_size: usize,
    pub increment: usize,
    pub steps: usize,
    pub start_offset: usize,
    /// Empty means the run's families.
    pub families: Vec<FamilyId>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { initial_size: 200, increment: 300, steps: 6, start_offset: 10000, families: Vec::new() }
    }
}

impl SweepSpec {
    pub fn sizes(&self) -> Vec<usize> {
        (0..self.steps).map(|i| self.initial_size + self.increment * i).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

impl FromStr for OutputFormat {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(BenchError::Config(format!("unknown format `{other}` (expected csv|json|svg)"))),
        }
    }
}

/// Everything a run needs. Untouched defaults follow the reference
/// notebooks: rows 10000..12000, five expanding folds, 0.33/0.67 quantile
/// labels, all eleven classic families on their published grids, and the
/// network settings of the conv notebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub schema: ColumnSchema,
    /// Generated data used when `input` is not set.
    pub synth: Option<SynthSpec>,
    pub data_start: usize,
    pub data_len: Option<usize>,
    pub mode: Mode,
    pub labels: LabelSpec,
    pub features: FeatureSpec,
    pub families: Vec<FamilyId>,
    /// Per-family grid overrides; families without one use their default grid.
    pub grids: BTreeMap<String, GridDecl>,
    pub n_splits: usize,
    pub seed: u64,
    pub net: NetConfig,
    pub sweep: SweepSpec,
    pub out_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            schema: ColumnSchema::default(),
            synth: None,
            data_start: 10000,
            data_len: Some(2000),
            mode: Mode::PaperFaithful,
            labels: LabelSpec::default(),
            features: FeatureSpec::default(),
            families: Family::ALL.iter().map(|&f| FamilyId::Classic(f)).collect(),
            grids: BTreeMap::new(),
            n_splits: 5,
            seed: 0,
            net: NetConfig::default(),
            sweep: SweepSpec::default(),
            out_dir: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, BenchError> {
    v.trim()
        .parse()
        .map_err(|_| BenchError::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, BenchError> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(BenchError::Config(format!("`{key}`: expected true|false, got `{v}`"))),
    }
}

fn opt_name(v: &str) -> Option<String> {
    let t = v.trim();
    (!t.is_empty() && t != "none").then(|| t.to_string())
}

impl RunConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), BenchError> {
        let v = value.trim();
        match key {
            "input" => self.input = opt_name(v).map(PathBuf::from),
            "out" => self.out_dir = PathBuf::from(v),
            "seed" => self.seed = parse_num(key, v)?,
            "mode" => self.mode = v.parse().map_err(BenchError::Config)?,
            "n_splits" => self.n_splits = parse_num(key, v)?,
            "families" => {
                self.families = list(v).iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
            }
            "format" => {
                self.formats = list(v).iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
            }
            "data.start" => self.data_start = parse_num(key, v)?,
            "data.len" => {
                self.data_len = if v == "none" || v == "all" { None } else { Some(parse_num(key, v)?) }
            }
            "data.timestamp" => self.schema.timestamp = v.to_string(),
            "data.close" => self.schema.close = v.to_string(),
            "data.open" => self.schema.open = opt_name(v),
            "data.high" => self.schema.high = opt_name(v),
            "data.low" => self.schema.low = opt_name(v),
            "data.volume" => self.schema.volume = opt_name(v),
            "data.target" => self.schema.target = opt_name(v),
            "data.extra" => self.schema.extra = list(v),
            "data.drop" => self.schema.drop = list(v),
            "data.returns" => {
                self.schema.returns = match v {
                    "simple" => ReturnKind::Simple,
                    "log" => ReturnKind::Log,
                    _ => return Err(BenchError::Config(format!("`{key}`: expected simple|log"))),
                }
            }
            "labels.q_low" => self.labels.q_low = parse_num(key, v)?,
            "labels.q_high" => self.labels.q_high = parse_num(key, v)?,
            "labels.source" => {
                self.labels.source = match v {
                    "auto" => LabelSource::Auto,
                    "frame" => LabelSource::Frame,
                    "quantile" => LabelSource::Quantile,
                    _ => return Err(BenchError::Config(format!("`{key}`: expected auto|frame|quantile"))),
                }
            }
            "features.columns" => self.features.columns = list(v),
            "features.returns" => self.features.include_returns = parse_bool(key, v)?,
            "features.sma" => {
                self.features.sma_windows = list(v).iter().map(|s| parse_num(key, s)).collect::<Result<_, _>>()?
            }
            "features.sma_column" => self.features.sma_column = v.to_string(),
            "features.garch" => self.features.garch = parse_bool(key, v)?,
            "net.epochs" => self.net.epochs = parse_num(key, v)?,
            "net.batch_size" => self.net.batch_size = parse_num(key, v)?,
            "net.lr" => self.net.lr = parse_num(key, v)?,
            "net.dropout" => self.net.dropout = parse_num(key, v)?,
            "net.window" => self.net.window = parse_num(key, v)?,
            "net.hidden" => self.net.hidden = parse_num(key, v)?,
            "sweep.initial_size" => self.sweep.initial_size = parse_num(key, v)?,
            "sweep.increment" => self.sweep.increment = parse_num(key, v)?,
            "sweep.steps" => self.sweep.steps = parse_num(key, v)?,
            "sweep.start_offset" => self.sweep.start_offset = parse_num(key, v)?,
            "sweep.families" => {
                self.sweep.families = list(v).iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
            }
            _ if key.starts_with("synth.") => {
                let spec = self.synth.get_or_insert_with(SynthSpec::default);
                match &key[6..] {
                    "kind" => spec.kind = v.parse()?,
                    "n" => spec.n = parse_num(key, v)?,
                    "d" => spec.d = parse_num(key, v)?,
                    "seed" => spec.seed = parse_num(key, v)?,
                    "weight_seed" => spec.weight_seed = Some(parse_num(key, v)?),
                    "shift_at" => spec.shift_at = parse_num(key, v)?,
                    "noise" => spec.noise = parse_num(key, v)?,
                    "volatility" => spec.volatility = parse_num(key, v)?,
                    other => return Err(BenchError::Config(format!("unknown key `synth.{other}`"))),
                }
            }
            _ if key.starts_with("grid.") => {
                let rest = &key[5..];
                let (fam, param) = rest
                    .split_once('.')
                    .ok_or_else(|| BenchError::Config(format!("`{key}`: expected grid.<family>.<param>")))?;
                let fam_id: FamilyId = fam.parse()?;
                let decl = self.grids.entry(fam_id.name().to_string()).or_default();
                let values: Vec<ParamValue> = list(v).iter().map(|s| ParamValue::parse(s)).collect();
                match decl.iter_mut().find(|(k, _)| k == param) {
                    Some(slot) => slot.1 = values,
                    None => decl.push((param.to_string(), values)),
                }
            }
            other => return Err(BenchError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses flat `key=value` lines. `[section]` headers prefix the keys
    /// below them; `#` starts a comment line.
    pub fn parse_str(text: &str) -> Result<RunConfig, BenchError> {
        let mut cfg = RunConfig::default();
        cfg.apply_str(text)?;
        Ok(cfg)
    }

    pub fn apply_str(&mut self, text: &str) -> Result<(), BenchError> {
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| BenchError::Config(format!("line {}: expected key=value", i + 1)))?;
            let key = if section.is_empty() { k.trim().to_string() } else { format!("{section}.{}", k.trim()) };
            self.set(&key, v).map_err(|e| match e {
                BenchError::Config(m) => BenchError::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunConfig, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        RunConfig::parse_str(&text)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.n_splits < 2 {
            return Err(BenchError::Config(format!("n_splits must be at least 2 (got {})", self.n_splits)));
        }
        if !(0.0 < self.labels.q_low && self.labels.q_low < self.labels.q_high && self.labels.q_high < 1.0) {
            return Err(BenchError::Config("need 0 < labels.q_low < labels.q_high < 1".into()));
        }
        if self.families.is_empty() {
            return Err(BenchError::Config("no families selected".into()));
        }
        if !(0.0..1.0).contains(&self.net.dropout) || !(self.net.lr >= 0.0) || self.net.batch_size == 0 {
            return Err(BenchError::Config("invalid network settings".into()));
        }
        if self.sweep.steps == 0 || self.sweep.initial_size == 0 {
            return Err(BenchError::Config("sweep needs at least one non-empty size".into()));
        }
        for fam in self.grids.keys() {
            let id = fam.parse::<FamilyId>()?;
            for p in crate::classic::expand_grid(&self.grids[fam]) {
                match id {
                    FamilyId::Classic(f) => crate::classic::ModelSpec { family: f, params: p }
                        .validate()
                        .map_err(|e| BenchError::Config(format!("grid.{fam}: {e}")))?,
                    FamilyId::Net(_) => {
                        self.net.with_params(&p).map_err(|e| BenchError::Config(format!("grid.{fam}: {e}")))?;
                    }
                }
            }
        }
        Ok(())
    }

    /// SHA-256 over every setting that can change results; the output
    /// directory and output formats are excluded.
    pub fn config_hash(&self) -> String {
        let mut semantic = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = semantic.as_object_mut() {
            obj.remove("out_dir");
            obj.remove("formats");
        }
        let digest = Sha256::digest(semantic.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}
