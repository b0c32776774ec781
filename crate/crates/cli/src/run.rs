use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use drpc::corpus::{load_corpus, load_embeddings, Corpus, EmbeddingTable};
use drpc::model::ModelConfig;
use drpc::training::TrainConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::args::TrainOpts;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] drpc::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Contents of a `--config` file. Both sections are optional and partial.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(require_file(path)?).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: invalid config: {e}", path.display())))
    }
}

/// Written next to every artifact. Only `started_unix_secs` and
/// `wall_time_secs` vary between identical runs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub started_unix_secs: u64,
    pub wall_time_secs: f64,
}

pub struct RunClock {
    command: String,
    started: Instant,
    started_unix: u64,
}

impl RunClock {
    pub fn start(command: &str) -> Self {
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Self { command: command.into(), started: Instant::now(), started_unix }
    }

    pub fn finish(
        self,
        config: impl Serialize,
        seed: Option<u64>,
        inputs: Vec<PathBuf>,
        outputs: Vec<PathBuf>,
    ) -> CliResult<RunManifest> {
        Ok(RunManifest {
            command: self.command,
            args: std::env::args().skip(1).collect(),
            config: serde_json::to_value(config).map_err(drpc::Error::from)?,
            seed,
            inputs,
            outputs,
            started_unix_secs: self.started_unix,
            wall_time_secs: self.started.elapsed().as_secs_f64(),
        })
    }
}

pub fn require_file(path: &Path) -> CliResult<&Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Usage(format!("no such file: {}", path.display())))
    }
}

pub fn read_corpus_arg(path: &Path) -> CliResult<Corpus> {
    Ok(load_corpus(require_file(path)?)?)
}

pub fn read_embeddings_arg(path: Option<&Path>) -> CliResult<Option<EmbeddingTable>> {
    path.map(|p| Ok(load_embeddings(require_file(p)?)?)).transpose()
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn to_json(value: &impl Serialize) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(drpc::Error::from)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    write_text(path, &to_json(value)?)
}

/// `report.json` gets `report.json.manifest.json` beside it.
pub fn manifest_path_for(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

/// Config file values with command-line overrides applied.
pub fn resolve_training(opts: &TrainOpts) -> CliResult<(ModelConfig, TrainConfig)> {
    let file = match &opts.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let (model, mut train) = (file.model, file.train);
    if let Some(v) = opts.seed {
        train.seed = v;
    }
    if let Some(v) = opts.jobs {
        train.jobs = v;
    }
    if let Some(v) = opts.ablation {
        train.ablation = Some(v);
    }
    if let Some(v) = opts.epochs {
        train.epochs = v;
    }
    if let Some(v) = opts.lr {
        train.lr = v;
    }
    if let Some(v) = opts.lambda {
        train.lambda = v;
    }
    if let Some(v) = opts.batch_size {
        train.batch_size = v;
    }
    if let Some(v) = opts.stop_at_dev_f1 {
        train.stop_at_dev_f1 = Some(v);
    }
    train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((model, train))
}
