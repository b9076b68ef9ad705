use std::fmt;
use std::path::{Path, PathBuf};

use pointstream::pipeline::PipelineConfig;
use pointstream::sim::scene::Scene;
use pointstream::sim::scene_file::parse_scene;

use crate::args::Cli;

/// Failure with its process exit code: 1 for runtime failures, 2 for usage
/// and parse errors.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, error: error.into() }
    }

    pub fn is_broken_pipe(&self) -> bool {
        self.error
            .chain()
            .filter_map(|c| c.downcast_ref::<std::io::Error>())
            .any(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        Self { code: 1, error: e.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Loaded configuration plus the directory its relative paths resolve against.
pub struct Context {
    pub cfg: PipelineConfig,
    pub base_dir: PathBuf,
}

impl Context {
    pub fn load(cli: &Cli) -> CliResult<Self> {
        let (mut cfg, base_dir) = match &cli.config {
            Some(path) => (read_config(path)?, path.parent().map(Path::to_path_buf).unwrap_or_default()),
            None => (PipelineConfig::default(), PathBuf::new()),
        };
        if cli.seed.is_some() {
            cfg.seed = cli.seed;
        }
        cfg.fake_clock |= cli.fake_clock;
        Ok(Self { cfg, base_dir })
    }

    /// The scene named on the command line, else the config's scene, with
    /// the seed override applied.
    pub fn scene(&self, flag: Option<&Path>) -> CliResult<Scene> {
        let path = match (flag, &self.cfg.scene) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(p)) => self.base_dir.join(p),
            (None, None) => {
                return Err(CliError::usage(anyhow::anyhow!("no scene: pass --scene or set `scene` in the config")))
            }
        };
        let text = read_input(&path, "scene file")?;
        let mut scene =
            parse_scene(&text).map_err(|e| CliError::usage(anyhow::anyhow!("{}: {e}", path.display())))?;
        if let Some(seed) = self.cfg.seed {
            scene.seed = seed;
        }
        Ok(scene)
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf).unwrap_or_else(|| self.base_dir.join(&self.cfg.output_dir))
    }
}

pub fn read_config(path: &Path) -> CliResult<PipelineConfig> {
    let text = read_input(path, "config file")?;
    PipelineConfig::from_toml(&text).map_err(|e| CliError::usage(anyhow::anyhow!("{}: {e}", path.display())))
}

/// Reads a file named on the command line; a missing or unreadable file is a
/// usage error that names the path.
pub fn read_input(path: &Path, what: &str) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::usage(anyhow::anyhow!("cannot read {what} {}: {e}", path.display())))
}

pub fn require_file(path: &Path, what: &str) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(anyhow::anyhow!("{what} {} does not exist", path.display())))
    }
}

pub fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| anyhow::anyhow!("cannot create {}: {e}", dir.display()))?;
    Ok(())
}
