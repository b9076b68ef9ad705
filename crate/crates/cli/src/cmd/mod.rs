pub mod bench;
pub mod pipeline;
pub mod receive;
pub mod recolor;
pub mod simulate;

use std::io::Write;

use pointstream::pipeline::PipelineConfig;

use crate::args::ConfigCommand;
use crate::context::{read_config, CliError, CliResult};

pub fn config(cmd: &ConfigCommand, global: Option<&std::path::Path>) -> CliResult {
    match cmd {
        ConfigCommand::Validate { file } => {
            let path = file
                .as_deref()
                .or(global)
                .ok_or_else(|| CliError::usage(anyhow::anyhow!("no config file given")))?;
            read_config(path)?;
            println!("{}: ok", path.display());
        }
        ConfigCommand::Default => write!(std::io::stdout().lock(), "{}", PipelineConfig::default().to_toml())?,
    }
    Ok(())
}
