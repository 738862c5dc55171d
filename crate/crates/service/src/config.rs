use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::Context;
use marginalia_core::lint::LintConfig;
use marginalia_core::llm::GatewayConfig;
use marginalia_core::pipeline::PipelineConfig;
use marginalia_core::Execution;
use serde::{Deserialize, Serialize};

/// Contents of `marginalia.toml`. Every section is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub bind: IpAddr,
    pub port: u16,
    /// Event log file. The store is rebuilt from it on startup.
    pub storage_path: PathBuf,
    /// When set, every provider attempt is appended here.
    pub audit_path: Option<PathBuf>,
    /// Prebuilt review UI assets, served under `/`.
    pub static_dir: Option<PathBuf>,
    /// How a run spreads its (essay, rubric) pairs over threads.
    pub execution: Execution,
    pub provider: ProviderSection,
    pub gateway: GatewayConfig,
    pub pipeline: PipelineConfig,
    pub lint: LintConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            storage_path: PathBuf::from("marginalia-store.jsonl"),
            audit_path: None,
            static_dir: None,
            execution: Execution::default(),
            provider: ProviderSection::default(),
            gateway: GatewayConfig::default(),
            pipeline: PipelineConfig::default(),
            lint: LintConfig::default(),
        }
    }
}

/// Names of the environment variables holding the remote endpoint and key.
/// The values themselves never appear in the config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSection {
    pub url_env: String,
    pub key_env: String,
    pub model: String,
}

impl Default for ProviderSection {
    fn default() -> Self {
        Self {
            url_env: "FEEDBACK_PROVIDER_URL".into(),
            key_env: "FEEDBACK_PROVIDER_KEY".into(),
            model: "gpt-4".into(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let config: Config = toml::from_str(text)?;
        config
            .pipeline
            .validate()
            .map_err(|e| anyhow::anyhow!("[pipeline] {e}"))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Loads `path` if given, otherwise `./marginalia.toml` if present,
    /// otherwise the defaults.
    pub fn discover(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => {
                let local = Path::new("marginalia.toml");
                if local.exists() {
                    Self::load(local)
                } else {
                    Ok(Self::default())
                }
            }
        }
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }
}
