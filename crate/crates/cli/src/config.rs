//! Layered configuration: built-in defaults, then a TOML file, then `OMNILOOP_*` variables.
//! Command-line flags are applied last by the commands themselves.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use omniloop_core::action::ActionKind;
use omniloop_core::cost::{CostModel, TokenCost};
use omniloop_core::episode::{EpisodeConfig, DEFAULT_MAX_STEPS};
use omniloop_core::gateway::{GatewayConfig, Provider, API_KEY_ENV};
use omniloop_core::planner::PlannerKind;

use crate::CliError;

/// Names of every environment variable that overrides a config value.
pub const ENV_VARS: [&str; 10] = [
    "OMNILOOP_CONFIG",
    "OMNILOOP_SEED",
    "OMNILOOP_PLANNER",
    "OMNILOOP_MAX_STEPS",
    "OMNILOOP_JOBS",
    "OMNILOOP_SCENES_DIR",
    "OMNILOOP_TRACES_DIR",
    "OMNILOOP_REPORTS_DIR",
    "OMNILOOP_GATEWAY_ENDPOINT",
    "OMNILOOP_GATEWAY_MODEL",
];

const CREDENTIAL_KEYS: [&str; 7] = ["api_key", "apikey", "key", "secret", "password", "credentials", "authorization"];

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppConfig {
    pub seed: u64,
    pub planner: PlannerKind,
    /// Worker threads; 0 means one per logical core.
    pub jobs: usize,
    pub paths: Paths,
    pub episode: EpisodeSection,
    pub cost: CostOverrides,
    pub gateway: GatewaySection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub scenes: PathBuf,
    pub traces: PathBuf,
    pub reports: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeSection {
    pub max_steps: usize,
    pub token_budget: Option<TokenCost>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostOverrides {
    pub tokens_per_frame: Option<u64>,
    pub audio_tokens_per_second: Option<u64>,
    pub text_chars_per_token: Option<u64>,
    pub per_token_latency_us: Option<u64>,
    pub per_tool_base_latency_ms: BTreeMap<ActionKind, u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewaySection {
    pub endpoint: String,
    pub provider: Provider,
    pub model: String,
    pub tool_model: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub max_concurrency: usize,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            planner: PlannerKind::Heuristic,
            jobs: 0,
            paths: Paths::default(),
            episode: EpisodeSection::default(),
            cost: CostOverrides::default(),
            gateway: GatewaySection::default(),
        }
    }
}

impl Default for Paths {
    fn default() -> Self {
        Self { scenes: "fixtures/scenes".into(), traces: "traces".into(), reports: "reports".into() }
    }
}

impl Default for EpisodeSection {
    fn default() -> Self {
        Self { max_steps: DEFAULT_MAX_STEPS, token_budget: None }
    }
}

impl Default for GatewaySection {
    fn default() -> Self {
        let g = GatewayConfig::default();
        Self {
            endpoint: g.endpoint,
            provider: g.provider,
            model: "planner-model".into(),
            tool_model: "perception-model".into(),
            timeout_ms: 30_000,
            max_retries: 3,
            max_concurrency: g.max_concurrency,
        }
    }
}

impl CostOverrides {
    pub fn apply(&self, mut m: CostModel) -> CostModel {
        if let Some(v) = self.tokens_per_frame {
            m.tokens_per_frame = v;
        }
        if let Some(v) = self.audio_tokens_per_second {
            m.audio_tokens_per_second = v;
        }
        if let Some(v) = self.text_chars_per_token {
            m.text_chars_per_token = v;
        }
        if let Some(v) = self.per_token_latency_us {
            m.per_token_latency_us = v;
        }
        m.per_tool_base_latency_ms.extend(self.per_tool_base_latency_ms.iter().map(|(k, v)| (*k, *v)));
        m
    }
}

impl AppConfig {
    /// Reads the file named by `path` (or `OMNILOOP_CONFIG`), then applies environment overrides.
    pub fn load(path: Option<&Path>, env: &dyn Fn(&str) -> Option<String>) -> Result<Self, CliError> {
        let path = path.map(Path::to_path_buf).or_else(|| env("OMNILOOP_CONFIG").map(PathBuf::from));
        let mut cfg = match &path {
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|e| CliError::no_input(format!("{}: {e}", p.display())))?;
                Self::parse(&text, &p.display().to_string())?
            }
            None => Self::default(),
        };
        cfg.apply_env(env)?;
        Ok(cfg)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let value: toml::Table = text.parse().map_err(|e| CliError::usage(format!("{origin}: {e}")))?;
        if let Some(k) = find_credential_key(&value) {
            return Err(CliError::usage(format!(
                "{origin}: '{k}' is not allowed in config files; credentials are read only from {API_KEY_ENV}"
            )));
        }
        value.try_into().map_err(|e| CliError::usage(format!("{origin}: {e}")))
    }

    fn apply_env(&mut self, env: &dyn Fn(&str) -> Option<String>) -> Result<(), CliError> {
        fn parsed<T: FromStr>(name: &str, v: String) -> Result<T, CliError>
        where
            T::Err: std::fmt::Display,
        {
            v.parse().map_err(|e| CliError::usage(format!("{name}={v}: {e}")))
        }
        let get = |name: &str| env(name).filter(|v| !v.is_empty());
        if let Some(v) = get("OMNILOOP_SEED") {
            self.seed = parsed("OMNILOOP_SEED", v)?;
        }
        if let Some(v) = get("OMNILOOP_PLANNER") {
            self.planner = parsed("OMNILOOP_PLANNER", v)?;
        }
        if let Some(v) = get("OMNILOOP_MAX_STEPS") {
            self.episode.max_steps = parsed("OMNILOOP_MAX_STEPS", v)?;
        }
        if let Some(v) = get("OMNILOOP_JOBS") {
            self.jobs = parsed("OMNILOOP_JOBS", v)?;
        }
        if let Some(v) = get("OMNILOOP_SCENES_DIR") {
            self.paths.scenes = v.into();
        }
        if let Some(v) = get("OMNILOOP_TRACES_DIR") {
            self.paths.traces = v.into();
        }
        if let Some(v) = get("OMNILOOP_REPORTS_DIR") {
            self.paths.reports = v.into();
        }
        if let Some(v) = get("OMNILOOP_GATEWAY_ENDPOINT") {
            self.gateway.endpoint = v;
        }
        if let Some(v) = get("OMNILOOP_GATEWAY_MODEL") {
            self.gateway.model = v;
        }
        Ok(())
    }

    pub fn episode_config(&self) -> Result<EpisodeConfig, CliError> {
        let cfg = EpisodeConfig {
            max_steps: self.episode.max_steps,
            token_budget: self.episode.token_budget,
            planner_kind: self.planner,
            cost_model: self.cost.apply(CostModel::default()),
            seed: self.seed,
        };
        cfg.validate().map_err(|e| CliError::usage(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn gateway_config(&self) -> GatewayConfig {
        GatewayConfig {
            endpoint: self.gateway.endpoint.clone(),
            provider: self.gateway.provider,
            max_concurrency: self.gateway.max_concurrency,
            ..GatewayConfig::default()
        }
    }
}

fn find_credential_key(table: &toml::Table) -> Option<String> {
    table.iter().find_map(|(k, v)| {
        if CREDENTIAL_KEYS.contains(&k.to_ascii_lowercase().as_str()) {
            return Some(k.clone());
        }
        v.as_table().and_then(find_credential_key)
    })
}
