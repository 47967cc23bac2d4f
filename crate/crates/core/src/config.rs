//! Run configuration: one TOML document with `[quad]`, `[env]`,
//! `[scenario]`, `[policy]` and `[train]` tables, each optional and filled
//! from defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Value;

use crate::policy::GraphormerConfig;
use crate::ppo::TrainConfig;
use crate::quad::QuadParams;
use crate::swarm::{EnvConfig, ScenarioConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config: {0}")]
    Parse(String),
    #[error("override `{0}`: expected key=value")]
    Malformed(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}` is ambiguous; use one of {candidates:?}")]
    Ambiguous { key: String, candidates: Vec<String> },
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub quad: QuadParams,
    pub env: EnvConfig,
    pub scenario: ScenarioConfig,
    pub policy: GraphormerConfig,
    pub train: TrainConfig,
}

const SECTIONS: [&str; 5] = ["quad", "env", "scenario", "policy", "train"];

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let s = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&s).map_err(|e| match e {
            ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Field-level checks of every section.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, reason: String| ConfigError::Invalid { key: key.into(), reason };
        self.quad.validate().map_err(|e| invalid("quad", e.to_string()))?;
        self.env.validate().map_err(|e| invalid("env", e))?;
        self.scenario.validate().map_err(|e| invalid("scenario", e))?;
        self.policy.validate().map_err(|e| invalid("policy", e))?;
        self.train.validate().map_err(|e| invalid("train", e.to_string()))?;
        Ok(())
    }

    /// Applies `key=value` assignments. A key is either dotted
    /// (`train.lr`, `env.room.width`) or the bare name of a field that
    /// occurs in exactly one section (`lr`). Values are parsed as TOML
    /// literals, falling back to a plain string.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<(), ConfigError> {
        if overrides.is_empty() {
            return Ok(());
        }
        let mut root = Value::try_from(&*self).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o.split_once('=').ok_or_else(|| ConfigError::Malformed(o.into()))?;
            let path = resolve(&root, key.trim())?;
            let slot = lookup_mut(&mut root, &path).ok_or_else(|| ConfigError::UnknownKey(key.into()))?;
            *slot = parse_like(slot, raw.trim()).map_err(|reason| ConfigError::Invalid { key: key.into(), reason })?;
        }
        *self = root.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        Ok(())
    }
}

fn resolve(root: &Value, key: &str) -> Result<Vec<String>, ConfigError> {
    if key.contains('.') {
        let path: Vec<String> = key.split('.').map(str::to_string).collect();
        let mut cur = root;
        for p in &path {
            cur = cur.get(p).ok_or_else(|| ConfigError::UnknownKey(key.into()))?;
        }
        return Ok(path);
    }
    let hits: Vec<&str> = SECTIONS.into_iter().filter(|s| root.get(s).and_then(|t| t.get(key)).is_some()).collect();
    match hits.as_slice() {
        [] => Err(ConfigError::UnknownKey(key.into())),
        [s] => Ok(vec![s.to_string(), key.to_string()]),
        _ => Err(ConfigError::Ambiguous {
            key: key.into(),
            candidates: hits.iter().map(|s| format!("{s}.{key}")).collect(),
        }),
    }
}

fn lookup_mut<'a>(root: &'a mut Value, path: &[String]) -> Option<&'a mut Value> {
    path.iter().try_fold(root, |cur, p| cur.get_mut(p))
}

fn parse_like(old: &Value, raw: &str) -> Result<Value, String> {
    let parsed = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    match (old, parsed) {
        (Value::Float(_), Value::Integer(i)) => Ok(Value::Float(i as f64)),
        (Value::Table(_), v @ Value::String(_)) => {
            let mut t = toml::Table::new();
            t.insert("mode".into(), v);
            Ok(Value::Table(t))
        }
        (old, new) if std::mem::discriminant(old) == std::mem::discriminant(&new) => Ok(new),
        (old, new) => Err(format!("expected {}, got `{raw}` ({})", old.type_str(), new.type_str())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(RunConfig::from_toml_str("[train]\nlearning_rate = 1.0\n").is_err());
    }

    #[test]
    fn flat_and_dotted_overrides() {
        let mut c = RunConfig::default();
        c.apply_overrides(&["lr=0.0001", "train.total_steps=1000", "env.room.width=4", "kind=swap-goals"]).unwrap();
        assert_eq!(c.train.lr, 0.0001);
        assert_eq!(c.train.total_steps, 1000);
        assert_eq!(c.env.room.width, 4.0);
        assert_eq!(c.scenario.kind, crate::swarm::ScenarioKind::SwapGoals);
    }

    #[test]
    fn bad_overrides() {
        let mut c = RunConfig::default();
        assert!(matches!(c.apply_overrides(&["nope=1"]), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(c.apply_overrides(&["lr"]), Err(ConfigError::Malformed(_))));
        assert!(matches!(c.apply_overrides(&["lr=fast"]), Err(ConfigError::Invalid { .. })));
        assert!(matches!(c.apply_overrides(&["seed=1"]), Ok(())));
    }

    #[test]
    fn missing_file_names_the_path() {
        let e = RunConfig::load(Path::new("/no/such/run.toml")).unwrap_err();
        assert!(e.to_string().contains("/no/such/run.toml"));
    }
}
