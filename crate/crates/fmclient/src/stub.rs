//! Offline provider that answers from a per-environment script.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{ProviderConfig, RequestTemplate, RetryPolicy};

/// Corruption applied to the canned answer.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    None,
    /// Moves every boundary between consecutive sub-tasks by this many steps.
    ShiftBoundaries(i64),
    /// Reverses the sub-task order.
    SwapOrder,
    /// Truncates the JSON halfway and leaves the fence open.
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseTarget {
    /// `None` matches every environment.
    #[serde(default)]
    pub env: Option<String>,
    pub seed: u64,
}

/// Which `(environment, seed)` queries receive the noise.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSchedule {
    #[default]
    All,
    Only(Vec<NoiseTarget>),
}

impl NoiseSchedule {
    pub fn applies(&self, env: &str, seed: u64) -> bool {
        match self {
            NoiseSchedule::All => true,
            NoiseSchedule::Only(targets) => targets
                .iter()
                .any(|t| t.seed == seed && t.env.as_deref().is_none_or(|e| e.eq_ignore_ascii_case(env))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StubScript {
    /// Environment name to canned answer, usually a JSON array of sub-tasks.
    pub responses: BTreeMap<String, String>,
    #[serde(default)]
    pub noise: NoiseMode,
    #[serde(default)]
    pub schedule: NoiseSchedule,
}

/// A provider config that answers from `script` without network access.
pub fn stub_provider(name: &str, script: StubScript) -> ProviderConfig {
    ProviderConfig {
        name: name.into(),
        endpoint: format!("stub://{name}"),
        model: "stub".into(),
        auth_env_var: None,
        supports_images: true,
        max_prompt_tokens: u64::MAX,
        request_template: RequestTemplate::default(),
        retry: RetryPolicy::default(),
        max_in_flight: crate::config::DEFAULT_MAX_IN_FLIGHT,
        temperature: 0.0,
        stub: Some(script),
    }
}

fn canned<'a>(script: &'a StubScript, env: &str) -> Option<&'a str> {
    script
        .responses
        .get(env)
        .or_else(|| {
            script
                .responses
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(env))
                .map(|(_, v)| v)
        })
        .map(String::as_str)
}

fn shift(items: &mut [Value], by: i64) {
    let bump = |v: &mut Value| {
        if let Some(n) = v.as_i64() {
            *v = Value::from((n + by).max(0));
        }
    };
    for i in 0..items.len().saturating_sub(1) {
        if let Some(end) = step_mut(&mut items[i], "end", 1) {
            bump(end);
        }
        if let Some(start) = step_mut(&mut items[i + 1], "start", 0) {
            bump(start);
        }
    }
}

fn step_mut<'a>(item: &'a mut Value, key: &str, position: usize) -> Option<&'a mut Value> {
    match item {
        Value::Object(map) => map.get_mut(key),
        Value::Array(fields) => fields.get_mut(position),
        _ => None,
    }
}

fn fenced(env: &str, json: &str) -> String {
    format!("Sub-task decomposition of the {env} trajectory:\n```json\n{json}\n```\n")
}

/// The stub's answer for one query. Unknown environments get an empty answer.
pub fn respond(script: &StubScript, env: &str, seed: u64) -> String {
    let Some(text) = canned(script, env) else {
        return String::new();
    };
    let text = text.trim();
    let noise = if script.schedule.applies(env, seed) {
        &script.noise
    } else {
        &NoiseMode::None
    };
    let parsed: Option<Vec<Value>> = serde_json::from_str(text).ok();
    let Some(mut items) = parsed else {
        // not a bare array: serve verbatim, only truncation applies
        return match noise {
            NoiseMode::Malformed => text.chars().take(text.chars().count() / 2).collect(),
            _ => text.to_string(),
        };
    };
    match noise {
        NoiseMode::None => fenced(env, text),
        NoiseMode::ShiftBoundaries(by) => {
            shift(&mut items, *by);
            fenced(env, &serde_json::to_string_pretty(&items).expect("serializes"))
        }
        NoiseMode::SwapOrder => {
            items.reverse();
            fenced(env, &serde_json::to_string_pretty(&items).expect("serializes"))
        }
        NoiseMode::Malformed => {
            let json = serde_json::to_string(&items).expect("serializes");
            let cut: String = json.chars().take(json.chars().count() / 2).collect();
            format!("Sub-task decomposition of the {env} trajectory:\n```json\n{cut}")
        }
    }
}
