//! Rendering prompts into request bodies and reading responses back.

use serde_json::Value;
use subtask_core::prompt::{Prompt, Segment, SegmentRole};

use crate::config::{ProviderConfig, RequestTemplate};
use crate::error::FmError;

/// Replaces `{name}` tokens found in `template`. Substituted text is not
/// rescanned, so prompt content containing braces is left intact.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    'outer: while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        for (name, value) in vars {
            let token_len = name.len() + 2;
            if tail.len() >= token_len
                && tail.as_bytes()[token_len - 1] == b'}'
                && &tail[1..token_len - 1] == *name
            {
                out.push_str(value);
                rest = &tail[token_len..];
                continue 'outer;
            }
        }
        out.push('{');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

fn fill_value(template: &Value, vars: &[(&str, &str)], whole: &dyn Fn(&str) -> Option<Value>) -> Value {
    match template {
        Value::String(s) => whole(s).unwrap_or_else(|| Value::String(fill(s, vars))),
        Value::Array(items) => Value::Array(items.iter().map(|v| fill_value(v, vars, whole)).collect()),
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, v)| (k.clone(), fill_value(v, vars, whole)))
                .collect(),
        ),
        other => other.clone(),
    }
}

/// Task segments form the system message; everything else becomes user parts
/// in prompt order.
pub fn render_body(provider: &ProviderConfig, prompt: &Prompt) -> Value {
    let t: &RequestTemplate = &provider.request_template;
    let system = prompt
        .segments
        .iter()
        .filter(|s| s.role() == SegmentRole::Task)
        .filter_map(Segment::text)
        .collect::<Vec<_>>()
        .join("\n\n");
    let parts: Vec<Value> = prompt
        .segments
        .iter()
        .filter(|s| s.role() != SegmentRole::Task)
        .map(|s| match s {
            Segment::Text { content, .. } => fill_value(&t.text_part, &[("text", content)], &|_| None),
            Segment::Image { png_base64, .. } => {
                fill_value(&t.image_part, &[("image_base64", png_base64)], &|_| None)
            }
        })
        .collect();
    let parts = Value::Array(parts);
    let temperature = serde_json::Number::from_f64(provider.temperature)
        .map(Value::Number)
        .unwrap_or(Value::Null);
    let whole = |s: &str| match s {
        "{user_parts}" => Some(parts.clone()),
        "{temperature}" => Some(temperature.clone()),
        _ => None,
    };
    fill_value(&t.body, &[("model", &provider.model), ("system", &system)], &whole)
}

/// `(text, prompt_tokens, completion_tokens)` from a response body.
pub fn extract_response(
    template: &RequestTemplate,
    body: &[u8],
) -> Result<(String, Option<u64>, Option<u64>), FmError> {
    let v: Value = serde_json::from_slice(body).map_err(|e| FmError::Decode(e.to_string()))?;
    let text = match v.pointer(&template.response_text) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) => String::new(),
        Some(other) => return Err(FmError::Decode(format!("{} is not a string: {other}", template.response_text))),
        None => return Err(FmError::Decode(format!("response lacks {}", template.response_text))),
    };
    let count = |path: &Option<String>| path.as_deref().and_then(|p| v.pointer(p)).and_then(Value::as_u64);
    Ok((text, count(&template.prompt_tokens), count(&template.completion_tokens)))
}
