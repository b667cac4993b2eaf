//! Prompt assembly from context text and trajectory data.
//!
//! Segment order is fixed: task description, data description, optional
//! in-context example, then the data itself (table and/or one image per step).
//! The context text comes from versioned template files; the layout file
//! places the named placeholders `{TASK_DESCRIPTION}`,
//! `{TEXT_DATA_DESCRIPTION}`, `{VIDEO_DATA_DESCRIPTION}` and
//! `{IN_CONTEXT_EXAMPLE}`, and the text preceding each placeholder becomes the
//! heading of that segment. A placeholder with nothing to fill it is dropped
//! together with its heading.

mod snippet;
pub mod table;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::CoreError;
use crate::trajectory::TrajectoryData;

pub use snippet::make_one_shot_snippet;
pub use table::serialize_textual;

/// Fixed token charge per attached image in the pre-flight estimate.
pub const TOKENS_PER_IMAGE: u64 = 768;

pub const TEMPLATE_VERSION: &str = "v1";

const PLACEHOLDERS: [(&str, SegmentRole); 4] = [
    ("{TASK_DESCRIPTION}", SegmentRole::Task),
    ("{TEXT_DATA_DESCRIPTION}", SegmentRole::DataDescription),
    ("{VIDEO_DATA_DESCRIPTION}", SegmentRole::DataDescription),
    ("{IN_CONTEXT_EXAMPLE}", SegmentRole::Example),
];

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("trajectory has no steps")]
    EmptyTrajectory,
    #[error("modality {0:?} needs frames, but step {1} has none")]
    MissingFrames(Modality, u64),
    #[error("hold-out decomposition has a single sub-task, so no transitions")]
    NoTransitions,
    #[error("hold-out trajectory has no step {0}")]
    MissingStep(u64),
    #[error("template: {0}")]
    Template(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    TextOnly,
    VisionOnly,
    Both,
}

impl Modality {
    pub fn has_text(self) -> bool {
        matches!(self, Modality::TextOnly | Modality::Both)
    }

    pub fn has_vision(self) -> bool {
        matches!(self, Modality::VisionOnly | Modality::Both)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::TextOnly => "text_only",
            Modality::VisionOnly => "vision_only",
            Modality::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotKind {
    OneShot,
    ZeroShot,
}

impl ShotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ShotKind::OneShot => "one_shot",
            ShotKind::ZeroShot => "zero_shot",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shot {
    ZeroShot,
    OneShot(String),
}

impl Shot {
    pub fn kind(&self) -> ShotKind {
        match self {
            Shot::ZeroShot => ShotKind::ZeroShot,
            Shot::OneShot(_) => ShotKind::OneShot,
        }
    }
}

/// Versioned template text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub version: String,
    pub layout: String,
    pub task_description: String,
    pub text_data_description: String,
    pub video_data_description: String,
}

impl PromptTemplate {
    /// Template files shipped with the crate.
    pub fn builtin() -> Self {
        Self {
            version: TEMPLATE_VERSION.into(),
            layout: include_str!("../../templates/layout_v1.txt").into(),
            task_description: include_str!("../../templates/task_description_v1.txt").into(),
            text_data_description: include_str!("../../templates/text_data_description_v1.txt").into(),
            video_data_description: include_str!("../../templates/video_data_description_v1.txt").into(),
        }
    }

    /// Reads `layout_<version>.txt`, `task_description_<version>.txt`,
    /// `text_data_description_<version>.txt` and
    /// `video_data_description_<version>.txt` from `dir`.
    pub fn load(dir: &Path, version: &str) -> Result<Self, PromptError> {
        let read = |name: &str| -> Result<String, PromptError> {
            let p = dir.join(format!("{name}_{version}.txt"));
            std::fs::read_to_string(&p).map_err(|e| PromptError::Core(CoreError::io(&p, e)))
        };
        let t = Self {
            version: version.into(),
            layout: read("layout")?,
            task_description: read("task_description")?,
            text_data_description: read("text_data_description")?,
            video_data_description: read("video_data_description")?,
        };
        parse_layout(&t.layout)?;
        Ok(t)
    }

    pub fn context(&self, shot: Shot) -> PromptContext {
        PromptContext {
            layout: self.layout.clone(),
            task_description: self.task_description.trim().to_string(),
            text_data_description: self.text_data_description.trim().to_string(),
            video_data_description: self.video_data_description.trim().to_string(),
            shot,
        }
    }
}

/// The context part of a prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptContext {
    pub layout: String,
    pub task_description: String,
    /// May contain `{COLUMNS}`, replaced with the table header.
    pub text_data_description: String,
    pub video_data_description: String,
    pub shot: Shot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentRole {
    Task,
    DataDescription,
    Example,
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Segment {
    Text { role: SegmentRole, content: String },
    Image { step: u64, png_base64: String },
}

impl Segment {
    pub fn role(&self) -> SegmentRole {
        match self {
            Segment::Text { role, .. } => *role,
            Segment::Image { .. } => SegmentRole::Data,
        }
    }

    pub fn text(&self) -> Option<&str> {
        match self {
            Segment::Text { content, .. } => Some(content),
            Segment::Image { .. } => None,
        }
    }
}

/// An assembled prompt. Serializes to the JSON debug dump that is also hashed
/// for cassette lookups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub env_name: String,
    pub seed: u64,
    pub modality: Modality,
    pub shot: ShotKind,
    pub segments: Vec<Segment>,
    pub token_estimate: u64,
}

impl Prompt {
    pub fn image_count(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| matches!(s, Segment::Image { .. }))
            .count()
    }

    pub fn has_images(&self) -> bool {
        self.image_count() > 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("prompt serializes")
    }

    /// Canonical bytes: compact JSON.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("prompt serializes")
    }
}

/// `ceil(chars / 4)` over all text plus a fixed charge per image.
pub fn estimate_tokens(segments: &[Segment]) -> u64 {
    let mut chars = 0u64;
    let mut images = 0u64;
    for s in segments {
        match s {
            Segment::Text { content, .. } => chars += content.chars().count() as u64,
            Segment::Image { .. } => images += 1,
        }
    }
    chars.div_ceil(4) + TOKENS_PER_IMAGE * images
}

/// `(heading, placeholder index)` pieces plus any trailing text.
type LayoutPieces<'a> = (Vec<(&'a str, usize)>, &'a str);

fn parse_layout(layout: &str) -> Result<LayoutPieces<'_>, PromptError> {
    let mut pieces = Vec::with_capacity(PLACEHOLDERS.len());
    let mut rest = layout;
    for (i, (ph, _)) in PLACEHOLDERS.iter().enumerate() {
        let at = rest
            .find(ph)
            .ok_or_else(|| PromptError::Template(format!("layout lacks {ph} (or it is out of order)")))?;
        pieces.push((&rest[..at], i));
        rest = &rest[at + ph.len()..];
    }
    if PLACEHOLDERS.iter().any(|(ph, _)| rest.contains(ph)) {
        return Err(PromptError::Template("placeholder repeated in layout".into()));
    }
    Ok((pieces, rest))
}

fn trim_blank_lines(s: &str) -> &str {
    s.trim_matches(|c| c == '\n' || c == '\r')
}

/// Assembles the prompt for `data` under `modality`.
pub fn build_prompt(
    ctx: &PromptContext,
    data: &TrajectoryData,
    modality: Modality,
) -> Result<Prompt, PromptError> {
    if data.steps.is_empty() {
        return Err(PromptError::EmptyTrajectory);
    }
    let table_header = table::header(data);
    let values = [
        ctx.task_description.clone(),
        if modality.has_text() {
            ctx.text_data_description.replace("{COLUMNS}", &table_header)
        } else {
            String::new()
        },
        if modality.has_vision() {
            ctx.video_data_description.clone()
        } else {
            String::new()
        },
        match &ctx.shot {
            Shot::ZeroShot => String::new(),
            Shot::OneShot(snippet) => snippet.clone(),
        },
    ];

    let (pieces, trailing) = parse_layout(&ctx.layout)?;
    let mut segments = Vec::new();
    for (heading, i) in pieces {
        let value = values[i].trim();
        if value.is_empty() {
            continue;
        }
        let heading = trim_blank_lines(heading);
        let content = if heading.trim().is_empty() {
            value.to_string()
        } else {
            format!("{heading}\n{value}")
        };
        segments.push(Segment::Text {
            role: PLACEHOLDERS[i].1,
            content,
        });
    }
    let trailing = trim_blank_lines(trailing);
    if !trailing.trim().is_empty() {
        if let Some(Segment::Text { content, .. }) = segments.last_mut() {
            content.push('\n');
            content.push_str(trailing);
        }
    }

    if modality.has_text() {
        segments.push(Segment::Text {
            role: SegmentRole::Data,
            content: format!("## TEXTUAL_DATA\n{}", serialize_textual(data)),
        });
    }
    if modality.has_vision() {
        let mut images = Vec::with_capacity(data.steps.len());
        for step in &data.steps {
            let frame = step
                .frame
                .as_ref()
                .and_then(|id| data.frames.get(id))
                .ok_or(PromptError::MissingFrames(modality, step.k))?;
            images.push(Segment::Image {
                step: step.k,
                png_base64: frame.to_base64_png()?,
            });
        }
        segments.push(Segment::Text {
            role: SegmentRole::Data,
            content: format!(
                "## VISUAL_DATA\n{} images follow, for steps 0 to {}.",
                images.len(),
                data.last_step().unwrap_or(0)
            ),
        });
        segments.extend(images);
    }

    let token_estimate = estimate_tokens(&segments);
    Ok(Prompt {
        env_name: data.env_name.clone(),
        seed: data.seed,
        modality,
        shot: ctx.shot.kind(),
        segments,
        token_estimate,
    })
}
