//! Recorded trajectory data: per-step state, control and optional frame.

use std::collections::BTreeMap;
use std::path::Path;

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Control vector width: six desired pose values and one gripper flag.
pub const CONTROL_DIM: usize = 7;
pub const FRAME_SIZE: u32 = 256;

/// One step of a trajectory.
///
/// `x` holds the end-effector position followed by each object's position, all
/// in meters. `u` holds the desired end-effector pose (position, then
/// roll-pitch-yaw) and the gripper flag (0 open, 1 closed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: u64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<String>,
}

impl StepRecord {
    pub fn gripper_closed(&self) -> bool {
        self.u.last().copied() == Some(1.0)
    }
}

/// Canonical frame id for step `k`.
pub fn frame_id(k: u64) -> String {
    format!("frame_{k:05}.png")
}

/// A 256x256 RGB raster with the step number drawn into it.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB, `width * height * 3` bytes.
    pub pixels: Vec<u8>,
    pub step_label: u64,
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("step_label", &self.step_label)
            .finish_non_exhaustive()
    }
}

impl Frame {
    pub fn blank(step_label: u64, rgb: [u8; 3]) -> Self {
        let n = (FRAME_SIZE * FRAME_SIZE) as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&rgb);
        }
        Self {
            width: FRAME_SIZE,
            height: FRAME_SIZE,
            pixels,
            step_label,
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = ((y * self.width + x) * 3) as usize;
            self.pixels[i..i + 3].copy_from_slice(&rgb);
        }
    }

    pub fn check(&self) -> Result<(), CoreError> {
        if self.width != FRAME_SIZE || self.height != FRAME_SIZE {
            return Err(CoreError::InvalidFrame(format!(
                "expected {FRAME_SIZE}x{FRAME_SIZE}, got {}x{}",
                self.width, self.height
            )));
        }
        if self.pixels.len() != (self.width * self.height * 3) as usize {
            return Err(CoreError::InvalidFrame("pixel buffer size mismatch".into()));
        }
        Ok(())
    }

    pub fn to_png(&self) -> Result<Vec<u8>, CoreError> {
        let img = image::RgbImage::from_raw(self.width, self.height, self.pixels.clone())
            .ok_or_else(|| CoreError::InvalidFrame("pixel buffer size mismatch".into()))?;
        let mut out = std::io::Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| CoreError::Png(e.to_string()))?;
        Ok(out.into_inner())
    }

    pub fn from_png(bytes: &[u8], step_label: u64) -> Result<Self, CoreError> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
            .map_err(|e| CoreError::Png(e.to_string()))?
            .to_rgb8();
        let frame = Self {
            width: img.width(),
            height: img.height(),
            pixels: img.into_raw(),
            step_label,
        };
        frame.check()?;
        Ok(frame)
    }

    pub fn to_base64_png(&self) -> Result<String, CoreError> {
        Ok(base64::engine::general_purpose::STANDARD.encode(self.to_png()?))
    }
}

/// A full recorded trajectory `D`.
///
/// Frames are held in memory keyed by frame id. On disk they are written as
/// sibling PNG files next to the JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryData {
    pub env_name: String,
    pub seed: u64,
    /// Names of the non-robot objects whose positions follow the effector in `x`.
    pub objects: Vec<String>,
    pub steps: Vec<StepRecord>,
    #[serde(skip)]
    pub frames: BTreeMap<String, Frame>,
}

impl TrajectoryData {
    pub fn state_dim(&self) -> usize {
        3 + 3 * self.objects.len()
    }

    /// Last step index `K`.
    pub fn last_step(&self) -> Option<u64> {
        self.steps.last().map(|s| s.k)
    }

    pub fn has_frames(&self) -> bool {
        !self.frames.is_empty()
    }

    pub fn step(&self, k: u64) -> Option<&StepRecord> {
        self.steps.get(usize::try_from(k).ok()?).filter(|s| s.k == k)
    }

    /// Frames in step order. Steps without a frame are skipped.
    pub fn frames_in_order(&self) -> impl Iterator<Item = (&StepRecord, &Frame)> {
        self.steps.iter().filter_map(move |s| {
            s.frame
                .as_ref()
                .and_then(|id| self.frames.get(id))
                .map(|f| (s, f))
        })
    }

    /// The textual subset: same steps, no frames.
    pub fn without_frames(&self) -> Self {
        Self {
            env_name: self.env_name.clone(),
            seed: self.seed,
            objects: self.objects.clone(),
            steps: self
                .steps
                .iter()
                .map(|s| StepRecord {
                    frame: None,
                    ..s.clone()
                })
                .collect(),
            frames: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |m: String| Err(CoreError::InvalidTrajectory(m));
        let dim = self.state_dim();
        for (i, s) in self.steps.iter().enumerate() {
            if s.k != i as u64 {
                return bad(format!("step at position {i} has index {}", s.k));
            }
            if s.x.len() != dim {
                return bad(format!("step {}: state has {} values, expected {dim}", s.k, s.x.len()));
            }
            if s.u.len() != CONTROL_DIM {
                return bad(format!("step {}: control has {} values, expected {CONTROL_DIM}", s.k, s.u.len()));
            }
            let g = s.u[CONTROL_DIM - 1];
            if g != 0.0 && g != 1.0 {
                return bad(format!("step {}: gripper flag {g} is not 0 or 1", s.k));
            }
            if self.has_frames() {
                if let Some(id) = &s.frame {
                    match self.frames.get(id) {
                        None => return bad(format!("step {}: frame {id} missing", s.k)),
                        Some(f) => {
                            f.check()?;
                            if f.step_label != s.k {
                                return bad(format!(
                                    "step {}: frame labelled {}",
                                    s.k, f.step_label
                                ));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CoreError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Writes the JSON document to `path` and each frame as a PNG file in the
    /// same directory.
    pub fn save(&self, path: &Path) -> Result<(), CoreError> {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        for (id, frame) in &self.frames {
            crate::io::write_atomic(&dir.join(id), &frame.to_png()?)?;
        }
        crate::io::write_atomic(path, self.to_json().as_bytes())
    }

    /// Reads the JSON document and any referenced PNG frames that exist.
    pub fn load(path: &Path) -> Result<Self, CoreError> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let mut data = Self::from_json(&text)?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        for s in &data.steps {
            if let Some(id) = &s.frame {
                let p = dir.join(id);
                if p.exists() {
                    let bytes = std::fs::read(&p).map_err(|e| CoreError::io(&p, e))?;
                    data.frames.insert(id.clone(), Frame::from_png(&bytes, s.k)?);
                }
            }
        }
        Ok(data)
    }
}
