//! Scripted kinematic trajectory generator.
//!
//! An environment is a list of objects with randomized placements and a
//! script of FSM phases. Each phase drives a point end-effector toward a
//! target in a straight line, at most `step_speed` meters per step, and ends
//! on a spatial condition or after a fixed dwell. Every phase emits exactly
//! one ground-truth sub-task, so the decomposition tiles `[0, K]`.

mod envs;
mod render;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decomposition::{SubTask, SubTaskDecomposition};
use crate::trajectory::{frame_id, StepRecord, TrajectoryData};

pub use envs::{builtin_env, builtin_envs, BUILTIN_ENV_NAMES};
pub use render::{marker_rects, read_step_label, render_frame, Rect, LABEL_RECT};

/// Fixed end-effector orientation (roll, pitch, yaw) written into every control.
pub const EFFECTOR_RPY: [f64; 3] = [std::f64::consts::PI, 0.0, 0.0];

pub const DEFAULT_TOLERANCE: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("phase {index} ({description:?}) exceeded its budget of {budget} steps")]
    PhaseBudgetExceeded {
        index: usize,
        description: String,
        budget: u64,
    },
    #[error("invalid environment {env}: {reason}")]
    InvalidEnv { env: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn point(p: [f64; 3]) -> Self {
        Self { min: p, max: p }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> [f64; 3] {
        let mut p = [0.0; 3];
        for (i, v) in p.iter_mut().enumerate() {
            *v = if self.max[i] > self.min[i] {
                rng.random_range(self.min[i]..self.max[i])
            } else {
                self.min[i]
            };
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub placement: Aabb,
}

/// Where a phase sends the effector. Evaluated once, on the world state at
/// the phase's first step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetRule {
    Fixed([f64; 3]),
    Object { object: String, offset: [f64; 3] },
    /// Stay where the effector is.
    Hold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    /// Move toward the target; done once within tolerance of it.
    Move { target: TargetRule },
    /// Hold still with the gripper closed for `dwell` steps, then attach `object`.
    Grasp { object: String, dwell: u64 },
    /// Detach whatever is held and hold still for `dwell` steps.
    Release { dwell: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsmPhase {
    pub description: String,
    pub kind: PhaseKind,
    /// Gripper flag written into the control for every step of this phase.
    pub gripper_closed: bool,
}

impl FsmPhase {
    pub fn target_rule(&self) -> &TargetRule {
        match &self.kind {
            PhaseKind::Move { target } => target,
            _ => &TargetRule::Hold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub objects: Vec<ObjectSpec>,
    pub home: [f64; 3],
    pub script: Vec<FsmPhase>,
    /// Maximum effector displacement per step, meters.
    pub step_speed: f64,
    /// Approximate expected `K`.
    pub target_extent: u64,
    /// Reach tolerance for move phases, meters.
    pub tolerance: f64,
    /// Minimum horizontal distance between sampled object placements.
    pub min_separation: f64,
}

impl EnvSpec {
    pub fn num_subtasks(&self) -> usize {
        self.script.len()
    }

    pub fn descriptions(&self) -> Vec<&str> {
        self.script.iter().map(|p| p.description.as_str()).collect()
    }

    pub fn step_budget(&self) -> u64 {
        10 * self.target_extent.max(1)
    }

    /// Same environment, with speed rescaled so trajectories come out near
    /// `extent` steps instead.
    pub fn with_target_extent(mut self, extent: u64) -> Self {
        let extent = extent.max(1);
        self.step_speed *= self.target_extent as f64 / extent as f64;
        self.target_extent = extent;
        self
    }

    fn object_index(&self, name: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.name == name)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |reason: String| {
            Err(SimError::InvalidEnv {
                env: self.name.clone(),
                reason,
            })
        };
        if self.script.is_empty() {
            return bad("script is empty".into());
        }
        if !(self.step_speed.is_finite() && self.step_speed >= 0.0) {
            return bad(format!("step speed {}", self.step_speed));
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return bad(format!("tolerance {}", self.tolerance));
        }
        for (i, p) in self.script.iter().enumerate() {
            if p.description.trim().is_empty() {
                return bad(format!("phase {i} has no description"));
            }
            let referenced = match &p.kind {
                PhaseKind::Move {
                    target: TargetRule::Object { object, .. },
                } => Some(object),
                PhaseKind::Grasp { object, .. } => Some(object),
                _ => None,
            };
            if let Some(name) = referenced {
                if self.object_index(name).is_none() {
                    return bad(format!("phase {i} references unknown object {name:?}"));
                }
            }
        }
        Ok(())
    }
}

/// Positions of the effector and every object, plus grasp bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub effector: [f64; 3],
    pub gripper_closed: bool,
    pub objects: Vec<[f64; 3]>,
    held: Option<(usize, [f64; 3])>,
}

impl WorldState {
    pub fn new(effector: [f64; 3], objects: Vec<[f64; 3]>) -> Self {
        Self {
            effector,
            gripper_closed: false,
            objects,
            held: None,
        }
    }

    /// Rebuilds positions from a recorded state vector.
    pub fn from_state_vec(x: &[f64]) -> Self {
        let effector = [x[0], x[1], x[2]];
        let objects = x[3..].chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Self::new(effector, objects)
    }

    pub fn state_vec(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(3 + 3 * self.objects.len());
        x.extend_from_slice(&self.effector);
        for o in &self.objects {
            x.extend_from_slice(o);
        }
        x
    }

    pub fn held_object(&self) -> Option<usize> {
        self.held.map(|(i, _)| i)
    }

    fn advance_toward(&mut self, target: [f64; 3], max_step: f64) {
        let d = sub(target, self.effector);
        let dist = norm(d);
        if dist <= max_step {
            self.effector = target;
        } else if dist > 0.0 {
            let s = max_step / dist;
            self.effector = [
                self.effector[0] + d[0] * s,
                self.effector[1] + d[1] * s,
                self.effector[2] + d[2] * s,
            ];
        }
        if let Some((i, offset)) = self.held {
            self.objects[i] = add(self.effector, offset);
        }
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm(sub(a, b))
}

/// Resolves a target rule against a world state.
pub fn resolve_target(env: &EnvSpec, rule: &TargetRule, world: &WorldState) -> [f64; 3] {
    match rule {
        TargetRule::Fixed(p) => *p,
        TargetRule::Hold => world.effector,
        TargetRule::Object { object, offset } => {
            let i = env.object_index(object).expect("validated object reference");
            add(world.objects[i], *offset)
        }
    }
}

/// Samples object placements for `seed`. Placements are redrawn (a bounded
/// number of times) until all objects are `min_separation` apart horizontally.
pub fn sample_placements(env: &EnvSpec, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placed: Vec<[f64; 3]> = Vec::with_capacity(env.objects.len());
    for obj in &env.objects {
        let mut p = obj.placement.sample(&mut rng);
        for _ in 0..1000 {
            let clear = placed
                .iter()
                .all(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt() >= env.min_separation);
            if clear {
                break;
            }
            p = obj.placement.sample(&mut rng);
        }
        placed.push(p);
    }
    placed
}

/// Runs the environment script for one seed.
///
/// Returns the trajectory and its ground-truth decomposition. Identical
/// `(env, seed)` give identical output.
pub fn generate_trajectory(
    env: &EnvSpec,
    seed: u64,
    with_frames: bool,
) -> Result<(TrajectoryData, SubTaskDecomposition), SimError> {
    env.validate()?;
    let mut world = WorldState::new(env.home, sample_placements(env, seed));
    let budget = env.step_budget();
    let mut steps = Vec::new();
    let mut frames = BTreeMap::new();
    let mut subtasks = Vec::with_capacity(env.script.len());
    let mut k = 0u64;

    for (index, phase) in env.script.iter().enumerate() {
        if let PhaseKind::Release { .. } = phase.kind {
            world.held = None;
        }
        world.gripper_closed = phase.gripper_closed;
        let target = resolve_target(env, phase.target_rule(), &world);
        let start = k;
        let mut in_phase = 0u64;
        loop {
            if in_phase >= budget {
                return Err(SimError::PhaseBudgetExceeded {
                    index,
                    description: phase.description.clone(),
                    budget,
                });
            }
            let mut u = Vec::with_capacity(7);
            u.extend_from_slice(&target);
            u.extend_from_slice(&EFFECTOR_RPY);
            u.push(if phase.gripper_closed { 1.0 } else { 0.0 });
            let frame = with_frames.then(|| {
                let id = frame_id(k);
                frames.insert(id.clone(), render_frame(&world, k));
                id
            });
            steps.push(StepRecord {
                k,
                x: world.state_vec(),
                u,
                frame,
            });
            in_phase += 1;

            let done = match &phase.kind {
                PhaseKind::Move { .. } => distance(world.effector, target) <= env.tolerance,
                PhaseKind::Grasp { dwell, .. } | PhaseKind::Release { dwell } => in_phase >= (*dwell).max(1),
            };
            if done {
                if let PhaseKind::Grasp { object, .. } = &phase.kind {
                    let i = env.object_index(object).expect("validated object reference");
                    world.held = Some((i, sub(world.objects[i], world.effector)));
                }
            }
            world.advance_toward(target, env.step_speed);
            if done {
                break;
            }
            k += 1;
        }
        subtasks.push(SubTask::new(start, k, phase.description.clone()));
        k += 1;
    }

    let data = TrajectoryData {
        env_name: env.name.clone(),
        seed,
        objects: env.objects.iter().map(|o| o.name.clone()).collect(),
        steps,
        frames,
    };
    Ok((data, SubTaskDecomposition::ground_truth(subtasks)))
}

/// Re-checks, from recorded data only, that the last step of every phase
/// satisfies that phase's completion condition and that the gripper flag
/// matches the script. Returns a description of the first mismatch.
pub fn check_phase_conditions(
    env: &EnvSpec,
    data: &TrajectoryData,
    gt: &SubTaskDecomposition,
) -> Result<(), String> {
    if gt.len() != env.script.len() {
        return Err(format!("{} sub-tasks for {} phases", gt.len(), env.script.len()));
    }
    for (phase, s) in env.script.iter().zip(gt.iter()) {
        let first = data.step(s.start).ok_or(format!("missing step {}", s.start))?;
        let last = data.step(s.end).ok_or(format!("missing step {}", s.end))?;
        let expected_flag = if phase.gripper_closed { 1.0 } else { 0.0 };
        for k in s.start..=s.end {
            let step = data.step(k).ok_or(format!("missing step {k}"))?;
            if step.u[6] != expected_flag {
                return Err(format!("{:?}: gripper flag at step {k}", phase.description));
            }
        }
        match &phase.kind {
            PhaseKind::Move { target } => {
                let target = resolve_target(env, target, &WorldState::from_state_vec(&first.x));
                let eff = [last.x[0], last.x[1], last.x[2]];
                if distance(eff, target) > env.tolerance + 1e-12 {
                    return Err(format!("{:?}: ends {:.4} m from target", phase.description, distance(eff, target)));
                }
            }
            PhaseKind::Grasp { dwell, .. } | PhaseKind::Release { dwell } => {
                if s.end - s.start + 1 != (*dwell).max(1) {
                    return Err(format!("{:?}: dwell of {} steps", phase.description, s.end - s.start + 1));
                }
            }
        }
    }
    Ok(())
}
