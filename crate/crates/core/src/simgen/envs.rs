use super::{Aabb, EnvSpec, FsmPhase, ObjectSpec, PhaseKind, TargetRule, DEFAULT_TOLERANCE};

pub const BUILTIN_ENV_NAMES: [&str; 4] = ["Door", "Lift", "PickPlace", "Stack"];

const HOME: [f64; 3] = [0.0, 0.0, 1.0];
// cube centers rest on a table top at z = 0.80
const CUBE_Z: f64 = 0.82;

pub fn builtin_envs() -> Vec<EnvSpec> {
    vec![door(), lift(), pick_place(), stack()]
}

/// Looks up a built-in environment by name, ignoring ASCII case.
pub fn builtin_env(name: &str) -> Option<EnvSpec> {
    builtin_envs()
        .into_iter()
        .find(|e| e.name.eq_ignore_ascii_case(name))
}

fn move_to(description: &str, object: &str, offset: [f64; 3], gripper_closed: bool) -> FsmPhase {
    FsmPhase {
        description: description.into(),
        kind: PhaseKind::Move {
            target: TargetRule::Object {
                object: object.into(),
                offset,
            },
        },
        gripper_closed,
    }
}

fn grasp(description: &str, object: &str, dwell: u64) -> FsmPhase {
    FsmPhase {
        description: description.into(),
        kind: PhaseKind::Grasp {
            object: object.into(),
            dwell,
        },
        gripper_closed: true,
    }
}

fn release(description: &str, dwell: u64) -> FsmPhase {
    FsmPhase {
        description: description.into(),
        kind: PhaseKind::Release { dwell },
        gripper_closed: false,
    }
}

fn object(name: &str, min: [f64; 3], max: [f64; 3]) -> ObjectSpec {
    ObjectSpec {
        name: name.into(),
        placement: Aabb { min, max },
    }
}

fn door() -> EnvSpec {
    EnvSpec {
        name: "Door".into(),
        objects: vec![object("handle", [0.18, -0.12, 1.00], [0.28, 0.12, 1.10])],
        home: HOME,
        script: vec![
            move_to("Move to door handle", "handle", [0.0; 3], false),
            grasp("Grasp door handle", "handle", 2),
            move_to("Turn door handle down", "handle", [0.0, 0.0, -0.06], true),
            move_to("Pull door open", "handle", [-0.22, 0.08, 0.0], true),
            release("Release door handle", 3),
        ],
        step_speed: 0.0075,
        target_extent: 80,
        tolerance: DEFAULT_TOLERANCE,
        min_separation: 0.0,
    }
}

fn lift() -> EnvSpec {
    EnvSpec {
        name: "Lift".into(),
        objects: vec![object("cube", [-0.15, -0.15, CUBE_Z], [0.15, 0.15, CUBE_Z])],
        home: HOME,
        script: vec![
            move_to("Move to cube", "cube", [0.0; 3], false),
            grasp("Grasp Cube", "cube", 2),
            move_to("Lift Cube", "cube", [0.0, 0.0, 0.2], true),
        ],
        step_speed: 0.012,
        target_extent: 40,
        tolerance: DEFAULT_TOLERANCE,
        min_separation: 0.0,
    }
}

fn pick_place() -> EnvSpec {
    EnvSpec {
        name: "PickPlace".into(),
        objects: vec![
            object("can", [-0.22, -0.15, 0.84], [-0.05, 0.15, 0.84]),
            object("bin", [0.12, -0.15, 0.80], [0.25, 0.15, 0.80]),
        ],
        home: HOME,
        script: vec![
            move_to("Move to above can", "can", [0.0, 0.0, 0.12], false),
            move_to("Move down to can", "can", [0.0; 3], false),
            grasp("Grasp can", "can", 2),
            move_to("Lift can", "can", [0.0, 0.0, 0.15], true),
            move_to("Move can to above bin", "bin", [0.0, 0.0, 0.19], true),
            move_to("Lower can into bin", "bin", [0.0, 0.0, 0.08], true),
            release("Release can", 2),
        ],
        step_speed: 0.012,
        target_extent: 80,
        tolerance: DEFAULT_TOLERANCE,
        min_separation: 0.15,
    }
}

fn stack() -> EnvSpec {
    EnvSpec {
        name: "Stack".into(),
        objects: vec![
            object("cube_a", [-0.15, -0.15, CUBE_Z], [0.15, 0.15, CUBE_Z]),
            object("cube_b", [-0.15, -0.15, CUBE_Z], [0.15, 0.15, CUBE_Z]),
        ],
        home: HOME,
        script: vec![
            move_to("Move to above Cube A", "cube_a", [0.0, 0.0, 0.1], false),
            move_to("Move directly down to Cube A", "cube_a", [0.0; 3], false),
            grasp("Grasp Cube A", "cube_a", 2),
            move_to("Vertically pick up Cube A", "cube_a", [0.0, 0.0, 0.15], true),
            move_to("Align Cube A with Cube B", "cube_b", [0.0, 0.0, 0.15], true),
            move_to("Move Cube A vertically down to Cube B", "cube_b", [0.0, 0.0, 0.04], true),
            release("Release Cube A onto Cube B", 4),
            FsmPhase {
                description: "Return Home".into(),
                kind: PhaseKind::Move {
                    target: TargetRule::Fixed(HOME),
                },
                gripper_closed: false,
            },
        ],
        step_speed: 0.016,
        target_extent: 62,
        tolerance: DEFAULT_TOLERANCE,
        min_separation: 0.08,
    }
}
