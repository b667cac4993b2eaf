//! Comma-separated rendering of the textual trajectory data.

use std::fmt::Write;

use crate::trajectory::{StepRecord, TrajectoryData};

const CONTROL_COLUMNS: [&str; 7] = ["u_x", "u_y", "u_z", "u_roll", "u_pitch", "u_yaw", "gripper"];

/// Column names: `k`, effector position, object positions, then controls.
pub fn columns(data: &TrajectoryData) -> Vec<String> {
    let mut cols = vec!["k".to_string(), "ee_x".into(), "ee_y".into(), "ee_z".into()];
    for o in &data.objects {
        for axis in ["x", "y", "z"] {
            cols.push(format!("{o}_{axis}"));
        }
    }
    cols.extend(CONTROL_COLUMNS.iter().map(|c| c.to_string()));
    cols
}

pub fn header(data: &TrajectoryData) -> String {
    columns(data).join(",")
}

fn fixed3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

/// One row: integer step, three-decimal reals, integer gripper flag.
pub fn row(step: &StepRecord) -> String {
    let mut out = step.k.to_string();
    for v in &step.x {
        out.push(',');
        out.push_str(&fixed3(*v));
    }
    let (pose, gripper) = step.u.split_at(step.u.len().saturating_sub(1));
    for v in pose {
        out.push(',');
        out.push_str(&fixed3(*v));
    }
    for g in gripper {
        let _ = write!(out, ",{}", *g as i64);
    }
    out
}

/// Header line followed by one line per step.
pub fn serialize_textual(data: &TrajectoryData) -> String {
    let mut out = header(data);
    for s in &data.steps {
        out.push('\n');
        out.push_str(&row(s));
    }
    out
}
