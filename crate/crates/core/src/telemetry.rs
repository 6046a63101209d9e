//! Telemetry files: the per-step evaluation CSV, the per-foot CoP trace
//! CSV, the per-iteration training log, and tabular plot-data exports.
//! All CSVs carry a header row and a fixed column order.

use std::fs::File;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::contact::FootCop;
use crate::env::reward::RewardBreakdown;
use crate::env::StepTelemetry;
use crate::ppo::IterationLog;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed telemetry: {0}")]
    Malformed(String),
}

pub const JOINT_NAMES: [&str; 8] = [
    "hip_l",
    "hip_r",
    "knee_l",
    "knee_r",
    "ankle_dp_l",
    "ankle_dp_r",
    "ankle_ie_l",
    "ankle_ie_r",
];

/// Column order of the per-step telemetry CSV.
pub fn telemetry_columns() -> Vec<String> {
    let mut cols = vec!["time".to_string()];
    for n in JOINT_NAMES {
        cols.push(format!("q_{n}"));
    }
    for n in JOINT_NAMES {
        cols.push(format!("qd_{n}"));
    }
    for n in JOINT_NAMES {
        cols.push(format!("tau_{n}"));
    }
    for n in JOINT_NAMES {
        cols.push(format!("tau_peak_{n}"));
    }
    for side in ["l", "r"] {
        cols.push(format!("cop_{side}_x"));
        cols.push(format!("cop_{side}_y"));
        cols.push(format!("cop_{side}_valid"));
        cols.push(format!("cop_{side}_normal"));
    }
    for r in ["pose", "velocity", "end_effector", "root", "com", "cop", "torque", "total"] {
        cols.push(format!("r_{r}"));
    }
    for p in ["hip", "femur_l", "femur_r", "tibia_l", "tibia_r"] {
        cols.push(format!("perturb_{p}"));
    }
    for s in ["pelvis", "femur", "tibia", "weld"] {
        cols.push(format!("spring_{s}"));
    }
    for n in JOINT_NAMES {
        cols.push(format!("action_{n}"));
    }
    for n in JOINT_NAMES {
        cols.push(format!("target_{n}"));
    }
    cols.extend(["root_x".into(), "root_y".into(), "root_z".into()]);
    cols
}

fn row_of(t: &StepTelemetry) -> Vec<f64> {
    let mut row = vec![t.time];
    row.extend_from_slice(&t.joints);
    row.extend_from_slice(&t.joint_vels);
    row.extend_from_slice(&t.torques);
    row.extend_from_slice(&t.torques_peak);
    for cop in [&t.cop_left, &t.cop_right] {
        row.push(cop.cop[0]);
        row.push(cop.cop[1]);
        row.push(if cop.valid { 1.0 } else { 0.0 });
        row.push(cop.total_normal);
    }
    row.extend([
        t.reward.pose,
        t.reward.velocity,
        t.reward.end_effector,
        t.reward.root,
        t.reward.com,
        t.reward.cop,
        t.reward.torque,
        t.reward.total,
    ]);
    row.extend_from_slice(&t.perturb_forces);
    row.extend([t.springs.pelvis, t.springs.femur, t.springs.tibia, t.springs.weld]);
    row.extend_from_slice(&t.action_raw);
    row.extend_from_slice(&t.target_joints);
    row.extend_from_slice(&t.root_pos);
    row
}

/// Streaming writer for the per-step telemetry CSV.
pub struct TelemetryWriter {
    writer: csv::Writer<File>,
    rows: usize,
}

impl TelemetryWriter {
    pub fn create(path: &Path) -> Result<Self, TelemetryError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(telemetry_columns())?;
        Ok(Self { writer, rows: 0 })
    }

    pub fn write(&mut self, t: &StepTelemetry) -> Result<(), TelemetryError> {
        let row = row_of(t);
        self.writer.write_record(row.iter().map(|v| format_float(*v)))?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn finish(mut self) -> Result<usize, TelemetryError> {
        self.writer.flush()?;
        Ok(self.rows)
    }
}

/// Full round-trip float formatting.
fn format_float(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

/// Read a telemetry CSV back into step records (peak torques included).
pub fn read_telemetry(path: &Path) -> Result<Vec<StepTelemetry>, TelemetryError> {
    let mut reader = csv::Reader::from_path(path)?;
    let expected = telemetry_columns();
    {
        let headers = reader.headers()?;
        if headers.len() != expected.len() {
            return Err(TelemetryError::Malformed(format!(
                "expected {} columns, found {}",
                expected.len(),
                headers.len()
            )));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let values: Result<Vec<f64>, _> = record.iter().map(|f| f.parse::<f64>()).collect();
        let v = values.map_err(|e| TelemetryError::Malformed(format!("bad float: {e}")))?;
        if v.len() != expected.len() {
            return Err(TelemetryError::Malformed("short row".into()));
        }
        let mut i = 0;
        let mut take = |n: usize| {
            let s = &v[i..i + n];
            i += n;
            s.to_vec()
        };
        let time = take(1)[0];
        let joints: [f64; 8] = take(8).try_into().unwrap();
        let joint_vels: [f64; 8] = take(8).try_into().unwrap();
        let torques: [f64; 8] = take(8).try_into().unwrap();
        let torques_peak: [f64; 8] = take(8).try_into().unwrap();
        let mut cops = Vec::new();
        for foot in 0..2 {
            let c = take(4);
            cops.push(FootCop {
                foot,
                cop: [c[0], c[1]],
                valid: c[2] != 0.0,
                distance_to_center: (c[0] * c[0] + c[1] * c[1]).sqrt(),
                total_normal: c[3],
            });
        }
        let r = take(8);
        let reward = RewardBreakdown {
            pose: r[0],
            velocity: r[1],
            end_effector: r[2],
            root: r[3],
            com: r[4],
            cop: r[5],
            cop_left: 0.0,
            cop_right: 0.0,
            torque: r[6],
            total: r[7],
        };
        let perturb: [f64; 5] = take(5).try_into().unwrap();
        let s = take(4);
        let springs = crate::env::human::SpringTelemetry {
            pelvis: s[0],
            femur: s[1],
            tibia: s[2],
            weld: s[3],
        };
        let action_raw: [f64; 8] = take(8).try_into().unwrap();
        let target_joints: [f64; 8] = take(8).try_into().unwrap();
        let root: [f64; 3] = take(3).try_into().unwrap();
        rows.push(StepTelemetry {
            time,
            joints,
            joint_vels,
            torques,
            torques_peak,
            cop_left: cops[0],
            cop_right: cops[1],
            reward,
            perturb_forces: perturb,
            springs,
            action_raw,
            action_filtered: [0.0; 8],
            root_pos: root,
            target_joints,
        });
    }
    Ok(rows)
}

/// Per-foot long-format CoP trace: `time, foot, cop_x, cop_y, valid,
/// total_normal_N`.
pub fn write_cop_csv(path: &Path, rows: &[StepTelemetry]) -> Result<(), TelemetryError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["time", "foot", "cop_x", "cop_y", "valid", "total_normal_N"])?;
    for t in rows {
        for (name, cop) in [("left", &t.cop_left), ("right", &t.cop_right)] {
            writer.write_record([
                format_float(t.time),
                name.to_string(),
                format_float(cop.cop[0]),
                format_float(cop.cop[1]),
                (cop.valid as u8).to_string(),
                format_float(cop.total_normal),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Training log CSV, one row per iteration.
pub fn write_training_log(path: &Path, log: &[IterationLog]) -> Result<(), TelemetryError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut writer = csv::Writer::from_path(path)?;
    for entry in log {
        writer.serialize(entry)?;
    }
    writer.flush()?;
    Ok(())
}

/// Plot-ready tabular exports: time series per figure with the stable
/// region borders as constant columns on the CoP traces.
pub fn export_plots(dir: &Path, rows: &[StepTelemetry]) -> Result<Vec<PathBuf>, TelemetryError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let cop_path = dir.join("cop_traces.csv");
    {
        let mut w = csv::Writer::from_path(&cop_path)?;
        w.write_record([
            "time",
            "cop_l_forward",
            "cop_l_lateral",
            "cop_r_forward",
            "cop_r_lateral",
            "border_forward_pos",
            "border_forward_neg",
            "border_lateral_pos",
            "border_lateral_neg",
        ])?;
        for t in rows {
            w.write_record([
                format_float(t.time),
                format_float(t.cop_left.cop[0]),
                format_float(t.cop_left.cop[1]),
                format_float(t.cop_right.cop[0]),
                format_float(t.cop_right.cop[1]),
                "0.055".into(),
                "-0.055".into(),
                "0.035".into(),
                "-0.035".into(),
            ])?;
        }
        w.flush()?;
    }
    written.push(cop_path);

    let joints_path = dir.join("joint_angles.csv");
    {
        let mut w = csv::Writer::from_path(&joints_path)?;
        let mut header = vec!["time".to_string()];
        for n in JOINT_NAMES {
            header.push(format!("q_{n}"));
        }
        for n in JOINT_NAMES {
            header.push(format!("target_{n}"));
        }
        w.write_record(&header)?;
        for t in rows {
            let mut row = vec![format_float(t.time)];
            row.extend(t.joints.iter().map(|v| format_float(*v)));
            row.extend(t.target_joints.iter().map(|v| format_float(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    written.push(joints_path);

    let torques_path = dir.join("joint_torques.csv");
    {
        let mut w = csv::Writer::from_path(&torques_path)?;
        let mut header = vec!["time".to_string()];
        for n in JOINT_NAMES {
            header.push(format!("tau_{n}"));
        }
        for n in JOINT_NAMES {
            header.push(format!("tau_peak_{n}"));
        }
        w.write_record(&header)?;
        for t in rows {
            let mut row = vec![format_float(t.time)];
            row.extend(t.torques.iter().map(|v| format_float(*v)));
            row.extend(t.torques_peak.iter().map(|v| format_float(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    written.push(torques_path);

    let rewards_path = dir.join("reward_traces.csv");
    {
        let mut w = csv::Writer::from_path(&rewards_path)?;
        w.write_record([
            "time", "r_pose", "r_velocity", "r_end_effector", "r_root", "r_com", "r_cop",
            "r_torque", "r_total",
        ])?;
        for t in rows {
            w.write_record([
                format_float(t.time),
                format_float(t.reward.pose),
                format_float(t.reward.velocity),
                format_float(t.reward.end_effector),
                format_float(t.reward.root),
                format_float(t.reward.com),
                format_float(t.reward.cop),
                format_float(t.reward.torque),
                format_float(t.reward.total),
            ])?;
        }
        w.flush()?;
    }
    written.push(rewards_path);

    let actions_path = dir.join("action_traces.csv");
    {
        let mut w = csv::Writer::from_path(&actions_path)?;
        let mut header = vec!["time".to_string()];
        for n in JOINT_NAMES {
            header.push(format!("action_{n}"));
        }
        w.write_record(&header)?;
        for t in rows {
            let mut row = vec![format_float(t.time)];
            row.extend(t.action_raw.iter().map(|v| format_float(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    written.push(actions_path);

    let perturb_path = dir.join("perturbation_forces.csv");
    {
        let mut w = csv::Writer::from_path(&perturb_path)?;
        w.write_record(["time", "hip", "femur_l", "femur_r", "tibia_l", "tibia_r"])?;
        for t in rows {
            let mut row = vec![format_float(t.time)];
            row.extend(t.perturb_forces.iter().map(|v| format_float(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    written.push(perturb_path);

    Ok(written)
}
