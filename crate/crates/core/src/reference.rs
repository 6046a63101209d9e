//! Cyclic reference squat motion for imitation: a cosine-eased root-height
//! profile resolved to joint targets by planar two-link inverse kinematics
//! so the feet stay flat on the ground, plus an import path for externally
//! authored joint trajectories.
//!
//! All targets are C¹ and periodic over the cycle; left and right legs are
//! identical; ankle inversion/eversion targets are zero; the root stays
//! upright.

use nalgebra::{DVector, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::multibody::{DynWorkspace, ModelInstance};

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("unreachable squat: {0}")]
    Unreachable(String),
    #[error("bad reference input: {0}")]
    BadInput(String),
}

/// Targets at one time instant. End-effector (foot) targets are expressed
/// relative to the root frame; root and CoM targets are world frame.
#[derive(Debug, Clone)]
pub struct RefSample {
    pub joints: [f64; 8],
    pub joint_vels: [f64; 8],
    pub root_pos: Vector3<f64>,
    pub root_quat: UnitQuaternion<f64>,
    pub com: Vector3<f64>,
    pub ee_left: Vector3<f64>,
    pub ee_right: Vector3<f64>,
}

/// Sagittal leg geometry extracted from the model by joint name.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LegGeometry {
    pub thigh: f64,
    pub shank: f64,
    /// World height of the dorsi/plantar ankle joint with the foot flat.
    pub ankle_z: f64,
}

impl LegGeometry {
    pub fn from_model(model: &ModelInstance) -> Option<Self> {
        let knee = model.joint("knee_l")?;
        let ankle = model.joint("ankle_dp_l")?;
        let mut ws = model.workspace();
        let zero = model.zero_state();
        model.forward_kinematics(&zero.q, &mut ws);
        let ankle_body = model.body_index("talus_l")?;
        Some(Self {
            thigh: knee.origin.norm(),
            shank: ankle.origin.norm(),
            ankle_z: ws.poses[ankle_body].pos.z,
        })
    }
}

#[derive(Debug, Clone)]
enum Source {
    Squat { depth: f64, table: PoseTable },
    Spline(PeriodicSpline),
}

/// Reference pose tabulated over the descent phase `s ∈ [0, 1]` on a
/// uniform grid: sagittal hip/knee/ankle angles plus the root fore-aft
/// offset that keeps the whole-model CoM centered over the feet. Sampled
/// with a C¹ Hermite spline; the time profile `s(t) = (1 − cos(2πt/T))/2`
/// has zero rate at the cycle seam, so the motion in time is C¹ and
/// exactly periodic.
#[derive(Debug, Clone)]
struct PoseTable {
    /// Rows of (hip, knee, ankle dorsi/plantar, root x).
    rows: Vec<[f64; 4]>,
}

impl PoseTable {
    /// Clamped Catmull-Rom value and d/ds of every channel at `s`.
    fn eval(&self, s: f64) -> ([f64; 4], [f64; 4]) {
        let n = self.rows.len();
        let h = 1.0 / (n - 1) as f64;
        let fk = s.clamp(0.0, 1.0) / h;
        let k = (fk.floor() as usize).min(n - 2);
        let u = fk - k as f64;
        let at = |i: isize| self.rows[i.clamp(0, (n - 1) as isize) as usize];
        let (p0, p1, p2, p3) = (at(k as isize - 1), at(k as isize), at(k as isize + 1), at(k as isize + 2));
        // h00 + h01 = 1, so fold the value around p1; constant data then
        // reproduces exactly.
        let (_, h10, h01, h11) = hermite_basis(u);
        let (_, d10, d01, d11) = hermite_basis_deriv(u);
        let mut value = [0.0; 4];
        let mut slope = [0.0; 4];
        for c in 0..4 {
            let m1 = (p2[c] - p0[c]) / 2.0;
            let m2 = (p3[c] - p1[c]) / 2.0;
            let rise = p2[c] - p1[c];
            value[c] = p1[c] + h01 * rise + h10 * m1 + h11 * m2;
            slope[c] = (d01 * rise + d10 * m1 + d11 * m2) / h;
        }
        (value, slope)
    }
}

/// Planar leg pose for a hip at `(hip_x, hip_z)` relative to the ankle,
/// knee on the forward side: returns (hip, knee, ankle) joint angles for
/// +y rotation axes with the foot kept flat.
pub(crate) fn leg_ik(l1: f64, l2: f64, hip_x: f64, hip_z: f64) -> Option<(f64, f64, f64)> {
    let r2 = hip_x * hip_x + hip_z * hip_z;
    let r = r2.sqrt();
    if r >= l1 + l2 - 1e-9 || r <= (l1 - l2).abs() + 1e-9 {
        return None;
    }
    // Intersection of the two link circles; pick the forward knee.
    // Work from the hip: ankle at -hip relative to hip.
    let ax = -hip_x;
    let az = -hip_z;
    let a = (l1 * l1 - l2 * l2 + r2) / (2.0 * r);
    let h2 = l1 * l1 - a * a;
    if h2 < 0.0 {
        return None;
    }
    let h = h2.sqrt();
    let (ux, uz) = (ax / r, az / r);
    // Perpendicular (uz, -ux) points forward when the ankle is below.
    let k1 = (a * ux + h * uz, a * uz - h * ux);
    let k2 = (a * ux - h * uz, a * uz + h * ux);
    let knee = if k1.0 >= k2.0 { k1 } else { k2 };

    // Joint angles from segment directions: R_y(t)·(-z) = (-sin t, -cos t).
    let thigh = (knee.0 / l1, knee.1 / l1);
    let theta_hip = (-thigh.0).atan2(-thigh.1);
    let shank = ((ax - knee.0) / l2, (az - knee.1) / l2);
    let total = (-shank.0).atan2(-shank.1);
    let theta_knee = total - theta_hip;
    let theta_ankle = -total;
    Some((theta_hip, theta_knee, theta_ankle))
}

/// The 4-second cyclic squat (or an imported trajectory) with all the
/// quantities the imitation reward tracks. Immutable once generated.
#[derive(Debug, Clone)]
pub struct ReferenceMotion {
    cycle: f64,
    geometry: LegGeometry,
    source: Source,
    standing_root_z: f64,
    root_xy: (f64, f64),
    /// Static pelvis-spring extension of an attached human load; zero for
    /// the bare exoskeleton.
    human_sag: f64,
}

impl ReferenceMotion {
    /// Crouch-and-rise of the given depth over one cycle. The root height
    /// follows a cosine-eased profile; at every phase the root is also
    /// shifted fore-aft so the whole-model CoM stays over the center of
    /// foot support (hips travel backward as the knees travel forward,
    /// as in a natural squat), and the planar two-link IK keeps the feet
    /// flat. The standing pose keeps a slight knee bend so the leg never
    /// passes through the singular straight configuration.
    pub fn squat(
        model: &ModelInstance,
        depth: f64,
        cycle: f64,
        standing_knee: f64,
    ) -> Result<Self, ReferenceError> {
        Self::squat_settled(model, depth, cycle, standing_knee, 0.0)
    }

    /// Like [`squat`](Self::squat), for a model carrying the human chain:
    /// `human_sag` is the static pelvis-spring extension, and the CoM
    /// centering pass poses the human at that settled configuration.
    pub fn squat_settled(
        model: &ModelInstance,
        depth: f64,
        cycle: f64,
        standing_knee: f64,
        human_sag: f64,
    ) -> Result<Self, ReferenceError> {
        if cycle <= 0.0 {
            return Err(ReferenceError::BadInput(format!("cycle {cycle} must be positive")));
        }
        if depth < 0.0 {
            return Err(ReferenceError::BadInput(format!("depth {depth} must be non-negative")));
        }
        let geometry = LegGeometry::from_model(model)
            .ok_or_else(|| ReferenceError::BadInput("model lacks the expected leg joints".into()))?;
        let (l1, l2) = (geometry.thigh, geometry.shank);
        let d0 = (l1 * l1 + l2 * l2 + 2.0 * l1 * l2 * standing_knee.cos()).sqrt();
        if d0 - depth <= (l1 - l2).abs() + 1e-6 {
            return Err(ReferenceError::Unreachable(format!(
                "depth {depth} m exceeds the kinematic reach of the {l1}+{l2} m leg"
            )));
        }

        // Forward offset of the foot center from the ankle when flat.
        let mut ws = model.workspace();
        let zero = model.zero_state();
        model.forward_kinematics(&zero.q, &mut ws);
        let talus = model
            .body_index("talus_l")
            .ok_or_else(|| ReferenceError::BadInput("model lacks talus_l".into()))?;
        let foot = model.feet()[0].body;
        let foot_forward = ws.poses[foot].pos.x - ws.poses[talus].pos.x;

        // The CoM target in ankle-local coordinates: the support center.
        let com_target = foot_forward;
        let com_x_of = |model: &ModelInstance, ws: &mut DynWorkspace, b: f64, d_vert: f64| -> Option<f64> {
            let (th, tk, ta) = leg_ik(l1, l2, -b, d_vert)?;
            let joints = [th, th, tk, tk, ta, ta, 0.0, 0.0];
            let mut q = model.zero_state().q;
            q[0] = -b;
            q[2] = geometry.ankle_z + d_vert;
            for (k, joint) in model.actuated().iter().enumerate() {
                q[joint.q_index] = joints[k];
            }
            settle_human_chain(model, &mut q, &joints, human_sag);
            model.forward_kinematics(&q, ws);
            Some(model.com_world(ws).x)
        };

        const GRID: usize = 257;
        let mut rows = Vec::with_capacity(GRID);
        let mut b = 0.0;
        let mut b0 = 0.0;
        for i in 0..GRID {
            let s = i as f64 / (GRID - 1) as f64;
            let d_vert = d0 - depth * s;
            // Newton on the root fore-aft offset; warm-started from the
            // previous grid point so a few iterations suffice.
            let mut converged = false;
            for _ in 0..60 {
                let f = com_x_of(model, &mut ws, b, d_vert)
                    .ok_or_else(|| ReferenceError::Unreachable(format!(
                        "depth {depth} m is out of reach at phase {s:.3}"
                    )))?
                    - com_target;
                if f.abs() < 1e-12 {
                    converged = true;
                    break;
                }
                let h = 1e-6;
                let fp = com_x_of(model, &mut ws, b + h, d_vert).unwrap_or(f64::NAN) - com_target;
                let fm = com_x_of(model, &mut ws, b - h, d_vert).unwrap_or(f64::NAN) - com_target;
                let df = (fp - fm) / (2.0 * h);
                if !df.is_finite() || df.abs() < 1e-9 {
                    break;
                }
                b -= f / df;
            }
            if !converged {
                return Err(ReferenceError::Unreachable(format!(
                    "CoM centering did not converge at phase {s:.3} for depth {depth} m"
                )));
            }
            if i == 0 {
                b0 = b;
            }
            let (th, tk, ta) = leg_ik(l1, l2, -b, d_vert).expect("converged pose is reachable");
            if tk > 2.35 {
                return Err(ReferenceError::Unreachable(format!(
                    "depth {depth} m needs {tk:.2} rad of knee flexion"
                )));
            }
            rows.push([th, tk, ta, b0 - b]);
            if depth == 0.0 {
                // Degenerate squat: hold the standing row bit-exactly.
                let row = rows[0];
                rows.resize(GRID, row);
                break;
            }
        }

        Ok(Self {
            cycle,
            geometry,
            source: Source::Squat { depth, table: PoseTable { rows } },
            standing_root_z: geometry.ankle_z + d0,
            root_xy: (0.0, 0.0),
            human_sag,
        })
    }

    /// Import an externally authored joint trajectory from CSV rows of
    /// `time, j0..j7` (actuated order). The samples are resampled with a
    /// periodic C¹ spline; the root target is held at the standing pose.
    pub fn from_csv(
        model: &ModelInstance,
        text: &str,
        standing_knee: f64,
    ) -> Result<Self, ReferenceError> {
        let geometry = LegGeometry::from_model(model)
            .ok_or_else(|| ReferenceError::BadInput("model lacks the expected leg joints".into()))?;
        let mut times = Vec::new();
        let mut rows: Vec<[f64; 8]> = Vec::new();
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        for record in reader.records() {
            let record = record.map_err(|e| ReferenceError::BadInput(format!("csv: {e}")))?;
            if record.len() != 9 {
                return Err(ReferenceError::BadInput(format!(
                    "expected 9 columns (time + 8 targets), found {}",
                    record.len()
                )));
            }
            let mut values = [0.0; 9];
            for (i, field) in record.iter().enumerate() {
                values[i] = field
                    .trim()
                    .parse()
                    .map_err(|e| ReferenceError::BadInput(format!("csv field '{field}': {e}")))?;
            }
            times.push(values[0]);
            rows.push(values[1..9].try_into().unwrap());
        }
        if rows.len() < 4 {
            return Err(ReferenceError::BadInput("need at least 4 samples".into()));
        }
        let dt = times[1] - times[0];
        for w in times.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 {
                return Err(ReferenceError::BadInput("samples must be uniformly spaced".into()));
            }
        }
        let cycle = times.len() as f64 * dt;
        let (l1, l2) = (geometry.thigh, geometry.shank);
        let d0 = (l1 * l1 + l2 * l2 + 2.0 * l1 * l2 * standing_knee.cos()).sqrt();
        Ok(Self {
            cycle,
            geometry,
            source: Source::Spline(PeriodicSpline::new(rows, dt)),
            standing_root_z: geometry.ankle_z + d0,
            root_xy: (0.0, 0.0),
            human_sag: 0.0,
        })
    }

    pub fn cycle(&self) -> f64 {
        self.cycle
    }

    pub fn standing_root_z(&self) -> f64 {
        self.standing_root_z
    }

    pub fn geometry(&self) -> &LegGeometry {
        &self.geometry
    }

    /// Joint targets and velocities only; cheap, no kinematics.
    pub fn sample_joints(&self, t: f64) -> ([f64; 8], [f64; 8]) {
        let t = t.rem_euclid(self.cycle);
        match &self.source {
            Source::Squat { table, .. } => {
                let phase = 2.0 * std::f64::consts::PI * t / self.cycle;
                let s = (1.0 - phase.cos()) / 2.0;
                let s_dot = std::f64::consts::PI / self.cycle * phase.sin();
                let (val, slope) = table.eval(s);
                let joints = [val[0], val[0], val[1], val[1], val[2], val[2], 0.0, 0.0];
                let vels = [
                    slope[0] * s_dot,
                    slope[0] * s_dot,
                    slope[1] * s_dot,
                    slope[1] * s_dot,
                    slope[2] * s_dot,
                    slope[2] * s_dot,
                    0.0,
                    0.0,
                ];
                (joints, vels)
            }
            Source::Spline(spline) => spline.sample(t),
        }
    }

    /// Phase value and the root fore-aft offset at time `t` (squat source).
    fn squat_root(&self, t: f64) -> Option<(f64, f64)> {
        match &self.source {
            Source::Squat { table, .. } => {
                let phase = 2.0 * std::f64::consts::PI * (t.rem_euclid(self.cycle)) / self.cycle;
                let s = (1.0 - phase.cos()) / 2.0;
                let (val, _) = table.eval(s);
                Some((s, val[3]))
            }
            Source::Spline(_) => None,
        }
    }

    /// Full targets including root, CoM and root-relative foot positions,
    /// evaluated with the nominal model's kinematics.
    pub fn sample(&self, model: &ModelInstance, ws: &mut DynWorkspace, t: f64) -> RefSample {
        let (joints, joint_vels) = self.sample_joints(t);
        let (root_x, root_z) = match (&self.source, self.squat_root(t)) {
            (Source::Squat { depth, .. }, Some((s, x))) => {
                (self.root_xy.0 + x, self.standing_root_z - depth * s)
            }
            _ => (self.root_xy.0, self.standing_root_z),
        };
        let root_pos = Vector3::new(root_x, self.root_xy.1, root_z);
        let q = self.reference_q(model, &joints, &root_pos);
        model.forward_kinematics(&q, ws);
        let com = model.com_world(ws);
        let left = ws.poses[model.feet()[0].body].pos;
        let right = ws.poses[model.feet()[1].body].pos;
        // Root orientation is identity, so root-relative is a plain offset.
        RefSample {
            joints,
            joint_vels,
            root_pos,
            root_quat: UnitQuaternion::identity(),
            com,
            ee_left: left - root_pos,
            ee_right: right - root_pos,
        }
    }

    /// The actuated-joint targets at the next `horizon` control ticks,
    /// spaced `tick` seconds apart.
    pub fn future_targets(&self, t: f64, horizon: usize, tick: f64) -> Vec<[f64; 8]> {
        (1..=horizon).map(|k| self.sample_joints(t + k as f64 * tick).0).collect()
    }

    /// Generalized coordinates of the reference pose.
    pub fn reference_q(
        &self,
        model: &ModelInstance,
        joints: &[f64; 8],
        root_pos: &Vector3<f64>,
    ) -> DVector<f64> {
        let mut q = model.zero_state().q;
        q[0] = root_pos.x;
        q[1] = root_pos.y;
        q[2] = root_pos.z;
        q[3] = 1.0;
        q[4] = 0.0;
        q[5] = 0.0;
        q[6] = 0.0;
        for (k, joint) in model.actuated().iter().enumerate() {
            q[joint.q_index] = joints[k];
        }
        settle_human_chain(model, &mut q, joints, self.human_sag);
        q
    }
}

/// When the model carries the strapped human chain, pose it consistently
/// with the exoskeleton leg: the human pelvis rides `sag` below its mount
/// (the static extension of the pelvis spring once it carries the trunk)
/// and the human leg angles solve the correspondingly shortened reach with
/// the foot kept flat on the welded exoskeleton foot. With `sag` of zero
/// and matching segment lengths this reduces to copying the exoskeleton
/// angles.
pub fn settle_human_chain(model: &ModelInstance, q: &mut DVector<f64>, joints: &[f64; 8], sag: f64) {
    let Some(mount) = model.joint("h_mount") else { return };
    q[mount.q_offset] = -sag;

    // Hip-to-ankle vector of the exoskeleton leg, reconstructed from its
    // sagittal joint angles: R_y(t)·(-z) = (-sin t, -cos t) per segment.
    let l1 = model.joint("knee_l").map(|j| j.origin.norm()).unwrap_or(0.4);
    let l2 = model.joint("ankle_dp_l").map(|j| j.origin.norm()).unwrap_or(0.4);
    let lh1 = model.joint("h_knee_l").map(|j| j.origin.norm()).unwrap_or(0.4);
    let lh2 = model.joint("h_ankle_l").map(|j| j.origin.norm()).unwrap_or(0.4);
    for (side, (hip_j, knee_j)) in [(0usize, ("h_hip_l", "h_knee_l")), (1, ("h_hip_r", "h_knee_r"))] {
        let th = joints[side];
        let tk = joints[2 + side];
        let thigh = (-(th).sin(), -(th).cos());
        let total = th + tk;
        let shank = (-(total).sin(), -(total).cos());
        let ankle_rel_hip = (l1 * thigh.0 + l2 * shank.0, l1 * thigh.1 + l2 * shank.1);
        let hip_rel_ankle = (-ankle_rel_hip.0, -ankle_rel_hip.1);
        let solved = leg_ik(lh1, lh2, hip_rel_ankle.0, hip_rel_ankle.1 - sag);
        let ankle_j = if side == 0 { "h_ankle_l" } else { "h_ankle_r" };
        if let Some((hh, hk, ha)) = solved {
            for (name, value) in [(hip_j, hh), (knee_j, hk), (ankle_j, ha)] {
                if let Some(joint) = model.joint(name) {
                    q[joint.q_offset] = value;
                }
            }
        } else {
            // Out of reach (should not happen for sane sags): copy angles.
            for (name, value) in [(hip_j, th), (knee_j, tk), (ankle_j, joints[4 + side])] {
                if let Some(joint) = model.joint(name) {
                    q[joint.q_offset] = value;
                }
            }
        }
    }
}

/// Knee flexion for a hip-to-ankle reach `r` (law of cosines).
pub fn knee_angle(l1: f64, l2: f64, r: f64) -> f64 {
    let c = ((r * r - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    c.acos()
}

/// Uniform periodic Catmull-Rom spline over 8 channels.
#[derive(Debug, Clone)]
struct PeriodicSpline {
    rows: Vec<[f64; 8]>,
    dt: f64,
}

impl PeriodicSpline {
    fn new(rows: Vec<[f64; 8]>, dt: f64) -> Self {
        Self { rows, dt }
    }

    fn sample(&self, t: f64) -> ([f64; 8], [f64; 8]) {
        let n = self.rows.len();
        let period = n as f64 * self.dt;
        let t = t.rem_euclid(period);
        let fk = t / self.dt;
        let k = (fk.floor() as usize).min(n - 1);
        let s = fk - k as f64;
        let idx = |i: isize| -> usize { (((k as isize + i) % n as isize + n as isize) % n as isize) as usize };
        let (p0, p1, p2, p3) = (self.rows[idx(-1)], self.rows[idx(0)], self.rows[idx(1)], self.rows[idx(2)]);
        let mut value = [0.0; 8];
        let mut vel = [0.0; 8];
        for c in 0..8 {
            let m1 = (p2[c] - p0[c]) / 2.0;
            let m2 = (p3[c] - p1[c]) / 2.0;
            let (h00, h10, h01, h11) = hermite_basis(s);
            value[c] = h00 * p1[c] + h10 * m1 + h01 * p2[c] + h11 * m2;
            let (d00, d10, d01, d11) = hermite_basis_deriv(s);
            vel[c] = (d00 * p1[c] + d10 * m1 + d01 * p2[c] + d11 * m2) / self.dt;
        }
        (value, vel)
    }
}

fn hermite_basis(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2)
}

fn hermite_basis_deriv(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    (6.0 * s2 - 6.0 * s, 3.0 * s2 - 4.0 * s + 1.0, -6.0 * s2 + 6.0 * s, 3.0 * s2 - 2.0 * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_exoskeleton;

    const STANDING_KNEE: f64 = 0.24;

    fn model() -> ModelInstance {
        ModelInstance::build(&default_exoskeleton()).unwrap()
    }

    #[test]
    fn zero_depth_is_constant_standing() {
        let model = model();
        let motion = ReferenceMotion::squat(&model, 0.0, 4.0, STANDING_KNEE).unwrap();
        let (j0, v0) = motion.sample_joints(0.0);
        for t in [0.5, 1.7, 3.2] {
            let (j, v) = motion.sample_joints(t);
            assert_eq!(j, j0);
            for k in 0..8 {
                assert!(v[k].abs() < 1e-12);
                assert!(v0[k].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cycle_closure_is_exact() {
        let model = model();
        let motion = ReferenceMotion::squat(&model, 0.25, 4.0, STANDING_KNEE).unwrap();
        let (j0, v0) = motion.sample_joints(0.0);
        let (j1, v1) = motion.sample_joints(4.0);
        for k in 0..8 {
            assert!((j0[k] - j1[k]).abs() < 1e-9);
            assert!((v0[k] - v1[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn knee_matches_two_link_ik_oracle() {
        let model = model();
        let depth = 0.25;
        let motion = ReferenceMotion::squat(&model, depth, 4.0, STANDING_KNEE).unwrap();
        // At the bottom of the squat (t = cycle/2, an exact grid point)
        // reconstruct the hip-to-ankle reach through forward kinematics and
        // compare the sampled knee angle with the law-of-cosines solution.
        let mut ws = model.workspace();
        let s = motion.sample(&model, &mut ws, 2.0);
        let q = motion.reference_q(&model, &s.joints, &s.root_pos);
        model.forward_kinematics(&q, &mut ws);
        let hip = model.joint("hip_l").unwrap();
        let hip_world = model.point_world(&ws, model.body_index("pelvis").unwrap(), &hip.origin);
        let ankle_world = ws.poses[model.body_index("talus_l").unwrap()].pos;
        let reach = (hip_world - ankle_world).norm();
        let expected_knee = knee_angle(0.40, 0.40, reach);
        assert!(
            (s.joints[2] - expected_knee).abs() < 1e-6,
            "knee {} vs closed form {}",
            s.joints[2],
            expected_knee
        );
        // Vertical drop matches the commanded depth at the bottom.
        assert!((s.root_pos.z - (motion.standing_root_z() - depth)).abs() < 1e-9);
    }

    #[test]
    fn reference_com_stays_over_support_center() {
        let model = model();
        let motion = ReferenceMotion::squat(&model, 0.25, 4.0, STANDING_KNEE).unwrap();
        let mut ws = model.workspace();
        // The support center sits at the foot-frame origin's world x.
        for t in [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5] {
            let s = motion.sample(&model, &mut ws, t);
            let q = motion.reference_q(&model, &s.joints, &s.root_pos);
            model.forward_kinematics(&q, &mut ws);
            let com = model.com_world(&ws);
            let foot_x = ws.poses[model.feet()[0].body].pos.x;
            assert!(
                (com.x - foot_x).abs() < 1e-4,
                "CoM x {} vs support center {} at t={t}",
                com.x,
                foot_x
            );
        }
    }

    #[test]
    fn velocities_match_finite_differences() {
        let model = model();
        let motion = ReferenceMotion::squat(&model, 0.25, 4.0, STANDING_KNEE).unwrap();
        let h = 1e-6;
        for t in [0.3, 1.1, 2.0, 2.9, 3.99] {
            let (_, vel) = motion.sample_joints(t);
            let (jp, _) = motion.sample_joints(t + h);
            let (jm, _) = motion.sample_joints(t - h);
            for k in 0..8 {
                let fd = (jp[k] - jm[k]) / (2.0 * h);
                assert!((vel[k] - fd).abs() < 1e-5, "joint {k} at t={t}: {} vs {}", vel[k], fd);
            }
        }
    }

    #[test]
    fn bilateral_symmetry_everywhere() {
        let model = model();
        let motion = ReferenceMotion::squat(&model, 0.25, 4.0, STANDING_KNEE).unwrap();
        for i in 0..40 {
            let (j, v) = motion.sample_joints(i as f64 * 0.1);
            assert_eq!(j[0], j[1]);
            assert_eq!(j[2], j[3]);
            assert_eq!(j[4], j[5]);
            assert_eq!(j[6], 0.0);
            assert_eq!(j[7], 0.0);
            assert_eq!(v[0], v[1]);
        }
    }

    #[test]
    fn feet_stay_flat_on_the_ground() {
        let model = model();
        let motion = ReferenceMotion::squat(&model, 0.25, 4.0, STANDING_KNEE).unwrap();
        let mut ws = model.workspace();
        let mut first = Vec::new();
        for i in 0..=40 {
            let t = i as f64 * 0.1;
            let s = motion.sample(&model, &mut ws, t);
            let q = motion.reference_q(&model, &s.joints, &s.root_pos);
            model.forward_kinematics(&q, &mut ws);
            for foot in model.feet() {
                for sensor in &foot.sensors {
                    let p = model.point_world(&ws, foot.body, sensor);
                    assert!(p.z.abs() < 1e-6, "sensor height {} at t={t}", p.z);
                    if i == 0 {
                        first.push(p);
                    }
                }
            }
        }
        // Feet never move in world frame over the cycle.
        let s = motion.sample(&model, &mut ws, 1.3);
        let q = motion.reference_q(&model, &s.joints, &s.root_pos);
        model.forward_kinematics(&q, &mut ws);
        let mut idx = 0;
        for foot in model.feet() {
            for sensor in &foot.sensors {
                let p = model.point_world(&ws, foot.body, sensor);
                assert!((p - first[idx]).norm() < 1e-6);
                idx += 1;
            }
        }
    }

    #[test]
    fn future_targets_of_flat_motion_repeat_standing() {
        let model = model();
        let motion = ReferenceMotion::squat(&model, 0.0, 4.0, STANDING_KNEE).unwrap();
        let targets = motion.future_targets(0.7, 6, 1.0 / 30.0);
        assert_eq!(targets.len(), 6);
        let (standing, _) = motion.sample_joints(0.0);
        for row in targets {
            assert_eq!(row, standing);
        }
    }

    #[test]
    fn excessive_depth_is_unreachable() {
        let model = model();
        assert!(matches!(
            ReferenceMotion::squat(&model, 0.6, 4.0, STANDING_KNEE),
            Err(ReferenceError::Unreachable(_))
        ));
    }

    #[test]
    fn csv_round_trip_reproduces_squat() {
        let model = model();
        let motion = ReferenceMotion::squat(&model, 0.2, 4.0, STANDING_KNEE).unwrap();
        let mut text = String::from("time,hip_l,hip_r,knee_l,knee_r,ankle_dp_l,ankle_dp_r,ankle_ie_l,ankle_ie_r\n");
        let n = 120;
        let dt = 4.0 / n as f64;
        for i in 0..n {
            let (j, _) = motion.sample_joints(i as f64 * dt);
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                i as f64 * dt,
                j[0], j[1], j[2], j[3], j[4], j[5], j[6], j[7]
            ));
        }
        let imported = ReferenceMotion::from_csv(&model, &text, STANDING_KNEE).unwrap();
        assert!((imported.cycle() - 4.0).abs() < 1e-9);
        for t in [0.0, 0.77, 1.5, 2.31, 3.9] {
            let (a, _) = motion.sample_joints(t);
            let (b, _) = imported.sample_joints(t);
            for k in 0..8 {
                assert!((a[k] - b[k]).abs() < 1e-4, "joint {k} at {t}: {} vs {}", a[k], b[k]);
            }
        }
    }
}
