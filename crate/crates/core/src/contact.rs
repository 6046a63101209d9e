//! Ground contact at the four foot sensor points and center-of-pressure
//! estimation.
//!
//! Contact is a regularized point model: a spring-damper normal force and
//! Coulomb friction with a linear slip ramp at each sensor, replacing an
//! LCP solver. The four contact points coincide with the force transducers,
//! so sensed ground reaction forces are exact.
//!
//! The CoP of a foot is the point on the support surface where the tipping
//! moment (the moment component tangential to the surface) vanishes:
//! `[Σ (C − Oᵢ) × Fᵢ] × n = 0`.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::multibody::{DynWorkspace, ExternalForceSet, ModelInstance};

/// Regularized contact parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContactParams {
    /// Normal spring stiffness, N/m.
    pub normal_stiffness: f64,
    /// Normal damping, N·s/m. Only resists downward motion.
    pub normal_damping: f64,
    /// Coulomb friction coefficient.
    pub friction: f64,
    /// Slip speed at which friction saturates, m/s.
    pub slip_velocity: f64,
    /// Total normal force below which a foot's CoP is invalid, N.
    pub cop_threshold: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        // Damping and slip speed are sized for explicit integration at
        // 900 Hz against the light foot modes, including the widest inertia
        // randomization. Stiffer settings ring or blow up.
        Self {
            normal_stiffness: 1e5,
            normal_damping: 200.0,
            friction: 1.0,
            slip_velocity: 0.1,
            cop_threshold: 20.0,
        }
    }
}

/// Rectangular stable region around the foot center: x forward, y lateral.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StableRegion {
    pub half_x: f64,
    pub half_y: f64,
}

impl Default for StableRegion {
    fn default() -> Self {
        // 11 cm forward by 7 cm lateral.
        Self { half_x: 0.055, half_y: 0.035 }
    }
}

impl StableRegion {
    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x.abs() <= self.half_x && p.y.abs() <= self.half_y
    }
}

/// Per-foot sensor positions and measured forces, world frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FootForces {
    /// Index into `model.feet()`.
    pub foot: usize,
    pub sensor_world: [[f64; 3]; 4],
    pub force_world: [[f64; 3]; 4],
    /// Unit support-surface normal.
    pub normal: [f64; 3],
    /// Sum of normal force components, N.
    pub total_normal: f64,
    /// Foot link pose used to express the CoP in the foot frame.
    pub foot_rotation: [[f64; 3]; 3],
    pub foot_position: [f64; 3],
}

impl FootForces {
    pub fn sensor(&self, i: usize) -> Vector3<f64> {
        Vector3::from(self.sensor_world[i])
    }

    pub fn force(&self, i: usize) -> Vector3<f64> {
        Vector3::from(self.force_world[i])
    }

    pub fn normal_vec(&self) -> Vector3<f64> {
        Vector3::from(self.normal)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.foot_rotation[r][c])
    }
}

/// Sensor forces for every foot of the model.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SensorForceSet {
    pub feet: Vec<FootForces>,
}

/// CoP of one foot in its foot frame (x forward, y lateral).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FootCop {
    pub foot: usize,
    /// 2D CoP in the foot frame; the foot center when invalid.
    pub cop: [f64; 2],
    pub valid: bool,
    /// Euclidean distance from the CoP to the center of the stable region.
    pub distance_to_center: f64,
    pub total_normal: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoPEstimate {
    pub feet: Vec<FootCop>,
    pub region: StableRegion,
}

/// Ground reaction forces at every sensor point of every foot.
///
/// The workspace must hold kinematics for the state being queried. Points
/// above the ground plane z = 0 produce zero force.
pub fn contact_forces(
    model: &ModelInstance,
    params: &ContactParams,
    ws: &DynWorkspace,
) -> SensorForceSet {
    let normal = Vector3::z();
    let mut feet = Vec::with_capacity(model.feet().len());
    for (fi, foot) in model.feet().iter().enumerate() {
        let pose = ws.poses[foot.body];
        let mut sensor_world = [[0.0; 3]; 4];
        let mut force_world = [[0.0; 3]; 4];
        let mut total_normal = 0.0;
        for (si, offset) in foot.sensors.iter().enumerate() {
            let p = model.point_world(ws, foot.body, offset);
            sensor_world[si] = [p.x, p.y, p.z];
            if p.z >= 0.0 {
                continue;
            }
            let v = model.point_velocity(ws, foot.body, offset);
            let penetration = -p.z;
            // Damping only resists approach; the normal force never pulls.
            let fn_mag = (params.normal_stiffness * penetration
                + params.normal_damping * (-v.z).max(0.0))
            .max(0.0);
            let mut force = normal * fn_mag;

            let v_tan = Vector3::new(v.x, v.y, 0.0);
            let speed = v_tan.norm();
            if speed > 1e-12 {
                let scale = (speed / params.slip_velocity).min(1.0);
                force -= v_tan / speed * (params.friction * fn_mag * scale);
            }
            force_world[si] = [force.x, force.y, force.z];
            total_normal += fn_mag;
        }
        feet.push(FootForces {
            foot: fi,
            sensor_world,
            force_world,
            normal: [0.0, 0.0, 1.0],
            total_normal,
            foot_rotation: [
                [pose.rot[(0, 0)], pose.rot[(0, 1)], pose.rot[(0, 2)]],
                [pose.rot[(1, 0)], pose.rot[(1, 1)], pose.rot[(1, 2)]],
                [pose.rot[(2, 0)], pose.rot[(2, 1)], pose.rot[(2, 2)]],
            ],
            foot_position: [pose.pos.x, pose.pos.y, pose.pos.z],
        });
    }
    SensorForceSet { feet }
}

/// Append the sensor forces to an external force set for the dynamics.
pub fn apply_contact_forces(
    model: &ModelInstance,
    forces: &SensorForceSet,
    out: &mut ExternalForceSet,
) {
    for foot_forces in &forces.feet {
        let foot = &model.feet()[foot_forces.foot];
        for si in 0..4 {
            let f = foot_forces.force(si);
            if f != Vector3::zeros() {
                out.push(foot.body, foot.sensors[si], f);
            }
        }
    }
}

/// Solve the zero-tipping-moment condition for every foot.
///
/// When the total normal force is below the contact threshold the foot CoP
/// is flagged invalid and reported at the foot center. Otherwise the CoP is
/// the unique in-plane point where the moment tangential to the surface
/// vanishes; for pure normal loading it reduces to the force-weighted mean
/// of the sensor positions.
pub fn compute_cop(forces: &SensorForceSet, params: &ContactParams, region: StableRegion) -> CoPEstimate {
    let feet = forces
        .feet
        .iter()
        .map(|f| {
            let n = f.normal_vec();
            if f.total_normal < params.cop_threshold {
                return FootCop {
                    foot: f.foot,
                    cop: [0.0, 0.0],
                    valid: false,
                    distance_to_center: 0.0,
                    total_normal: f.total_normal,
                };
            }
            // In-plane basis on the support surface through z = 0.
            let e1 = orthonormal_tangent(&n);
            let e2 = n.cross(&e1);
            let plane_origin = Vector3::zeros();

            let mut f_tot = Vector3::zeros();
            let mut moment_origin = Vector3::zeros();
            for i in 0..4 {
                let fi = f.force(i);
                f_tot += fi;
                moment_origin += f.sensor(i).cross(&fi);
            }
            let fn_proj = f_tot.dot(&n);
            // C = plane_origin + x·e1 + y·e2 with the tangential moment at C
            // projected out. (e1×F)·e1 vanishes, so the system decouples.
            let rhs1 = moment_origin.dot(&e1) - plane_origin.cross(&f_tot).dot(&e1);
            let rhs2 = moment_origin.dot(&e2) - plane_origin.cross(&f_tot).dot(&e2);
            let x = -rhs2 / fn_proj;
            let y = rhs1 / fn_proj;
            let c_world = plane_origin + e1 * x + e2 * y;

            // Express in the foot frame and keep the in-sole components.
            let local = f.rotation().transpose() * (c_world - Vector3::from(f.foot_position));
            let cop2 = Vector2::new(local.x, local.y);
            FootCop {
                foot: f.foot,
                cop: [cop2.x, cop2.y],
                valid: true,
                distance_to_center: cop2.norm(),
                total_normal: f.total_normal,
            }
        })
        .collect();
    CoPEstimate { feet, region }
}

/// Distance from the CoP to the region center together with the inside
/// flag. Invalid feet report the center distance of zero and inside = true
/// for the substituted center point; callers gate on `valid`.
pub fn region_distance(cop: &FootCop, region: &StableRegion) -> (f64, bool) {
    let p = Vector2::new(cop.cop[0], cop.cop[1]);
    (p.norm(), region.contains(&p))
}

fn orthonormal_tangent(n: &Vector3<f64>) -> Vector3<f64> {
    let candidate = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    (candidate - n * candidate.dot(n)).normalize()
}
