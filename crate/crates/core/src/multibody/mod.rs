//! Articulated floating-base rigid-body dynamics.
//!
//! A [`ModelInstance`] is built once from a [`ModelSpec`](crate::model::ModelSpec)
//! and is immutable afterwards; it can be shared freely across threads.
//! All mutable simulation state lives in [`GeneralizedState`] plus a
//! per-caller [`DynWorkspace`] of scratch buffers, so stepping never
//! allocates.
//!
//! Conventions: world frame is x forward, y left, z up. The root joint
//! stores position in `q[0..3]`, orientation as a unit quaternion
//! `(w, x, y, z)` in `q[3..7]`, linear velocity of the root origin (world
//! frame) in `v[0..3]` and world angular velocity in `v[3..6]`.

mod dynamics;

pub use dynamics::{PdCommand, SpatialInertia};

use std::collections::BTreeMap;

use nalgebra::{DVector, Matrix3, Quaternion, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::model::{InvalidSpec, JointKind, ModelSpec};

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    InvalidSpec(#[from] InvalidSpec),
    /// The mass matrix failed to factor. This signals a broken spec, not a
    /// runtime state.
    #[error("mass matrix is numerically singular")]
    SingularMass,
    #[error("numerical divergence: {0}")]
    NumericalDivergence(String),
}

/// One rigid body together with its inboard joint.
#[derive(Debug, Clone)]
pub struct Body {
    pub name: String,
    pub joint_name: String,
    pub parent: Option<usize>,
    pub kind: JointKind,
    /// Joint position in the parent link frame (world position of the
    /// chain for the root joint).
    pub origin: Vector3<f64>,
    /// Unit rotation/translation axis in the parent frame.
    pub axis: Vector3<f64>,
    pub limits: Option<(f64, f64)>,
    pub torque_limit: Option<f64>,
    pub mass: f64,
    /// Inertia about the body CoM in the body frame.
    pub inertia: Matrix3<f64>,
    pub com: Vector3<f64>,
    pub anchors: BTreeMap<String, Vector3<f64>>,
    pub q_offset: usize,
    pub v_offset: usize,
}

impl Body {
    pub fn q_dim(&self) -> usize {
        match self.kind {
            JointKind::Floating => 7,
            _ => 1,
        }
    }

    pub fn v_dim(&self) -> usize {
        match self.kind {
            JointKind::Floating => 6,
            _ => 1,
        }
    }
}

/// An actuated joint resolved to indices into the generalized vectors.
#[derive(Debug, Clone)]
pub struct ActuatedJoint {
    pub body: usize,
    pub name: String,
    pub q_index: usize,
    pub v_index: usize,
    pub limits: Option<(f64, f64)>,
    pub torque_limit: f64,
}

/// A foot link with its four sensor offsets in the foot frame.
#[derive(Debug, Clone)]
pub struct FootInfo {
    pub body: usize,
    pub sensors: [Vector3<f64>; 4],
}

/// Simulatable articulated chain. Immutable after build.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    bodies: Vec<Body>,
    nq: usize,
    nv: usize,
    actuated: Vec<ActuatedJoint>,
    feet: Vec<FootInfo>,
    total_mass: f64,
    gravity: Vector3<f64>,
    /// Joint-stop stiffness and damping for position limits.
    pub limit_stiffness: f64,
    pub limit_damping: f64,
    /// Episode-termination sanity bounds on |q| and |v|.
    pub position_bound: f64,
    pub velocity_bound: f64,
}

/// Generalized positions, velocities and simulation time.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedState {
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    pub t: f64,
}

/// External point forces: `(body, application point in the link frame,
/// force vector in the world frame)`.
#[derive(Debug, Clone, Default)]
pub struct ExternalForceSet {
    pub entries: Vec<ExternalForce>,
}

#[derive(Debug, Clone)]
pub struct ExternalForce {
    pub body: usize,
    pub point: Vector3<f64>,
    pub force: Vector3<f64>,
}

impl ExternalForceSet {
    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn push(&mut self, body: usize, point: Vector3<f64>, force: Vector3<f64>) {
        self.entries.push(ExternalForce { body, point, force });
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|e| {
            e.point.iter().all(|x| x.is_finite()) && e.force.iter().all(|x| x.is_finite())
        })
    }
}

/// World pose of one body.
#[derive(Debug, Clone, Copy)]
pub struct BodyPose {
    pub rot: Matrix3<f64>,
    pub pos: Vector3<f64>,
}

/// World angular velocity and linear velocity of the body origin.
#[derive(Debug, Clone, Copy, Default)]
pub struct BodyVel {
    pub ang: Vector3<f64>,
    pub lin: Vector3<f64>,
}

/// Scratch buffers reused across dynamics calls. One per simulation thread.
#[derive(Debug, Clone)]
pub struct DynWorkspace {
    pub poses: Vec<BodyPose>,
    pub vels: Vec<BodyVel>,
    pub(crate) ang_acc: Vec<Vector3<f64>>,
    pub(crate) lin_acc: Vec<Vector3<f64>>,
    pub(crate) force: Vec<Vector3<f64>>,
    pub(crate) torque: Vec<Vector3<f64>>,
    pub(crate) ext_force: Vec<Vector3<f64>>,
    pub(crate) ext_torque: Vec<Vector3<f64>>,
    pub(crate) composite: Vec<SpatialInertia>,
    pub(crate) mass_matrix: nalgebra::DMatrix<f64>,
    pub(crate) chol: nalgebra::DMatrix<f64>,
    pub(crate) rhs: DVector<f64>,
    pub(crate) accel: DVector<f64>,
    pub(crate) bias: DVector<f64>,
}

impl ModelInstance {
    /// Build a simulatable instance. The default pose is upright standing
    /// (the spec's zero configuration) with both feet flat.
    pub fn build(spec: &ModelSpec) -> Result<Self, DynamicsError> {
        spec.validate()?;
        let mut bodies = Vec::with_capacity(spec.joints.len());
        let mut name_to_index = BTreeMap::new();
        let mut nq = 0;
        let mut nv = 0;
        for joint in &spec.joints {
            let link = spec
                .links
                .iter()
                .find(|l| l.name == joint.child)
                .expect("validated: child link exists");
            let parent = joint
                .parent
                .as_ref()
                .map(|p| *name_to_index.get(p).expect("validated: topological order"));
            let axis = if joint.kind == JointKind::Floating {
                Vector3::z()
            } else {
                joint.axis_vec().normalize()
            };
            let body = Body {
                name: link.name.clone(),
                joint_name: joint.name.clone(),
                parent,
                kind: joint.kind,
                origin: joint.origin_vec(),
                axis,
                limits: joint.limits.map(|[lo, hi]| (lo, hi)),
                torque_limit: joint.torque_limit,
                mass: link.mass,
                inertia: link.inertia.matrix(),
                com: link.com_vec(),
                anchors: link
                    .anchors
                    .iter()
                    .map(|(k, v)| (k.clone(), Vector3::from(*v)))
                    .collect(),
                q_offset: nq,
                v_offset: nv,
            };
            nq += body.q_dim();
            nv += body.v_dim();
            name_to_index.insert(link.name.clone(), bodies.len());
            bodies.push(body);
        }

        let actuated = spec
            .actuated
            .iter()
            .map(|name| {
                let (bi, body) = bodies
                    .iter()
                    .enumerate()
                    .find(|(_, b)| &b.joint_name == name)
                    .expect("validated: actuated joint exists");
                ActuatedJoint {
                    body: bi,
                    name: name.clone(),
                    q_index: body.q_offset,
                    v_index: body.v_offset,
                    limits: body.limits,
                    torque_limit: body.torque_limit.unwrap_or(100.0),
                }
            })
            .collect();

        let feet = spec
            .feet
            .iter()
            .map(|f| {
                let body = name_to_index[&f.link];
                let mut sensors = [Vector3::zeros(); 4];
                for (i, s) in f.sensors.iter().enumerate().take(4) {
                    sensors[i] = Vector3::from(*s);
                }
                FootInfo { body, sensors }
            })
            .collect();

        Ok(Self {
            bodies,
            nq,
            nv,
            actuated,
            feet,
            total_mass: spec.total_mass,
            gravity: Vector3::new(0.0, 0.0, -GRAVITY),
            limit_stiffness: 2000.0,
            limit_damping: 50.0,
            position_bound: 1e3,
            velocity_bound: 1e3,
        })
    }

    pub fn with_gravity(mut self, gravity: Vector3<f64>) -> Self {
        self.gravity = gravity;
        self
    }

    pub fn gravity(&self) -> Vector3<f64> {
        self.gravity
    }

    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }

    pub fn body_index(&self, name: &str) -> Option<usize> {
        self.bodies.iter().position(|b| b.name == name)
    }

    pub fn joint(&self, joint_name: &str) -> Option<&Body> {
        self.bodies.iter().find(|b| b.joint_name == joint_name)
    }

    pub fn anchor(&self, body: usize, name: &str) -> Option<Vector3<f64>> {
        self.bodies[body].anchors.get(name).copied()
    }

    pub fn nq(&self) -> usize {
        self.nq
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn actuated(&self) -> &[ActuatedJoint] {
        &self.actuated
    }

    pub fn feet(&self) -> &[FootInfo] {
        &self.feet
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn workspace(&self) -> DynWorkspace {
        let n = self.bodies.len();
        DynWorkspace {
            poses: vec![BodyPose { rot: Matrix3::identity(), pos: Vector3::zeros() }; n],
            vels: vec![BodyVel::default(); n],
            ang_acc: vec![Vector3::zeros(); n],
            lin_acc: vec![Vector3::zeros(); n],
            force: vec![Vector3::zeros(); n],
            torque: vec![Vector3::zeros(); n],
            ext_force: vec![Vector3::zeros(); n],
            ext_torque: vec![Vector3::zeros(); n],
            composite: vec![SpatialInertia::zero(); n],
            mass_matrix: nalgebra::DMatrix::zeros(self.nv, self.nv),
            chol: nalgebra::DMatrix::zeros(self.nv, self.nv),
            rhs: DVector::zeros(self.nv),
            accel: DVector::zeros(self.nv),
            bias: DVector::zeros(self.nv),
        }
    }

    /// The zero configuration: root at its spec origin with identity
    /// orientation, all joint values zero.
    pub fn zero_state(&self) -> GeneralizedState {
        let mut q = DVector::zeros(self.nq);
        for body in &self.bodies {
            match body.kind {
                JointKind::Floating => {
                    q[body.q_offset] = body.origin.x;
                    q[body.q_offset + 1] = body.origin.y;
                    q[body.q_offset + 2] = body.origin.z;
                    q[body.q_offset + 3] = 1.0;
                }
                _ => q[body.q_offset] = 0.0,
            }
        }
        GeneralizedState { q, v: DVector::zeros(self.nv), t: 0.0 }
    }

    /// Forward kinematics into the workspace pose buffer.
    pub fn forward_kinematics(&self, q: &DVector<f64>, ws: &mut DynWorkspace) {
        debug_assert_eq!(q.len(), self.nq);
        for (i, body) in self.bodies.iter().enumerate() {
            let pose = match body.kind {
                JointKind::Floating => {
                    let pos = Vector3::new(q[body.q_offset], q[body.q_offset + 1], q[body.q_offset + 2]);
                    let quat = UnitQuaternion::from_quaternion(Quaternion::new(
                        q[body.q_offset + 3],
                        q[body.q_offset + 4],
                        q[body.q_offset + 5],
                        q[body.q_offset + 6],
                    ));
                    BodyPose { rot: quat.to_rotation_matrix().into_inner(), pos }
                }
                JointKind::Revolute => {
                    let parent = parent_pose(ws, body.parent);
                    let rot_j = axis_angle_matrix(&body.axis, q[body.q_offset]);
                    BodyPose { rot: parent.rot * rot_j, pos: parent.pos + parent.rot * body.origin }
                }
                JointKind::Prismatic => {
                    let parent = parent_pose(ws, body.parent);
                    BodyPose {
                        rot: parent.rot,
                        pos: parent.pos + parent.rot * (body.origin + body.axis * q[body.q_offset]),
                    }
                }
            };
            ws.poses[i] = pose;
        }
    }

    /// Velocity propagation. Requires `forward_kinematics` to have filled
    /// the pose buffer for the same `q`.
    pub fn velocity_kinematics(&self, v: &DVector<f64>, ws: &mut DynWorkspace) {
        debug_assert_eq!(v.len(), self.nv);
        for (i, body) in self.bodies.iter().enumerate() {
            let vel = match body.kind {
                JointKind::Floating => BodyVel {
                    lin: Vector3::new(v[body.v_offset], v[body.v_offset + 1], v[body.v_offset + 2]),
                    ang: Vector3::new(v[body.v_offset + 3], v[body.v_offset + 4], v[body.v_offset + 5]),
                },
                JointKind::Revolute => {
                    let pv = parent_vel(ws, body.parent);
                    let pp = parent_pose(ws, body.parent);
                    let axis_w = pp.rot * body.axis;
                    let r = ws.poses[i].pos - pp.pos;
                    BodyVel { ang: pv.ang + axis_w * v[body.v_offset], lin: pv.lin + pv.ang.cross(&r) }
                }
                JointKind::Prismatic => {
                    let pv = parent_vel(ws, body.parent);
                    let pp = parent_pose(ws, body.parent);
                    let axis_w = pp.rot * body.axis;
                    let r = ws.poses[i].pos - pp.pos;
                    BodyVel {
                        ang: pv.ang,
                        lin: pv.lin + pv.ang.cross(&r) + axis_w * v[body.v_offset],
                    }
                }
            };
            ws.vels[i] = vel;
        }
    }

    /// World position of a point given in a body frame.
    pub fn point_world(&self, ws: &DynWorkspace, body: usize, local: &Vector3<f64>) -> Vector3<f64> {
        ws.poses[body].pos + ws.poses[body].rot * local
    }

    /// World velocity of a point given in a body frame.
    pub fn point_velocity(
        &self,
        ws: &DynWorkspace,
        body: usize,
        local: &Vector3<f64>,
    ) -> Vector3<f64> {
        let r = ws.poses[body].rot * local;
        ws.vels[body].lin + ws.vels[body].ang.cross(&r)
    }

    /// Whole-model center of mass: mass-weighted mean of link CoMs.
    pub fn com_world(&self, ws: &DynWorkspace) -> Vector3<f64> {
        let mut acc = Vector3::zeros();
        for (i, body) in self.bodies.iter().enumerate() {
            acc += body.mass * self.point_world(ws, i, &body.com);
        }
        acc / self.total_mass
    }

    /// A point expressed relative to the root frame (rotated into it).
    pub fn root_relative(&self, ws: &DynWorkspace, world_point: &Vector3<f64>) -> Vector3<f64> {
        let root = &ws.poses[0];
        root.rot.transpose() * (world_point - root.pos)
    }

    /// Stiff-stop terms for joints outside their position limits: the
    /// spring part goes to the explicit torques, the damping part to the
    /// implicitly integrated per-DoF coefficients. These are structural
    /// forces, kept separate from actuator torques.
    pub fn limit_terms(
        &self,
        state: &GeneralizedState,
        explicit: &mut DVector<f64>,
        implicit_damping: &mut DVector<f64>,
    ) {
        for body in &self.bodies {
            if body.kind == JointKind::Floating {
                continue;
            }
            if let Some((lo, hi)) = body.limits {
                let q = state.q[body.q_offset];
                if q < lo {
                    explicit[body.v_offset] += self.limit_stiffness * (lo - q);
                    implicit_damping[body.v_offset] += self.limit_damping;
                } else if q > hi {
                    explicit[body.v_offset] -= self.limit_stiffness * (q - hi);
                    implicit_damping[body.v_offset] += self.limit_damping;
                }
            }
        }
    }

    /// Semi-implicit Euler step: velocities first, then positions; the root
    /// quaternion is renormalized. Contact and coupling forces must already
    /// be part of `external`.
    pub fn step(
        &self,
        state: &GeneralizedState,
        torques: &DVector<f64>,
        external: &ExternalForceSet,
        dt: f64,
        ws: &mut DynWorkspace,
    ) -> Result<GeneralizedState, DynamicsError> {
        assert!(dt > 0.0, "dt must be positive");
        self.forward_dynamics_in_place(state, torques, external, ws)?;
        let mut v = state.v.clone();
        v.axpy(dt, &ws.rhs, 1.0);
        let mut q = state.q.clone();
        self.integrate_positions(&mut q, &v, dt);
        let next = GeneralizedState { q, v, t: state.t + dt };
        self.check_sanity(&next)?;
        Ok(next)
    }

    /// Position update from the already-updated velocities; the root
    /// quaternion advances by the exponential map and stays normalized.
    pub(crate) fn integrate_positions(&self, q: &mut DVector<f64>, v: &DVector<f64>, dt: f64) {
        for body in &self.bodies {
            match body.kind {
                JointKind::Floating => {
                    let qo = body.q_offset;
                    let vo = body.v_offset;
                    q[qo] += dt * v[vo];
                    q[qo + 1] += dt * v[vo + 1];
                    q[qo + 2] += dt * v[vo + 2];
                    let omega = Vector3::new(v[vo + 3], v[vo + 4], v[vo + 5]);
                    let quat = UnitQuaternion::from_quaternion(Quaternion::new(
                        q[qo + 3],
                        q[qo + 4],
                        q[qo + 5],
                        q[qo + 6],
                    ));
                    let next = UnitQuaternion::from_scaled_axis(omega * dt) * quat;
                    let nq = next.into_inner();
                    q[qo + 3] = nq.w;
                    q[qo + 4] = nq.i;
                    q[qo + 5] = nq.j;
                    q[qo + 6] = nq.k;
                }
                _ => q[body.q_offset] += dt * v[body.v_offset],
            }
        }
    }

    pub(crate) fn check_sanity(&self, state: &GeneralizedState) -> Result<(), DynamicsError> {
        for (i, x) in state.q.iter().enumerate() {
            if !x.is_finite() || x.abs() > self.position_bound {
                return Err(DynamicsError::NumericalDivergence(format!("q[{i}] = {x}")));
            }
        }
        for (i, x) in state.v.iter().enumerate() {
            if !x.is_finite() || x.abs() > self.velocity_bound {
                return Err(DynamicsError::NumericalDivergence(format!("v[{i}] = {x}")));
            }
        }
        Ok(())
    }
}

/// Pose of a body's parent; the world frame when the body is the root.
pub(crate) fn parent_pose(ws: &DynWorkspace, parent: Option<usize>) -> BodyPose {
    match parent {
        Some(p) => ws.poses[p],
        None => BodyPose { rot: Matrix3::identity(), pos: Vector3::zeros() },
    }
}

pub(crate) fn parent_vel(ws: &DynWorkspace, parent: Option<usize>) -> BodyVel {
    match parent {
        Some(p) => ws.vels[p],
        None => BodyVel::default(),
    }
}

pub(crate) fn axis_angle_matrix(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    // Rodrigues' formula on a unit axis.
    let (s, c) = angle.sin_cos();
    let k = skew(axis);
    Matrix3::identity() + k * s + k * k * (1.0 - c)
}

pub(crate) fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_exoskeleton;

    #[test]
    fn build_default_has_14_velocity_dof() {
        let model = ModelInstance::build(&default_exoskeleton()).unwrap();
        assert_eq!(model.nv(), 14);
        assert_eq!(model.nq(), 15);
        assert!((model.total_mass() - 20.4).abs() < 1e-12);
        assert_eq!(model.actuated().len(), 8);
        assert_eq!(model.feet().len(), 2);
    }

    #[test]
    fn build_scaled_masses() {
        let model = ModelInstance::build(&default_exoskeleton().with_mass_scaled(1.2)).unwrap();
        assert!((model.total_mass() - 24.48).abs() < 1e-9);
    }

    #[test]
    fn build_rejects_zero_mass() {
        let mut spec = default_exoskeleton();
        spec.links[1].mass = 0.0;
        spec.total_mass -= 2.7;
        assert!(matches!(ModelInstance::build(&spec), Err(DynamicsError::InvalidSpec(_))));
    }

    #[test]
    fn zero_config_sensor_layout() {
        let model = ModelInstance::build(&default_exoskeleton()).unwrap();
        let state = model.zero_state();
        let mut ws = model.workspace();
        model.forward_kinematics(&state.q, &mut ws);
        // Straight legs: sole sits at z = 0, sensors on the rectangle.
        for foot in model.feet() {
            for s in &foot.sensors {
                let p = model.point_world(&ws, foot.body, s);
                assert!(p.z.abs() < 1e-12, "sensor height {}", p.z);
            }
        }
        // Lateral symmetry of the two feet.
        let l = model.point_world(&ws, model.feet()[0].body, &Vector3::zeros());
        let r = model.point_world(&ws, model.feet()[1].body, &Vector3::zeros());
        assert!((l.x - r.x).abs() < 1e-12);
        assert!((l.y + r.y).abs() < 1e-12);
    }

    #[test]
    fn root_translation_shifts_world_points_only() {
        let model = ModelInstance::build(&default_exoskeleton()).unwrap();
        let mut state = model.zero_state();
        let mut ws = model.workspace();
        model.forward_kinematics(&state.q, &mut ws);
        let foot = model.feet()[0].body;
        let before_world = model.point_world(&ws, foot, &Vector3::zeros());
        let before_rel = model.root_relative(&ws, &before_world);

        state.q[0] += 0.1;
        model.forward_kinematics(&state.q, &mut ws);
        let after_world = model.point_world(&ws, foot, &Vector3::zeros());
        let after_rel = model.root_relative(&ws, &after_world);

        assert!((after_world.x - before_world.x - 0.1).abs() < 1e-12);
        assert!((after_rel - before_rel).norm() < 1e-12);
    }

    #[test]
    fn symmetric_pose_com_on_midline() {
        let model = ModelInstance::build(&default_exoskeleton()).unwrap();
        let mut state = model.zero_state();
        // Equal left/right joint angles.
        for joint in model.actuated() {
            let bend = match joint.name.as_str() {
                n if n.starts_with("hip") => -0.3,
                n if n.starts_with("knee") => 0.6,
                n if n.starts_with("ankle_dp") => -0.3,
                _ => 0.0,
            };
            state.q[joint.q_index] = bend;
        }
        let mut ws = model.workspace();
        model.forward_kinematics(&state.q, &mut ws);
        let com = model.com_world(&ws);
        assert!(com.y.abs() < 1e-9, "lateral CoM offset {}", com.y);
    }
}
