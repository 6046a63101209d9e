//! Inverse/forward dynamics: recursive Newton-Euler for bias forces and a
//! composite-rigid-body pass for the joint-space mass matrix, both in world
//! coordinates. The mass matrix route and the Newton-Euler route are kept
//! algebraically independent so tests can cross-check one against the other.

use nalgebra::{DVector, Matrix3, Vector3};

use super::{skew, DynWorkspace, DynamicsError, GeneralizedState, ExternalForceSet, ModelInstance};
use crate::model::JointKind;

/// 6x6 spatial inertia about the world origin, stored as its defining
/// blocks: `[[a, b], [bᵀ, m·1]]` with `a = I_com + m·cx·cxᵀ` and `b = m·cx`.
#[derive(Debug, Clone, Copy)]
pub struct SpatialInertia {
    a: Matrix3<f64>,
    b: Matrix3<f64>,
    m: f64,
}

impl SpatialInertia {
    pub fn zero() -> Self {
        Self { a: Matrix3::zeros(), b: Matrix3::zeros(), m: 0.0 }
    }

    /// Inertia of one rigid body about the world origin, given its world
    /// CoM position and world-frame rotational inertia about the CoM.
    pub fn about_origin(mass: f64, com_world: &Vector3<f64>, inertia_world: &Matrix3<f64>) -> Self {
        let cx = skew(com_world);
        Self { a: inertia_world + cx * cx.transpose() * mass, b: cx * mass, m: mass }
    }

    pub fn add(&mut self, other: &Self) {
        self.a += other.a;
        self.b += other.b;
        self.m += other.m;
    }

    /// Apply to a spatial motion vector `(ang, lin-at-origin)`, producing a
    /// spatial momentum/force vector `(moment-about-origin, linear)`.
    pub fn mul(&self, ang: &Vector3<f64>, lin: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
        (self.a * ang + self.b * lin, self.b.transpose() * ang + lin * self.m)
    }
}

/// Parent origin acceleration; zero for a root joint attached to the world.
#[inline]
fn parent_acc(ws: &DynWorkspace, parent: Option<usize>) -> (Vector3<f64>, Vector3<f64>) {
    match parent {
        Some(p) => (ws.ang_acc[p], ws.lin_acc[p]),
        None => (Vector3::zeros(), Vector3::zeros()),
    }
}

/// Motion subspace column of a 1-DoF joint, in origin coordinates.
#[inline]
fn joint_subspace(kind: JointKind, axis_w: &Vector3<f64>, joint_pos: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    match kind {
        // Rotation about an axis through the joint: v(origin) = p × a.
        JointKind::Revolute => (*axis_w, joint_pos.cross(axis_w)),
        JointKind::Prismatic => (Vector3::zeros(), *axis_w),
        JointKind::Floating => unreachable!("floating handled inline"),
    }
}

impl ModelInstance {
    /// Inverse dynamics: generalized forces that produce `accel` at the
    /// given state under gravity and the external point forces.
    ///
    /// Requires a filled workspace? No: this runs its own kinematics.
    pub fn inverse_dynamics(
        &self,
        state: &GeneralizedState,
        accel: &DVector<f64>,
        external: &ExternalForceSet,
        ws: &mut DynWorkspace,
        out: &mut DVector<f64>,
    ) {
        self.forward_kinematics(&state.q, ws);
        self.velocity_kinematics(&state.v, ws);
        self.rnea_from_kinematics(state, accel, external, ws, out);
    }

    /// Newton-Euler with poses and velocities already in the workspace.
    pub(crate) fn rnea_from_kinematics(
        &self,
        state: &GeneralizedState,
        accel: &DVector<f64>,
        external: &ExternalForceSet,
        ws: &mut DynWorkspace,
        out: &mut DVector<f64>,
    ) {
        let n = self.bodies().len();
        debug_assert_eq!(accel.len(), self.nv());

        // Outward pass: world angular/linear acceleration of each body origin.
        for i in 0..n {
            let body = &self.bodies()[i];
            match body.kind {
                JointKind::Floating => {
                    let vo = body.v_offset;
                    ws.lin_acc[i] = Vector3::new(accel[vo], accel[vo + 1], accel[vo + 2]);
                    ws.ang_acc[i] = Vector3::new(accel[vo + 3], accel[vo + 4], accel[vo + 5]);
                }
                JointKind::Revolute => {
                    let pp = super::parent_pose(ws, body.parent);
                    let (p_ang_acc, p_lin_acc) = parent_acc(ws, body.parent);
                    let axis_w = pp.rot * body.axis;
                    let r = ws.poses[i].pos - pp.pos;
                    let qd = state.v[body.v_offset];
                    let qdd = accel[body.v_offset];
                    let wp = super::parent_vel(ws, body.parent).ang;
                    ws.ang_acc[i] = p_ang_acc + axis_w * qdd + wp.cross(&(axis_w * qd));
                    ws.lin_acc[i] = p_lin_acc + p_ang_acc.cross(&r) + wp.cross(&wp.cross(&r));
                }
                JointKind::Prismatic => {
                    let pp = super::parent_pose(ws, body.parent);
                    let (p_ang_acc, p_lin_acc) = parent_acc(ws, body.parent);
                    let axis_w = pp.rot * body.axis;
                    let r = ws.poses[i].pos - pp.pos;
                    let qd = state.v[body.v_offset];
                    let qdd = accel[body.v_offset];
                    let wp = super::parent_vel(ws, body.parent).ang;
                    ws.ang_acc[i] = p_ang_acc;
                    ws.lin_acc[i] = p_lin_acc
                        + p_ang_acc.cross(&r)
                        + wp.cross(&wp.cross(&r))
                        + wp.cross(&(axis_w * qd)) * 2.0
                        + axis_w * qdd;
                }
            }
        }

        // Gather external point forces per body: net force plus moment
        // about the body origin.
        for i in 0..n {
            ws.ext_force[i] = Vector3::zeros();
            ws.ext_torque[i] = Vector3::zeros();
        }
        for e in &external.entries {
            let arm = ws.poses[e.body].rot * e.point;
            ws.ext_force[e.body] += e.force;
            ws.ext_torque[e.body] += arm.cross(&e.force);
        }

        // Inward pass: joint wrenches. `force[i]`/`torque[i]` is the wrench
        // the parent applies on body i, the torque taken about the body
        // origin.
        let gravity = self.gravity();
        for i in (0..n).rev() {
            let body = &self.bodies()[i];
            let rot = ws.poses[i].rot;
            let com_w = rot * body.com;
            let omega = ws.vels[i].ang;
            let a_com = ws.lin_acc[i] + ws.ang_acc[i].cross(&com_w) + omega.cross(&omega.cross(&com_w));
            let inertia_w = rot * body.inertia * rot.transpose();

            let mut f = body.mass * (a_com - gravity) - ws.ext_force[i];
            let mut t = inertia_w * ws.ang_acc[i] + omega.cross(&(inertia_w * omega))
                + com_w.cross(&(body.mass * (a_com - gravity)))
                - ws.ext_torque[i];
            // Children have already accumulated their wrenches here.
            f += ws.force[i];
            t += ws.torque[i];
            ws.force[i] = f;
            ws.torque[i] = t;

            if let Some(p) = body.parent {
                let r = ws.poses[i].pos - ws.poses[p].pos;
                ws.force[p] += f;
                ws.torque[p] += r.cross(&f) + t;
            }
        }

        // Project onto joint subspaces.
        for i in 0..n {
            let body = &self.bodies()[i];
            match body.kind {
                JointKind::Floating => {
                    let vo = body.v_offset;
                    for k in 0..3 {
                        out[vo + k] = ws.force[i][k];
                        out[vo + 3 + k] = ws.torque[i][k];
                    }
                }
                JointKind::Revolute => {
                    let axis_w = super::parent_pose(ws, body.parent).rot * body.axis;
                    out[body.v_offset] = axis_w.dot(&ws.torque[i]);
                }
                JointKind::Prismatic => {
                    let axis_w = super::parent_pose(ws, body.parent).rot * body.axis;
                    out[body.v_offset] = axis_w.dot(&ws.force[i]);
                }
            }
            // Buffers double as accumulation space; reset for the next call.
            ws.force[i] = Vector3::zeros();
            ws.torque[i] = Vector3::zeros();
        }
    }

    /// Joint-space mass matrix via the composite-rigid-body pass, written
    /// into the workspace.
    pub fn mass_matrix<'a>(&self, q: &DVector<f64>, ws: &'a mut DynWorkspace) -> &'a nalgebra::DMatrix<f64> {
        self.forward_kinematics(q, ws);
        self.mass_matrix_from_kinematics(ws);
        &ws.mass_matrix
    }

    pub(crate) fn mass_matrix_from_kinematics(&self, ws: &mut DynWorkspace) {
        let n = self.bodies().len();
        for i in 0..n {
            let body = &self.bodies()[i];
            let rot = ws.poses[i].rot;
            let com_w = ws.poses[i].pos + rot * body.com;
            let inertia_w = rot * body.inertia * rot.transpose();
            ws.composite[i] = SpatialInertia::about_origin(body.mass, &com_w, &inertia_w);
        }
        // Accumulate subtree inertias toward the root.
        for i in (0..n).rev() {
            if let Some(p) = self.bodies()[i].parent {
                let child = ws.composite[i];
                ws.composite[p].add(&child);
            }
        }

        ws.mass_matrix.fill(0.0);
        for i in 0..n {
            let body = &self.bodies()[i];
            let joint_pos = ws.poses[i].pos;
            // Subspace columns of this joint in origin coordinates.
            let mut cols: [(Vector3<f64>, Vector3<f64>); 6] =
                [(Vector3::zeros(), Vector3::zeros()); 6];
            let ndof = body.v_dim();
            match body.kind {
                JointKind::Floating => {
                    for k in 0..3 {
                        let mut e = Vector3::zeros();
                        e[k] = 1.0;
                        cols[k] = (Vector3::zeros(), e);
                        cols[3 + k] = (e, joint_pos.cross(&e));
                    }
                }
                _ => {
                    let axis_w = super::parent_pose(ws, body.parent).rot * body.axis;
                    cols[0] = joint_subspace(body.kind, &axis_w, &joint_pos);
                }
            }

            for a in 0..ndof {
                let (s_ang, s_lin) = cols[a];
                let (f_ang, f_lin) = ws.composite[i].mul(&s_ang, &s_lin);
                let row = body.v_offset + a;
                // Walk this joint and every ancestor joint.
                let mut j = Some(i);
                while let Some(jj) = j {
                    let other = &self.bodies()[jj];
                    let ocols_pos = ws.poses[jj].pos;
                    match other.kind {
                        JointKind::Floating => {
                            for k in 0..3 {
                                let mut e = Vector3::zeros();
                                e[k] = 1.0;
                                let col = other.v_offset + k;
                                let val = f_lin.dot(&e);
                                ws.mass_matrix[(row, col)] = val;
                                ws.mass_matrix[(col, row)] = val;
                                let col = other.v_offset + 3 + k;
                                let val = f_ang.dot(&e) + f_lin.dot(&ocols_pos.cross(&e));
                                ws.mass_matrix[(row, col)] = val;
                                ws.mass_matrix[(col, row)] = val;
                            }
                        }
                        _ => {
                            let axis_w = super::parent_pose(ws, other.parent).rot * other.axis;
                            let (o_ang, o_lin) = joint_subspace(other.kind, &axis_w, &ocols_pos);
                            let col = other.v_offset;
                            let val = f_ang.dot(&o_ang) + f_lin.dot(&o_lin);
                            ws.mass_matrix[(row, col)] = val;
                            ws.mass_matrix[(col, row)] = val;
                        }
                    }
                    j = other.parent;
                }
            }
        }
    }

    /// Generalized accelerations satisfying
    /// `M(q)·a = τ + Jᵀ·F − c(q, v) − g(q)`.
    ///
    /// Torques at unactuated root DoFs must be zero; forces must be finite.
    pub fn forward_dynamics(
        &self,
        state: &GeneralizedState,
        torques: &DVector<f64>,
        external: &ExternalForceSet,
        ws: &mut DynWorkspace,
    ) -> Result<DVector<f64>, DynamicsError> {
        self.forward_dynamics_in_place(state, torques, external, ws)?;
        Ok(ws.rhs.clone())
    }

    /// Same as [`forward_dynamics`](Self::forward_dynamics) but leaves the
    /// result in `ws.rhs`, avoiding the output allocation in hot loops.
    pub(crate) fn forward_dynamics_in_place(
        &self,
        state: &GeneralizedState,
        torques: &DVector<f64>,
        external: &ExternalForceSet,
        ws: &mut DynWorkspace,
    ) -> Result<(), DynamicsError> {
        debug_assert!(external.is_finite(), "external forces must be finite");
        self.forward_kinematics(&state.q, ws);
        self.velocity_kinematics(&state.v, ws);

        // Bias: generalized force required for zero acceleration. The zero
        // and bias buffers are taken out of the workspace while Newton-Euler
        // holds the mutable borrow.
        let mut zero = std::mem::take(&mut ws.accel);
        let mut bias = std::mem::take(&mut ws.bias);
        zero.resize_vertically_mut(self.nv(), 0.0);
        zero.fill(0.0);
        bias.resize_vertically_mut(self.nv(), 0.0);
        self.rnea_from_kinematics(state, &zero, external, ws, &mut bias);

        self.mass_matrix_from_kinematics(ws);
        ws.rhs.copy_from(torques);
        ws.rhs -= &bias;
        ws.accel = zero;
        ws.bias = bias;

        ws.chol.copy_from(&ws.mass_matrix);
        cholesky_solve_in_place(&mut ws.chol, &mut ws.rhs).ok_or(DynamicsError::SingularMass)
    }

    /// Kinetic plus gravitational potential energy, evaluated from per-body
    /// velocities so it is independent of the mass-matrix code path.
    pub fn mechanical_energy(&self, state: &GeneralizedState, ws: &mut DynWorkspace) -> f64 {
        self.forward_kinematics(&state.q, ws);
        self.velocity_kinematics(&state.v, ws);
        let gravity = self.gravity();
        let mut e = 0.0;
        for (i, body) in self.bodies().iter().enumerate() {
            let rot = ws.poses[i].rot;
            let com_r = rot * body.com;
            let com_w = ws.poses[i].pos + com_r;
            let v_com = ws.vels[i].lin + ws.vels[i].ang.cross(&com_r);
            let inertia_w = rot * body.inertia * rot.transpose();
            let omega = ws.vels[i].ang;
            e += 0.5 * body.mass * v_com.norm_squared();
            e += 0.5 * omega.dot(&(inertia_w * omega));
            e -= body.mass * gravity.dot(&com_w);
        }
        e
    }

    /// Total linear momentum of the chain in world frame.
    pub fn linear_momentum(&self, state: &GeneralizedState, ws: &mut DynWorkspace) -> Vector3<f64> {
        self.forward_kinematics(&state.q, ws);
        self.velocity_kinematics(&state.v, ws);
        let mut p = Vector3::zeros();
        for (i, body) in self.bodies().iter().enumerate() {
            let com_r = ws.poses[i].rot * body.com;
            p += body.mass * (ws.vels[i].lin + ws.vels[i].ang.cross(&com_r));
        }
        p
    }
}

/// PD command for one actuated joint, with the damping term integrated
/// implicitly for stability at high gain.
#[derive(Debug, Clone, Copy)]
pub struct PdCommand {
    pub v_index: usize,
    /// Proportional part `k_p·(target − q)`, evaluated explicitly.
    pub p_term: f64,
    /// Velocity gain `k_v`; the damping torque uses the post-step velocity.
    pub kv: f64,
    /// Actuator torque bound.
    pub tau_max: f64,
}

impl ModelInstance {
    /// Semi-implicit Euler step with PD actuation whose damping term is
    /// evaluated at the post-step velocity, the standard stable-PD
    /// treatment for high-gain position control at stiff time steps.
    ///
    /// Every applied torque satisfies
    /// `τ = clip(p_term − k_v·q̇⁺, −τ_max, τ_max)` where `q̇⁺` is the updated
    /// velocity; saturated joints are handled with an active-set loop.
    /// `implicit_damping` adds per-DoF viscous damping (joint stops,
    /// passive joints) integrated the same way. Returns the next state and
    /// the torques actually applied, in `pd` order.
    pub fn step_controlled(
        &self,
        state: &GeneralizedState,
        explicit_torques: &DVector<f64>,
        pd: &[PdCommand],
        implicit_damping: &DVector<f64>,
        external: &ExternalForceSet,
        dt: f64,
        ws: &mut DynWorkspace,
        applied: &mut Vec<f64>,
    ) -> Result<GeneralizedState, DynamicsError> {
        assert!(dt > 0.0, "dt must be positive");
        debug_assert!(external.is_finite(), "external forces must be finite");
        self.forward_kinematics(&state.q, ws);
        self.velocity_kinematics(&state.v, ws);

        let mut zero = std::mem::take(&mut ws.accel);
        let mut bias = std::mem::take(&mut ws.bias);
        zero.resize_vertically_mut(self.nv(), 0.0);
        zero.fill(0.0);
        bias.resize_vertically_mut(self.nv(), 0.0);
        self.rnea_from_kinematics(state, &zero, external, ws, &mut bias);
        self.mass_matrix_from_kinematics(ws);

        // 0 = free, +1/-1 = clamped at ±tau_max.
        let mut saturation = vec![0i8; pd.len()];
        applied.clear();
        applied.resize(pd.len(), 0.0);
        let mut v_next = state.v.clone();
        for _pass in 0..5 {
            ws.chol.copy_from(&ws.mass_matrix);
            ws.rhs.copy_from(explicit_torques);
            ws.rhs -= &bias;
            for d in 0..self.nv() {
                let c = implicit_damping[d];
                if c > 0.0 {
                    ws.chol[(d, d)] += dt * c;
                    ws.rhs[d] -= c * state.v[d];
                }
            }
            for (k, cmd) in pd.iter().enumerate() {
                match saturation[k] {
                    0 => {
                        ws.chol[(cmd.v_index, cmd.v_index)] += dt * cmd.kv;
                        ws.rhs[cmd.v_index] += cmd.p_term - cmd.kv * state.v[cmd.v_index];
                    }
                    s => ws.rhs[cmd.v_index] += s as f64 * cmd.tau_max,
                }
            }
            cholesky_solve_in_place(&mut ws.chol, &mut ws.rhs).ok_or(DynamicsError::SingularMass)?;
            v_next.copy_from(&state.v);
            v_next.axpy(dt, &ws.rhs, 1.0);

            let mut stable = true;
            for (k, cmd) in pd.iter().enumerate() {
                let tau = cmd.p_term - cmd.kv * v_next[cmd.v_index];
                let want = if tau > cmd.tau_max {
                    1
                } else if tau < -cmd.tau_max {
                    -1
                } else {
                    0
                };
                applied[k] = tau.clamp(-cmd.tau_max, cmd.tau_max);
                if want != saturation[k] {
                    saturation[k] = want;
                    stable = false;
                }
            }
            if stable {
                break;
            }
        }
        ws.accel = zero;
        ws.bias = bias;

        let mut q = state.q.clone();
        self.integrate_positions(&mut q, &v_next, dt);
        let next = GeneralizedState { q, v: v_next, t: state.t + dt };
        self.check_sanity(&next)?;
        Ok(next)
    }
}

/// In-place Cholesky factorization and solve; returns `None` when the
/// matrix is not positive definite to working precision.
fn cholesky_solve_in_place(m: &mut nalgebra::DMatrix<f64>, rhs: &mut DVector<f64>) -> Option<()> {
    let n = m.nrows();
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= m[(j, k)] * m[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        m[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= m[(i, k)] * m[(j, k)];
            }
            m[(i, j)] = s / d;
        }
    }
    // Forward substitution L y = rhs.
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= m[(i, k)] * rhs[k];
        }
        rhs[i] = s / m[(i, i)];
    }
    // Back substitution Lᵀ x = y.
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for k in (i + 1)..n {
            s -= m[(k, i)] * rhs[k];
        }
        rhs[i] = s / m[(i, i)];
    }
    Some(())
}
