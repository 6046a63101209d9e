//! Passive human load strapped into the exoskeleton.
//!
//! The human is a rigid chain (pelvis-plus-torso lump, thighs, shanks,
//! feet) attached to the exoskeleton pelvis through a vertical prismatic
//! joint. Coupling forces come from a vertical pelvis spring, four strap
//! springs per femur and per tibia arranged 90 degrees apart on a ring,
//! and stiff heel/toe springs that realize the foot-to-foot weld. Spring
//! rest lengths are captured at the reset pose so the coupling starts
//! force-free. The human joints are unactuated; a small passive stiffness
//! and damping stands in for passive muscle forces.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::model::{InertiaSpec, JointKind, JointSpec, LinkSpec, ModelSpec};
use crate::multibody::{DynWorkspace, ExternalForceSet, GeneralizedState, ModelInstance};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HumanLoadParams {
    /// Total mass of the passive human chain, kg.
    pub total_mass: f64,
    /// Vertical pelvis spring stiffness, N/m.
    pub pelvis_stiffness: f64,
    /// Damping on the pelvis spring, N·s/m. Stands in for tissue
    /// dissipation; zero restores the pure spring.
    pub pelvis_damping: f64,
    /// Stiffness of each femur strap spring, N/m (four per femur).
    pub femur_stiffness: f64,
    /// Stiffness of each tibia strap spring, N/m (four per tibia).
    pub tibia_stiffness: f64,
    /// Radial damping of each strap, N·s/m. Stands in for strap friction
    /// and tissue dissipation; zero restores pure springs.
    pub strap_damping: f64,
    /// Strap ring radius around the thigh/shank axis, m.
    pub ring_radius: f64,
    /// Heel/toe weld spring stiffness and damping.
    pub weld_stiffness: f64,
    pub weld_damping: f64,
    /// Passive stiffness/damping on the human joints.
    pub joint_stiffness: f64,
    pub joint_damping: f64,
}

impl HumanLoadParams {
    /// Mass of the pelvis-plus-torso lump, the part carried by the
    /// vertical pelvis spring.
    pub fn trunk_mass(&self) -> f64 {
        self.total_mass - 2.0 * (7.0 + 3.5 + 1.0)
    }

    /// Static extension of the pelvis spring once it carries the trunk.
    pub fn static_sag(&self) -> f64 {
        self.trunk_mass() * crate::multibody::GRAVITY / self.pelvis_stiffness
    }
}

impl Default for HumanLoadParams {
    fn default() -> Self {
        Self {
            total_mass: 61.0,
            pelvis_stiffness: 10_000.0,
            pelvis_damping: 200.0,
            femur_stiffness: 2_000.0,
            tibia_stiffness: 2_000.0,
            strap_damping: 60.0,
            ring_radius: 0.05,
            weld_stiffness: 3e4,
            weld_damping: 100.0,
            joint_stiffness: 3.0,
            joint_damping: 3.0,
        }
    }
}

/// Indices of the human bodies in the combined model.
#[derive(Debug, Clone)]
pub struct HumanLayout {
    pub pelvis: usize,
    pub thigh: [usize; 2],
    pub shank: [usize; 2],
    pub foot: [usize; 2],
    /// v-indices of the passive human joints (including the prismatic).
    pub passive_v: Vec<usize>,
    /// q-indices matching `passive_v`.
    pub passive_q: Vec<usize>,
}

/// Extend the exoskeleton spec with the human chain. Human segment lengths
/// mirror the exoskeleton legs so the strapped pose is consistent through
/// the whole squat. The exoskeleton link masses must sum to `exo.total_mass`.
pub fn attach_human(exo: &ModelSpec, params: &HumanLoadParams) -> ModelSpec {
    let mut spec = exo.clone();
    // 38 kg trunk lump leaves 7.0 + 3.5 + 1.0 kg per leg segment pair.
    let trunk = params.total_mass - 2.0 * (7.0 + 3.5 + 1.0);
    spec.links.push(LinkSpec {
        name: "h_pelvis".into(),
        mass: trunk,
        inertia: InertiaSpec::diagonal(2.3, 2.0, 0.5),
        com: [0.0, 0.0, 0.25],
        anchors: BTreeMap::from([("mount".into(), [0.0, 0.0, 0.0])]),
    });
    spec.joints.push(JointSpec {
        name: "h_mount".into(),
        kind: JointKind::Prismatic,
        parent: Some("pelvis".into()),
        child: "h_pelvis".into(),
        origin: [0.0, 0.0, 0.02],
        axis: [0.0, 0.0, 1.0],
        limits: Some([-0.15, 0.15]),
        torque_limit: None,
    });

    for (suffix, side) in [("l", 1.0), ("r", -1.0)] {
        let thigh = format!("h_thigh_{suffix}");
        let shank = format!("h_shank_{suffix}");
        let foot = format!("h_foot_{suffix}");
        let ring = |z: f64, r: f64| {
            BTreeMap::from([
                ("ring_px".into(), [r, 0.0, z]),
                ("ring_nx".into(), [-r, 0.0, z]),
                ("ring_py".into(), [0.0, r, z]),
                ("ring_ny".into(), [0.0, -r, z]),
            ])
        };
        spec.links.push(LinkSpec {
            name: thigh.clone(),
            mass: 7.0,
            inertia: InertiaSpec::diagonal(0.11, 0.11, 0.02),
            com: [0.0, 0.0, -0.17],
            anchors: ring(-0.20, params.ring_radius),
        });
        spec.links.push(LinkSpec {
            name: shank.clone(),
            mass: 3.5,
            inertia: InertiaSpec::diagonal(0.05, 0.05, 0.005),
            com: [0.0, 0.0, -0.16],
            anchors: ring(-0.20, params.ring_radius),
        });
        spec.links.push(LinkSpec {
            name: foot.clone(),
            mass: 1.0,
            inertia: InertiaSpec::diagonal(0.003, 0.004, 0.005),
            com: [0.02, 0.0, -0.03],
            anchors: BTreeMap::from([
                ("heel".into(), [-0.04, 0.0, -0.06]),
                ("toe".into(), [0.08, 0.0, -0.06]),
            ]),
        });

        spec.joints.push(JointSpec {
            name: format!("h_hip_{suffix}"),
            kind: JointKind::Revolute,
            parent: Some("h_pelvis".into()),
            child: thigh.clone(),
            origin: [0.0, side * 0.09, -0.02],
            axis: [0.0, 1.0, 0.0],
            limits: Some([-2.2, 0.5]),
            torque_limit: None,
        });
        spec.joints.push(JointSpec {
            name: format!("h_knee_{suffix}"),
            kind: JointKind::Revolute,
            parent: Some(thigh),
            child: shank.clone(),
            origin: [0.0, 0.0, -0.40],
            axis: [0.0, 1.0, 0.0],
            limits: Some([-0.05, 2.5]),
            torque_limit: None,
        });
        spec.joints.push(JointSpec {
            name: format!("h_ankle_{suffix}"),
            kind: JointKind::Revolute,
            parent: Some(shank),
            child: foot.clone(),
            origin: [0.0, 0.0, -0.40],
            axis: [0.0, 1.0, 0.0],
            limits: Some([-1.0, 1.0]),
            torque_limit: None,
        });
    }
    spec.total_mass = exo.total_mass + params.total_mass;
    spec
}

pub fn human_layout(model: &ModelInstance) -> Option<HumanLayout> {
    let pelvis = model.body_index("h_pelvis")?;
    let layout = HumanLayout {
        pelvis,
        thigh: [model.body_index("h_thigh_l")?, model.body_index("h_thigh_r")?],
        shank: [model.body_index("h_shank_l")?, model.body_index("h_shank_r")?],
        foot: [model.body_index("h_foot_l")?, model.body_index("h_foot_r")?],
        passive_v: model
            .bodies()
            .iter()
            .filter(|b| b.joint_name.starts_with("h_"))
            .map(|b| b.v_offset)
            .collect(),
        passive_q: model
            .bodies()
            .iter()
            .filter(|b| b.joint_name.starts_with("h_"))
            .map(|b| b.q_offset)
            .collect(),
    };
    Some(layout)
}

/// Which structure a spring belongs to, for telemetry grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpringGroup {
    Pelvis,
    Femur,
    Tibia,
    FootWeld,
}

#[derive(Debug, Clone)]
enum SpringKind {
    /// Strap band around a limb: resists the anchor offset perpendicular
    /// to the limb axis and slides freely along it. `rest_in_b` is the
    /// radial rest offset in the limb (body b) frame.
    Radial { rest_in_b: Vector3<f64>, damping: f64 },
    /// Force proportional to the offset vector minus its rest value
    /// (rotated with body b), plus relative-velocity damping. Used where
    /// the anchors coincide at reset and for the weld.
    Offset { rest_in_b: Vector3<f64>, damping: f64 },
}

#[derive(Debug, Clone)]
struct Spring {
    body_a: usize,
    point_a: Vector3<f64>,
    body_b: usize,
    point_b: Vector3<f64>,
    stiffness: f64,
    kind: SpringKind,
    group: SpringGroup,
}

/// The full human-exoskeleton spring set with rest state captured at reset.
#[derive(Debug, Clone)]
pub struct HumanCoupling {
    springs: Vec<Spring>,
    pub layout: HumanLayout,
    params: HumanLoadParams,
    /// Human joint positions at reset, the passive stiffness setpoint.
    rest_q: Vec<f64>,
}

/// Net spring force magnitudes per structure: pelvis, femur, tibia, weld.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct SpringTelemetry {
    pub pelvis: f64,
    pub femur: f64,
    pub tibia: f64,
    pub weld: f64,
}

impl HumanCoupling {
    /// Build the spring set at the reset pose. `ws` must hold kinematics
    /// for `state`.
    pub fn new(
        model: &ModelInstance,
        params: HumanLoadParams,
        state: &GeneralizedState,
        ws: &DynWorkspace,
    ) -> Self {
        let layout = human_layout(model).expect("combined model carries the human chain");
        let mut springs = Vec::new();

        let exo_pelvis = model.body_index("pelvis").unwrap();
        let mount_point = model.anchor(exo_pelvis, "human_mount").unwrap();
        springs.push(Spring {
            body_a: layout.pelvis,
            point_a: Vector3::zeros(),
            body_b: exo_pelvis,
            point_b: mount_point,
            stiffness: params.pelvis_stiffness,
            kind: SpringKind::Offset { rest_in_b: Vector3::zeros(), damping: params.pelvis_damping },
            group: SpringGroup::Pelvis,
        });

        let ring_anchors = ["ring_px", "ring_nx", "ring_py", "ring_ny"];
        let strap_anchors = ["strap_px", "strap_nx", "strap_py", "strap_ny"];
        for (leg, suffix) in ["l", "r"].iter().enumerate() {
            let exo_thigh = model.body_index(&format!("thigh_{suffix}")).unwrap();
            let exo_shank = model.body_index(&format!("shank_{suffix}")).unwrap();
            for (ra, sa) in ring_anchors.iter().zip(&strap_anchors) {
                for (h_body, e_body, k, group) in [
                    (layout.thigh[leg], exo_thigh, params.femur_stiffness, SpringGroup::Femur),
                    (layout.shank[leg], exo_shank, params.tibia_stiffness, SpringGroup::Tibia),
                ] {
                    let pa = model.anchor(h_body, ra).unwrap();
                    let pb = model.anchor(e_body, sa).unwrap();
                    let wa = model.point_world(ws, h_body, &pa);
                    let wb = model.point_world(ws, e_body, &pb);
                    let rot_b = ws.poses[e_body].rot;
                    let axis_w = rot_b * Vector3::z();
                    let d = wa - wb;
                    let d_perp = d - axis_w * axis_w.dot(&d);
                    springs.push(Spring {
                        body_a: h_body,
                        point_a: pa,
                        body_b: e_body,
                        point_b: pb,
                        stiffness: k,
                        kind: SpringKind::Radial {
                            rest_in_b: rot_b.transpose() * d_perp,
                            damping: params.strap_damping,
                        },
                        group,
                    });
                }
            }

            let exo_foot = model.body_index(&format!("foot_{suffix}")).unwrap();
            let weld_point = model.anchor(exo_foot, "weld").unwrap();
            for anchor in ["heel", "toe"] {
                let pa = model.anchor(layout.foot[leg], anchor).unwrap();
                let wa = model.point_world(ws, layout.foot[leg], &pa);
                let wb = model.point_world(ws, exo_foot, &weld_point);
                let rest_world = wa - wb;
                let rest_in_b = ws.poses[exo_foot].rot.transpose() * rest_world;
                springs.push(Spring {
                    body_a: layout.foot[leg],
                    point_a: pa,
                    body_b: exo_foot,
                    point_b: weld_point,
                    stiffness: params.weld_stiffness,
                    kind: SpringKind::Offset { rest_in_b, damping: params.weld_damping },
                    group: SpringGroup::FootWeld,
                });
            }
        }

        let rest_q = layout.passive_q.iter().map(|&qi| state.q[qi]).collect();
        Self { springs, layout, params, rest_q }
    }

    /// Spring forces at the current kinematics, applied equal and opposite
    /// on both bodies.
    pub fn apply(
        &self,
        model: &ModelInstance,
        ws: &DynWorkspace,
        out: &mut ExternalForceSet,
    ) -> SpringTelemetry {
        let mut telemetry = SpringTelemetry::default();
        for spring in &self.springs {
            let wa = model.point_world(ws, spring.body_a, &spring.point_a);
            let wb = model.point_world(ws, spring.body_b, &spring.point_b);
            let force_on_a = match &spring.kind {
                SpringKind::Radial { rest_in_b, damping } => {
                    let rot_b = ws.poses[spring.body_b].rot;
                    let axis_w = rot_b * Vector3::z();
                    let d = wa - wb;
                    let d_perp = d - axis_w * axis_w.dot(&d);
                    let va = model.point_velocity(ws, spring.body_a, &spring.point_a);
                    let vb = model.point_velocity(ws, spring.body_b, &spring.point_b);
                    let v_rel = va - vb;
                    let v_perp = v_rel - axis_w * axis_w.dot(&v_rel);
                    -spring.stiffness * (d_perp - rot_b * rest_in_b) - v_perp * *damping
                }
                SpringKind::Offset { rest_in_b, damping } => {
                    let rest_world = ws.poses[spring.body_b].rot * rest_in_b;
                    let va = model.point_velocity(ws, spring.body_a, &spring.point_a);
                    let vb = model.point_velocity(ws, spring.body_b, &spring.point_b);
                    -spring.stiffness * ((wa - wb) - rest_world) - (va - vb) * *damping
                }
            };
            out.push(spring.body_a, spring.point_a, force_on_a);
            out.push(spring.body_b, spring.point_b, -force_on_a);
            let mag = force_on_a.norm();
            match spring.group {
                SpringGroup::Pelvis => telemetry.pelvis += mag,
                SpringGroup::Femur => telemetry.femur += mag,
                SpringGroup::Tibia => telemetry.tibia += mag,
                SpringGroup::FootWeld => telemetry.weld += mag,
            }
        }
        telemetry
    }

    /// Passive joint torques toward the reset pose (explicit part) and the
    /// damping coefficients (integrated implicitly).
    pub fn passive_joint_terms(
        &self,
        state: &GeneralizedState,
        torques: &mut nalgebra::DVector<f64>,
        implicit_damping: &mut nalgebra::DVector<f64>,
    ) {
        for (k, (&vi, &qi)) in self.layout.passive_v.iter().zip(&self.layout.passive_q).enumerate() {
            torques[vi] += -self.params.joint_stiffness * (state.q[qi] - self.rest_q[k]);
            implicit_damping[vi] += self.params.joint_damping;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_exoskeleton;

    #[test]
    fn combined_model_dimensions() {
        let spec = attach_human(&default_exoskeleton(), &HumanLoadParams::default());
        spec.validate().unwrap();
        let model = ModelInstance::build(&spec).unwrap();
        // 14 exoskeleton DoF plus prismatic mount and six human leg joints.
        assert_eq!(model.nv(), 21);
        assert!((model.total_mass() - 81.4).abs() < 1e-9);
        assert!(human_layout(&model).is_some());
    }

    #[test]
    fn springs_are_force_free_at_reset() {
        let spec = attach_human(&default_exoskeleton(), &HumanLoadParams::default());
        let model = ModelInstance::build(&spec).unwrap();
        let state = model.zero_state();
        let mut ws = model.workspace();
        model.forward_kinematics(&state.q, &mut ws);
        model.velocity_kinematics(&state.v, &mut ws);
        let coupling = HumanCoupling::new(&model, HumanLoadParams::default(), &state, &ws);
        let mut ext = ExternalForceSet::default();
        let telemetry = coupling.apply(&model, &ws, &mut ext);
        assert!(telemetry.pelvis < 1e-9);
        assert!(telemetry.femur < 1e-9);
        assert!(telemetry.tibia < 1e-9);
        assert!(telemetry.weld < 1e-9);
    }

    #[test]
    fn pelvis_spring_restores_100n_per_cm() {
        let spec = attach_human(&default_exoskeleton(), &HumanLoadParams::default());
        let model = ModelInstance::build(&spec).unwrap();
        let state = model.zero_state();
        let mut ws = model.workspace();
        model.forward_kinematics(&state.q, &mut ws);
        model.velocity_kinematics(&state.v, &mut ws);
        let coupling = HumanCoupling::new(&model, HumanLoadParams::default(), &state, &ws);

        // Raise the human pelvis 1 cm along the prismatic joint.
        let mount = model.joint("h_mount").unwrap();
        let mut displaced = state.clone();
        displaced.q[mount.q_offset] += 0.01;
        model.forward_kinematics(&displaced.q, &mut ws);
        model.velocity_kinematics(&displaced.v, &mut ws);
        let mut ext = ExternalForceSet::default();
        coupling.apply(&model, &ws, &mut ext);
        let pelvis = coupling.layout.pelvis;
        let on_human: Vector3<f64> = ext
            .entries
            .iter()
            .filter(|e| e.body == pelvis)
            .map(|e| e.force)
            .sum();
        assert!((on_human.z + 100.0).abs() < 1e-9, "restoring force {on_human:?}");
    }

    #[test]
    fn spring_forces_obey_newtons_third_law() {
        let spec = attach_human(&default_exoskeleton(), &HumanLoadParams::default());
        let model = ModelInstance::build(&spec).unwrap();
        let mut state = model.zero_state();
        // Disturb several joints so every spring is loaded.
        let mount = model.joint("h_mount").unwrap();
        state.q[mount.q_offset] = 0.03;
        for joint in model.actuated() {
            state.q[joint.q_index] += 0.1;
        }
        let mut ws = model.workspace();
        model.forward_kinematics(&state.q, &mut ws);
        model.velocity_kinematics(&state.v, &mut ws);
        let rest = model.zero_state();
        let mut ws_rest = model.workspace();
        model.forward_kinematics(&rest.q, &mut ws_rest);
        model.velocity_kinematics(&rest.v, &mut ws_rest);
        let coupling = HumanCoupling::new(&model, HumanLoadParams::default(), &rest, &ws_rest);

        let mut ext = ExternalForceSet::default();
        let telemetry = coupling.apply(&model, &ws, &mut ext);
        assert!(telemetry.femur > 1.0, "straps should be loaded");
        let net: Vector3<f64> = ext.entries.iter().map(|e| e.force).sum();
        assert!(net.norm() < 1e-9, "net spring force {net:?}");
    }
}
