//! Kinematic and inertial description of an articulated floating-base chain.
//!
//! A [`ModelSpec`] is a plain data structure that can be serialized to and
//! from TOML (see `docs/model-schema` in the README). All units are SI:
//! meters, kilograms, seconds, radians, newtons.
//!
//! The default exoskeleton spec ships plausible segment masses summing to
//! 20.4 kg. Segment inertias are estimated from simple solids and are
//! representative, not measured values.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Joint classification. The root joint of the exoskeleton is floating
/// (6 DoF, unactuated); all actuated joints are revolute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Floating,
    Revolute,
    Prismatic,
}

/// Symmetric inertia tensor about the link center of mass, kg·m².
///
/// Products of inertia default to zero so that configs can state only the
/// diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertiaSpec {
    pub ixx: f64,
    pub iyy: f64,
    pub izz: f64,
    #[serde(default)]
    pub ixy: f64,
    #[serde(default)]
    pub ixz: f64,
    #[serde(default)]
    pub iyz: f64,
}

impl InertiaSpec {
    pub fn diagonal(ixx: f64, iyy: f64, izz: f64) -> Self {
        Self { ixx, iyy, izz, ixy: 0.0, ixz: 0.0, iyz: 0.0 }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.ixx, self.ixy, self.ixz, self.ixy, self.iyy, self.iyz, self.ixz, self.iyz,
            self.izz,
        )
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            ixx: self.ixx * factor,
            iyy: self.iyy * factor,
            izz: self.izz * factor,
            ixy: self.ixy * factor,
            ixz: self.ixz * factor,
            iyz: self.iyz * factor,
        }
    }

    /// Symmetric positive definite test via leading principal minors.
    pub fn is_positive_definite(&self) -> bool {
        let m = self.matrix();
        let d1 = m[(0, 0)];
        let d2 = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let d3 = m.determinant();
        d1 > 0.0 && d2 > 0.0 && d3 > 0.0
    }
}

/// One rigid body of the chain. The link frame is placed at the inboard
/// joint; `com` and `anchors` are expressed in that frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkSpec {
    pub name: String,
    pub mass: f64,
    pub inertia: InertiaSpec,
    pub com: [f64; 3],
    /// Named geometry anchor points (force application sites, strap rings).
    #[serde(default)]
    pub anchors: BTreeMap<String, [f64; 3]>,
}

impl LinkSpec {
    pub fn com_vec(&self) -> Vector3<f64> {
        Vector3::from(self.com)
    }
}

/// A joint connecting `parent` (or the world when absent) to `child`.
///
/// `origin` is the joint position in the parent link frame; for the root
/// joint it is the world position of the chain in the zero configuration.
/// The child link frame coincides with the joint frame at zero joint value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    #[serde(default)]
    pub parent: Option<String>,
    pub child: String,
    pub origin: [f64; 3],
    /// Rotation (revolute) or translation (prismatic) axis, unit length.
    /// Ignored for floating joints.
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    /// Lower/upper position limit, rad or m. Enforced by stiff limit
    /// torques during simulation; absent means unlimited.
    #[serde(default)]
    pub limits: Option<[f64; 2]>,
    /// Actuator torque bound, N·m. Only meaningful for actuated joints.
    #[serde(default)]
    pub torque_limit: Option<f64>,
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl JointSpec {
    pub fn axis_vec(&self) -> Vector3<f64> {
        Vector3::from(self.axis)
    }

    pub fn origin_vec(&self) -> Vector3<f64> {
        Vector3::from(self.origin)
    }
}

/// Foot declaration: the link that carries the four force sensors, with the
/// sensor offsets in the foot frame (sole plane).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FootSpec {
    pub link: String,
    pub sensors: Vec<[f64; 3]>,
}

/// Full model description. See [`default_exoskeleton`] for the shipped
/// 14-DoF exoskeleton chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub total_mass: f64,
    #[serde(rename = "link")]
    pub links: Vec<LinkSpec>,
    #[serde(rename = "joint")]
    pub joints: Vec<JointSpec>,
    /// Names of the actuated joints, in action order.
    #[serde(default)]
    pub actuated: Vec<String>,
    #[serde(rename = "foot", default)]
    pub feet: Vec<FootSpec>,
}

/// Validation failure, reporting which invariant broke.
#[derive(Debug, Clone, Error)]
#[error("invalid model spec: {0}")]
pub struct InvalidSpec(pub String);

impl ModelSpec {
    /// Check every invariant. Structural rules apply to any chain; the
    /// exoskeleton profile rules (floating root, eight actuated revolute
    /// joints, four sensors per foot, distinct ankle axis positions) apply
    /// as soon as the spec declares actuated joints or feet.
    pub fn validate(&self) -> Result<(), InvalidSpec> {
        self.validate_structure()?;
        if !self.actuated.is_empty() || !self.feet.is_empty() {
            self.validate_exoskeleton_profile()?;
        }
        Ok(())
    }

    fn validate_structure(&self) -> Result<(), InvalidSpec> {
        if self.links.is_empty() {
            return Err(InvalidSpec("model has no links".into()));
        }
        let mut mass_sum = 0.0;
        for link in &self.links {
            if !(link.mass > 0.0) {
                return Err(InvalidSpec(format!(
                    "link '{}' must have positive mass, got {}",
                    link.name, link.mass
                )));
            }
            if !link.inertia.is_positive_definite() {
                return Err(InvalidSpec(format!(
                    "link '{}' inertia tensor is not symmetric positive definite",
                    link.name
                )));
            }
            mass_sum += link.mass;
        }
        if (mass_sum - self.total_mass).abs() > 1e-9 {
            return Err(InvalidSpec(format!(
                "total_mass {} does not match sum of link masses {}",
                self.total_mass, mass_sum
            )));
        }

        let mut names = BTreeMap::new();
        for (i, link) in self.links.iter().enumerate() {
            if names.insert(link.name.clone(), i).is_some() {
                return Err(InvalidSpec(format!("duplicate link name '{}'", link.name)));
            }
        }
        if self.joints.len() != self.links.len() {
            return Err(InvalidSpec(format!(
                "expected one joint per link ({} links, {} joints)",
                self.links.len(),
                self.joints.len()
            )));
        }

        let mut root_count = 0;
        let mut seen_children = BTreeMap::new();
        for (ji, joint) in self.joints.iter().enumerate() {
            if !names.contains_key(&joint.child) {
                return Err(InvalidSpec(format!(
                    "joint '{}' references unknown child link '{}'",
                    joint.name, joint.child
                )));
            }
            if seen_children.insert(joint.child.clone(), ji).is_some() {
                return Err(InvalidSpec(format!(
                    "link '{}' has more than one inboard joint",
                    joint.child
                )));
            }
            match &joint.parent {
                None => root_count += 1,
                Some(p) => {
                    // Joint order doubles as the topological order of the tree.
                    let parent_joint = self.joints[..ji].iter().position(|j| &j.child == p);
                    if parent_joint.is_none() {
                        return Err(InvalidSpec(format!(
                            "joint '{}': parent link '{}' is not defined by an earlier joint",
                            joint.name, p
                        )));
                    }
                }
            }
            if joint.kind != JointKind::Floating {
                let norm = joint.axis_vec().norm();
                if (norm - 1.0).abs() > 1e-3 {
                    return Err(InvalidSpec(format!(
                        "joint '{}' axis must be unit length, norm is {}",
                        joint.name, norm
                    )));
                }
            }
            if let Some([lo, hi]) = joint.limits {
                if lo >= hi {
                    return Err(InvalidSpec(format!(
                        "joint '{}' limits [{}, {}] are inverted",
                        joint.name, lo, hi
                    )));
                }
            }
            if let Some(tl) = joint.torque_limit {
                if !(tl > 0.0) {
                    return Err(InvalidSpec(format!(
                        "joint '{}' torque limit must be positive",
                        joint.name
                    )));
                }
            }
        }
        if root_count != 1 {
            return Err(InvalidSpec(format!(
                "expected exactly one root joint (parent = world), found {root_count}"
            )));
        }
        let floating = self.joints.iter().filter(|j| j.kind == JointKind::Floating).count();
        if floating > 1 {
            return Err(InvalidSpec(format!("at most one floating joint allowed, found {floating}")));
        }
        if floating == 1 && self.joints[0].kind != JointKind::Floating {
            return Err(InvalidSpec("the floating joint must be the root joint".into()));
        }

        for foot in &self.feet {
            if !names.contains_key(&foot.link) {
                return Err(InvalidSpec(format!("foot references unknown link '{}'", foot.link)));
            }
        }
        for name in &self.actuated {
            let joint = self
                .joints
                .iter()
                .find(|j| &j.name == name)
                .ok_or_else(|| InvalidSpec(format!("actuated joint '{name}' not found")))?;
            if joint.kind == JointKind::Floating {
                return Err(InvalidSpec(format!("actuated joint '{name}' may not be floating")));
            }
        }
        Ok(())
    }

    fn validate_exoskeleton_profile(&self) -> Result<(), InvalidSpec> {
        if self.joints.first().map(|j| j.kind) != Some(JointKind::Floating) {
            return Err(InvalidSpec("exoskeleton root joint must be floating".into()));
        }
        if self.actuated.len() != 8 {
            return Err(InvalidSpec(format!(
                "exoskeleton requires 8 actuated joints, found {}",
                self.actuated.len()
            )));
        }
        for name in &self.actuated {
            let joint = self.joints.iter().find(|j| &j.name == name).unwrap();
            if joint.kind != JointKind::Revolute {
                return Err(InvalidSpec(format!("actuated joint '{name}' must be revolute")));
            }
        }
        if self.feet.len() != 2 {
            return Err(InvalidSpec(format!("exoskeleton requires 2 feet, found {}", self.feet.len())));
        }
        for foot in &self.feet {
            if foot.sensors.len() != 4 {
                return Err(InvalidSpec(format!(
                    "foot '{}' must declare exactly 4 sensor offsets, found {}",
                    foot.link,
                    foot.sensors.len()
                )));
            }
        }
        // The two ankle joints of each leg must sit at different positions.
        for foot in &self.feet {
            let mut chain = Vec::new();
            let mut cur = Some(foot.link.clone());
            while let Some(link) = cur {
                let joint = self.joints.iter().find(|j| j.child == link).unwrap();
                if self.actuated.contains(&joint.name) {
                    chain.push(joint);
                }
                cur = joint.parent.clone();
            }
            if chain.len() >= 2 {
                let (a, b) = (chain[0], chain[1]);
                let pa = self.zero_config_joint_position(a);
                let pb = self.zero_config_joint_position(b);
                if (pa - pb).norm() < 1e-6 {
                    return Err(InvalidSpec(format!(
                        "ankle joints '{}' and '{}' must have distinct axis positions",
                        a.name, b.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// World position of a joint in the zero configuration, where every
    /// rotation is identity and positions are plain sums of origins.
    fn zero_config_joint_position(&self, joint: &JointSpec) -> Vector3<f64> {
        let mut pos = joint.origin_vec();
        let mut parent = joint.parent.clone();
        while let Some(link) = parent {
            let inboard = self
                .joints
                .iter()
                .find(|j| j.child == link)
                .expect("structure validated");
            pos += inboard.origin_vec();
            parent = inboard.parent.clone();
        }
        pos
    }

    /// Spec with all link masses multiplied by `factor`; `total_mass` is
    /// kept consistent.
    pub fn with_mass_scaled(&self, factor: f64) -> Self {
        let mut spec = self.clone();
        for link in &mut spec.links {
            link.mass *= factor;
        }
        spec.total_mass *= factor;
        spec
    }

    /// Spec with all inertia tensors multiplied by `factor`.
    pub fn with_inertia_scaled(&self, factor: f64) -> Self {
        let mut spec = self.clone();
        for link in &mut spec.links {
            link.inertia = link.inertia.scaled(factor);
        }
        spec
    }

    /// Spec with all center-of-mass offsets multiplied by `factor`.
    pub fn with_com_scaled(&self, factor: f64) -> Self {
        let mut spec = self.clone();
        for link in &mut spec.links {
            for c in &mut link.com {
                *c *= factor;
            }
        }
        spec
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("model spec serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, InvalidSpec> {
        let spec: ModelSpec =
            toml::from_str(text).map_err(|e| InvalidSpec(format!("parse error: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, InvalidSpec> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InvalidSpec(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_toml_string())
    }
}

/// Half-extents of the foot sensor rectangle: x forward, y lateral.
pub const SENSOR_HALF_X: f64 = 0.055;
pub const SENSOR_HALF_Y: f64 = 0.035;

/// Names of the actuated joints in action order.
pub const ACTUATED_ORDER: [&str; 8] = [
    "hip_l",
    "hip_r",
    "knee_l",
    "knee_r",
    "ankle_dp_l",
    "ankle_dp_r",
    "ankle_ie_l",
    "ankle_ie_r",
];

/// The shipped 14-DoF lower-extremity exoskeleton chain: floating pelvis,
/// per leg a revolute hip and knee (sagittal) and a 2-DoF ankle whose
/// dorsi/plantar and inversion/eversion axes sit at different positions.
///
/// Masses sum to 20.4 kg with the battery carried by the pelvis link.
pub fn default_exoskeleton() -> ModelSpec {
    let mut links = vec![LinkSpec {
        name: "pelvis".into(),
        mass: 6.0,
        inertia: InertiaSpec::diagonal(0.093, 0.063, 0.093),
        com: [-0.03, 0.0, 0.10],
        anchors: BTreeMap::from([
            ("hip_force".into(), [0.0, 0.0, 0.05]),
            ("human_mount".into(), [0.0, 0.0, 0.02]),
        ]),
    }];
    let mut joints = vec![JointSpec {
        name: "root".into(),
        kind: JointKind::Floating,
        parent: None,
        child: "pelvis".into(),
        origin: [0.0, 0.0, 0.89],
        axis: [0.0, 0.0, 1.0],
        limits: None,
        torque_limit: None,
    }];

    for (suffix, side) in [("l", 1.0), ("r", -1.0)] {
        let thigh = format!("thigh_{suffix}");
        let shank = format!("shank_{suffix}");
        let talus = format!("talus_{suffix}");
        let foot = format!("foot_{suffix}");
        links.push(LinkSpec {
            name: thigh.clone(),
            mass: 2.7,
            inertia: InertiaSpec::diagonal(0.040, 0.040, 0.004),
            com: [0.0, 0.0, -0.18],
            anchors: BTreeMap::from([
                ("femur_force".into(), [0.0, 0.0, -0.20]),
                ("strap_px".into(), [0.05, 0.0, -0.20]),
                ("strap_nx".into(), [-0.05, 0.0, -0.20]),
                ("strap_py".into(), [0.0, 0.05, -0.20]),
                ("strap_ny".into(), [0.0, -0.05, -0.20]),
            ]),
        });
        links.push(LinkSpec {
            name: shank.clone(),
            mass: 2.2,
            inertia: InertiaSpec::diagonal(0.032, 0.032, 0.003),
            com: [0.0, 0.0, -0.17],
            anchors: BTreeMap::from([
                ("tibia_force".into(), [0.0, 0.0, -0.20]),
                ("strap_px".into(), [0.05, 0.0, -0.20]),
                ("strap_nx".into(), [-0.05, 0.0, -0.20]),
                ("strap_py".into(), [0.0, 0.05, -0.20]),
                ("strap_ny".into(), [0.0, -0.05, -0.20]),
            ]),
        });
        links.push(LinkSpec {
            name: talus.clone(),
            mass: 0.3,
            inertia: InertiaSpec::diagonal(0.0005, 0.0005, 0.0005),
            com: [0.0, 0.0, -0.015],
            anchors: BTreeMap::new(),
        });
        links.push(LinkSpec {
            name: foot.clone(),
            mass: 2.0,
            inertia: InertiaSpec::diagonal(0.002, 0.004, 0.005),
            com: [0.01, 0.0, -0.03],
            anchors: BTreeMap::from([("weld".into(), [0.0, 0.0, -0.03])]),
        });

        joints.push(JointSpec {
            name: format!("hip_{suffix}"),
            kind: JointKind::Revolute,
            parent: Some("pelvis".into()),
            child: thigh.clone(),
            origin: [0.0, side * 0.12, 0.0],
            axis: [0.0, 1.0, 0.0],
            limits: Some([-2.1, 0.4]),
            torque_limit: Some(100.0),
        });
        joints.push(JointSpec {
            name: format!("knee_{suffix}"),
            kind: JointKind::Revolute,
            parent: Some(thigh),
            child: shank.clone(),
            origin: [0.0, 0.0, -0.40],
            axis: [0.0, 1.0, 0.0],
            limits: Some([0.0, 2.4]),
            torque_limit: Some(100.0),
        });
        joints.push(JointSpec {
            name: format!("ankle_dp_{suffix}"),
            kind: JointKind::Revolute,
            parent: Some(shank),
            child: talus.clone(),
            origin: [0.0, 0.0, -0.40],
            axis: [0.0, 1.0, 0.0],
            limits: Some([-0.9, 0.9]),
            torque_limit: Some(100.0),
        });
        joints.push(JointSpec {
            name: format!("ankle_ie_{suffix}"),
            kind: JointKind::Revolute,
            parent: Some(talus),
            child: foot.clone(),
            origin: [0.02, 0.0, -0.03],
            axis: [1.0, 0.0, 0.0],
            limits: Some([-0.6, 0.6]),
            torque_limit: Some(100.0),
        });
    }

    let sensor_rect = vec![
        [SENSOR_HALF_X, SENSOR_HALF_Y, -0.06],
        [SENSOR_HALF_X, -SENSOR_HALF_Y, -0.06],
        [-SENSOR_HALF_X, SENSOR_HALF_Y, -0.06],
        [-SENSOR_HALF_X, -SENSOR_HALF_Y, -0.06],
    ];
    ModelSpec {
        total_mass: 20.4,
        links,
        joints,
        actuated: ACTUATED_ORDER.iter().map(|s| s.to_string()).collect(),
        feet: vec![
            FootSpec { link: "foot_l".into(), sensors: sensor_rect.clone() },
            FootSpec { link: "foot_r".into(), sensors: sensor_rect },
        ],
    }
}
