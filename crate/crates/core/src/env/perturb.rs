//! Random adversary perturbation forces on the hip, femurs and tibias.
//!
//! Target forces are resampled at a fixed interval and ramped linearly
//! between targets, giving continuously varying pushes. The hip force
//! direction is confined to a cone about world vertical; limb forces point
//! anywhere on the sphere. Both legs are perturbed independently.

use nalgebra::Vector3;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::multibody::{ExternalForceSet, ModelInstance};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PerturbationSpec {
    /// Hip force magnitude upper bound, N (sampled uniformly from zero).
    pub hip_max: f64,
    /// Hip cone half-angle from vertical, degrees.
    pub hip_cone_deg: f64,
    /// Femur/tibia force magnitude upper bound, N.
    pub limb_max: f64,
    /// Seconds between target resamples.
    pub resample_interval: f64,
    /// Fraction of the interval spent ramping to the new target; the rest
    /// holds it.
    pub ramp_fraction: f64,
    /// Overall scale, 1.75 for the stress preset.
    pub scale: f64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self {
            hip_max: 200.0,
            hip_cone_deg: 20.0,
            limb_max: 100.0,
            resample_interval: 0.5,
            ramp_fraction: 1.0,
            scale: 1.0,
        }
    }
}

impl PerturbationSpec {
    pub fn stress(mut self) -> Self {
        self.scale = 1.75;
        self
    }

    pub fn zero() -> Self {
        Self { hip_max: 0.0, limb_max: 0.0, ..Self::default() }
    }

    /// One hip-force direction: uniform over the spherical cap within
    /// `hip_cone_deg` of world up.
    pub fn sample_hip_direction<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vector3<f64> {
        let cos_min = (self.hip_cone_deg.to_radians()).cos();
        let cos_theta = rng.random_range(cos_min..=1.0);
        let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        Vector3::new(sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta)
    }

    pub fn sample_sphere_direction<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vector3<f64> {
        let cos_theta: f64 = rng.random_range(-1.0..=1.0);
        let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        Vector3::new(sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta)
    }
}

/// Where a perturbation force is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerturbSite {
    Hip,
    FemurLeft,
    FemurRight,
    TibiaLeft,
    TibiaRight,
}

pub const PERTURB_SITES: [PerturbSite; 5] = [
    PerturbSite::Hip,
    PerturbSite::FemurLeft,
    PerturbSite::FemurRight,
    PerturbSite::TibiaLeft,
    PerturbSite::TibiaRight,
];

#[derive(Debug, Clone)]
struct SiteState {
    body: usize,
    point: Vector3<f64>,
    prev: Vector3<f64>,
    next: Vector3<f64>,
}

/// Piecewise-ramped force schedule over the five application sites.
#[derive(Debug, Clone)]
pub struct PerturbationState {
    spec: PerturbationSpec,
    sites: Vec<SiteState>,
    segment_start: f64,
}

impl PerturbationState {
    /// Application points come from the model's named anchors.
    pub fn new(model: &ModelInstance, spec: PerturbationSpec) -> Self {
        let resolve = |link: &str, anchor: &str| {
            let body = model.body_index(link).expect("perturbation link exists");
            let point = model.anchor(body, anchor).expect("perturbation anchor exists");
            (body, point)
        };
        let mut sites = Vec::with_capacity(5);
        for (link, anchor) in [
            ("pelvis", "hip_force"),
            ("thigh_l", "femur_force"),
            ("thigh_r", "femur_force"),
            ("shank_l", "tibia_force"),
            ("shank_r", "tibia_force"),
        ] {
            let (body, point) = resolve(link, anchor);
            sites.push(SiteState { body, point, prev: Vector3::zeros(), next: Vector3::zeros() });
        }
        Self { spec, sites, segment_start: 0.0 }
    }

    pub fn reset<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) {
        self.segment_start = 0.0;
        for i in 0..self.sites.len() {
            self.sites[i].prev = Vector3::zeros();
            let target = self.sample_target(i, rng);
            self.sites[i].next = target;
        }
    }

    fn sample_target<R: rand::Rng + ?Sized>(&self, site: usize, rng: &mut R) -> Vector3<f64> {
        let spec = &self.spec;
        // Keep the draw order fixed so episodes replay identically.
        if site == 0 {
            let mag = rng.random_range(0.0..=spec.hip_max.max(f64::MIN_POSITIVE)) * spec.scale;
            let dir = spec.sample_hip_direction(rng);
            if spec.hip_max == 0.0 {
                Vector3::zeros()
            } else {
                dir * mag
            }
        } else {
            let mag = rng.random_range(0.0..=spec.limb_max.max(f64::MIN_POSITIVE)) * spec.scale;
            let dir = spec.sample_sphere_direction(rng);
            if spec.limb_max == 0.0 {
                Vector3::zeros()
            } else {
                dir * mag
            }
        }
    }

    /// Advance to time `t`, resampling targets at interval boundaries.
    pub fn advance<R: rand::Rng + ?Sized>(&mut self, t: f64, rng: &mut R) {
        while t >= self.segment_start + self.spec.resample_interval {
            self.segment_start += self.spec.resample_interval;
            for i in 0..self.sites.len() {
                self.sites[i].prev = self.sites[i].next;
                let target = self.sample_target(i, rng);
                self.sites[i].next = target;
            }
        }
    }

    /// Current force per site (ramped), in site order.
    pub fn forces_at(&self, t: f64) -> Vec<Vector3<f64>> {
        let spec = &self.spec;
        let s = ((t - self.segment_start) / spec.resample_interval).clamp(0.0, 1.0);
        let alpha = if spec.ramp_fraction <= 0.0 { 1.0 } else { (s / spec.ramp_fraction).min(1.0) };
        self.sites.iter().map(|site| site.prev * (1.0 - alpha) + site.next * alpha).collect()
    }

    /// Append the current forces to an external force set; returns the
    /// per-site magnitudes for telemetry.
    pub fn apply(&self, t: f64, out: &mut ExternalForceSet) -> [f64; 5] {
        let forces = self.forces_at(t);
        let mut magnitudes = [0.0; 5];
        for (i, (site, force)) in self.sites.iter().zip(&forces).enumerate() {
            magnitudes[i] = force.norm();
            if magnitudes[i] > 0.0 {
                out.push(site.body, site.point, *force);
            }
        }
        magnitudes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_exoskeleton;
    use crate::multibody::ModelInstance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hip_directions_stay_in_cone() {
        let spec = PerturbationSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cos_min = 20f64.to_radians().cos();
        for _ in 0..10_000 {
            let d = spec.sample_hip_direction(&mut rng);
            assert!((d.norm() - 1.0).abs() < 1e-12);
            assert!(d.z >= cos_min - 1e-12, "direction {d:?} outside the 20 degree cone");
        }
    }

    #[test]
    fn magnitudes_stay_in_range() {
        let model = ModelInstance::build(&default_exoskeleton()).unwrap();
        let mut state = PerturbationState::new(&model, PerturbationSpec::default());
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        state.reset(&mut rng);
        let mut t = 0.0;
        for _ in 0..2000 {
            t += 1.0 / 30.0;
            state.advance(t, &mut rng);
            let forces = state.forces_at(t);
            assert!(forces[0].norm() <= 200.0 + 1e-9);
            for f in &forces[1..] {
                assert!(f.norm() <= 100.0 + 1e-9);
            }
        }
    }

    #[test]
    fn stress_preset_reaches_350() {
        let model = ModelInstance::build(&default_exoskeleton()).unwrap();
        let mut state = PerturbationState::new(&model, PerturbationSpec::default().stress());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        state.reset(&mut rng);
        let mut t = 0.0;
        let mut peak: f64 = 0.0;
        for _ in 0..20_000 {
            t += 1.0 / 30.0;
            state.advance(t, &mut rng);
            peak = peak.max(state.forces_at(t)[0].norm());
            assert!(state.forces_at(t)[0].norm() <= 350.0 + 1e-9);
        }
        assert!(peak > 300.0, "stress preset should approach 350 N, saw {peak}");
    }

    #[test]
    fn zero_spec_is_exactly_zero() {
        let model = ModelInstance::build(&default_exoskeleton()).unwrap();
        let mut state = PerturbationState::new(&model, PerturbationSpec::zero());
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        state.reset(&mut rng);
        let mut ext = ExternalForceSet::default();
        for k in 0..600 {
            let t = k as f64 / 30.0;
            state.advance(t, &mut rng);
            let mags = state.apply(t, &mut ext);
            assert_eq!(mags, [0.0; 5]);
        }
        assert!(ext.entries.is_empty());
    }

    #[test]
    fn forces_ramp_continuously() {
        let model = ModelInstance::build(&default_exoskeleton()).unwrap();
        let mut state = PerturbationState::new(&model, PerturbationSpec::default());
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        state.reset(&mut rng);
        let dt = 1.0 / 900.0;
        let mut prev = state.forces_at(0.0);
        for k in 1..2700 {
            let t = k as f64 * dt;
            state.advance(t, &mut rng);
            let cur = state.forces_at(t);
            for (a, b) in prev.iter().zip(&cur) {
                // 350 N of swing over 0.5 s bounds the slew rate.
                assert!((a - b).norm() < 700.0 * dt * 1.5, "jump {} at t={t}", (a - b).norm());
            }
            prev = cur;
        }
    }
}
