//! Per-episode dynamics randomization: six parameter groups sampled from
//! uniform ranges, with separate train and wider test presets.

use rand::RngExt;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformRange {
    pub lo: f64,
    pub hi: f64,
}

impl UniformRange {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "range [{lo}, {hi}] inverted");
        Self { lo, hi }
    }

    pub fn fixed(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..self.hi)
        }
    }
}

/// Multiplier ranges on the nominal dynamics plus the observation latency
/// range in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizationSpec {
    pub friction: UniformRange,
    pub mass: UniformRange,
    pub motor_strength: UniformRange,
    pub latency: UniformRange,
    pub inertia: UniformRange,
    pub com_offset: UniformRange,
}

impl RandomizationSpec {
    /// Ranges used while training.
    pub fn train() -> Self {
        Self {
            friction: UniformRange::new(0.9, 1.6),
            mass: UniformRange::new(0.8, 1.2),
            motor_strength: UniformRange::new(0.8, 1.2),
            latency: UniformRange::new(0.0, 0.04),
            inertia: UniformRange::new(0.5, 1.5),
            com_offset: UniformRange::new(0.9, 1.2),
        }
    }

    /// Wider out-of-distribution ranges used for robustness evaluation.
    pub fn test() -> Self {
        Self {
            friction: UniformRange::new(0.7, 2.0),
            mass: UniformRange::new(0.7, 1.5),
            motor_strength: UniformRange::new(0.7, 1.3),
            latency: UniformRange::new(0.0, 0.06),
            inertia: UniformRange::new(0.4, 1.6),
            com_offset: UniformRange::new(0.8, 1.3),
        }
    }

    /// Degenerate ranges: the nominal model every episode.
    pub fn nominal() -> Self {
        Self {
            friction: UniformRange::fixed(1.0),
            mass: UniformRange::fixed(1.0),
            motor_strength: UniformRange::fixed(1.0),
            latency: UniformRange::fixed(0.0),
            inertia: UniformRange::fixed(1.0),
            com_offset: UniformRange::fixed(1.0),
        }
    }

    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> DynamicsDraw {
        DynamicsDraw {
            friction: self.friction.sample(rng),
            mass: self.mass.sample(rng),
            motor_strength: self.motor_strength.sample(rng),
            latency: self.latency.sample(rng),
            inertia: self.inertia.sample(rng),
            com_offset: self.com_offset.sample(rng),
        }
    }
}

/// One episode's sampled dynamics parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsDraw {
    pub friction: f64,
    pub mass: f64,
    pub motor_strength: f64,
    pub latency: f64,
    pub inertia: f64,
    pub com_offset: f64,
}

impl DynamicsDraw {
    pub fn nominal() -> Self {
        Self { friction: 1.0, mass: 1.0, motor_strength: 1.0, latency: 0.0, inertia: 1.0, com_offset: 1.0 }
    }

    pub fn within(&self, spec: &RandomizationSpec) -> bool {
        let inside = |v: f64, r: &UniformRange| v >= r.lo - 1e-12 && v <= r.hi + 1e-12;
        inside(self.friction, &spec.friction)
            && inside(self.mass, &spec.mass)
            && inside(self.motor_strength, &spec.motor_strength)
            && inside(self.latency, &spec.latency)
            && inside(self.inertia, &spec.inertia)
            && inside(self.com_offset, &spec.com_offset)
    }
}
