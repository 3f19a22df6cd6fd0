//! Bounded reference domains carrying the mean-field density f = 1_O / |O|.

use crate::error::{Error, Result};
use crate::tensor::V3;
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DomainO {
    Ball { center: V3, radius: f64 },
    Cube { center: V3, side: f64 },
}

impl DomainO {
    pub fn ball(center: V3, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::validation("ball radius must be positive"));
        }
        Ok(DomainO::Ball { center, radius })
    }

    pub fn cube(center: V3, side: f64) -> Result<Self> {
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::validation("cube side must be positive"));
        }
        Ok(DomainO::Cube { center, side })
    }

    /// Unit cube centered at the origin.
    pub fn unit_cube() -> Self {
        DomainO::Cube {
            center: V3::zeros(),
            side: 1.0,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            DomainO::Ball { radius, .. } => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
            DomainO::Cube { side, .. } => side.powi(3),
        }
    }

    pub fn contains(&self, x: &V3) -> bool {
        match self {
            DomainO::Ball { center, radius } => (x - center).norm() <= *radius,
            DomainO::Cube { center, side } => {
                let d = x - center;
                d.x.abs() <= side / 2.0 && d.y.abs() <= side / 2.0 && d.z.abs() <= side / 2.0
            }
        }
    }

    /// Whether the ball B(x, r) is contained in the domain.
    pub fn contains_ball(&self, x: &V3, r: f64) -> bool {
        match self {
            DomainO::Ball { center, radius } => (x - center).norm() + r <= *radius,
            DomainO::Cube { center, side } => {
                let d = x - center;
                let h = side / 2.0 - r;
                h >= 0.0 && d.x.abs() <= h && d.y.abs() <= h && d.z.abs() <= h
            }
        }
    }

    /// Uniform sample from the domain.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> V3 {
        match self {
            DomainO::Cube { center, side } => {
                center
                    + V3::new(
                        (rng.gen::<f64>() - 0.5) * side,
                        (rng.gen::<f64>() - 0.5) * side,
                        (rng.gen::<f64>() - 0.5) * side,
                    )
            }
            DomainO::Ball { center, radius } => loop {
                let p = V3::new(
                    rng.gen::<f64>() * 2.0 - 1.0,
                    rng.gen::<f64>() * 2.0 - 1.0,
                    rng.gen::<f64>() * 2.0 - 1.0,
                );
                if p.norm_squared() <= 1.0 {
                    break center + p * *radius;
                }
            },
        }
    }

    /// Rescale the domain about the origin by a factor lambda.
    pub fn scaled(&self, lambda: f64) -> Self {
        match *self {
            DomainO::Ball { center, radius } => DomainO::Ball {
                center: center * lambda,
                radius: radius * lambda,
            },
            DomainO::Cube { center, side } => DomainO::Cube {
                center: center * lambda,
                side: side * lambda,
            },
        }
    }
}
