use crate::error::{Error, Result};
use nalgebra::{Matrix3, Vector3};

pub type V3 = Vector3<f64>;
pub type M3 = Matrix3<f64>;

/// Trace-free symmetric 3x3 strain amplitude.
///
/// The constructor projects an arbitrary matrix onto its symmetric trace-free
/// part, so values of this type satisfy the constraint by construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrainMatrix(M3);

impl StrainMatrix {
    /// Symmetrise and remove the trace.
    pub fn project(m: &M3) -> Self {
        let sym = (m + m.transpose()) * 0.5;
        let tr = sym.trace() / 3.0;
        StrainMatrix(sym - M3::identity() * tr)
    }

    /// Strict constructor: rejects matrices that are not already symmetric
    /// and trace-free (up to round-off).
    pub fn new_exact(m: &M3) -> Result<Self> {
        let scale = m.norm().max(1.0);
        let asym = (m - m.transpose()).norm();
        if asym > 1e-12 * scale {
            return Err(Error::validation("strain matrix is not symmetric"));
        }
        if m.trace().abs() > 1e-12 * scale {
            return Err(Error::validation("strain matrix is not trace-free"));
        }
        Ok(Self::project(m))
    }

    pub fn from_diag(d1: f64, d2: f64, d3: f64) -> Self {
        Self::project(&M3::from_diagonal(&V3::new(d1, d2, d3)))
    }

    /// Build from the six independent upper-triangle entries
    /// (s11, s12, s13, s22, s23, s33); the trace is projected out.
    pub fn from_upper(s11: f64, s12: f64, s13: f64, s22: f64, s23: f64, s33: f64) -> Self {
        Self::project(&M3::new(s11, s12, s13, s12, s22, s23, s13, s23, s33))
    }

    pub fn zero() -> Self {
        StrainMatrix(M3::zeros())
    }

    pub fn matrix(&self) -> &M3 {
        &self.0
    }

    pub fn apply(&self, x: &V3) -> V3 {
        self.0 * x
    }

    /// Squared Frobenius norm |S|^2.
    pub fn frob2(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn frob(&self) -> f64 {
        self.0.norm()
    }

    /// Full contraction S : A.
    pub fn contract(&self, a: &M3) -> f64 {
        self.0.dot(a)
    }

    pub fn diag_sq_sum(&self) -> f64 {
        (0..3).map(|i| self.0[(i, i)] * self.0[(i, i)]).sum()
    }

    pub fn offdiag_sq_sum(&self) -> f64 {
        self.frob2() - self.diag_sq_sum()
    }

    pub fn is_zero(&self) -> bool {
        self.frob2() == 0.0
    }

    /// Sample a random unit Frobenius norm strain.
    pub fn random_unit<R: rand::Rng>(rng: &mut R) -> Self {
        loop {
            let mut m = M3::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    m[(i, j)] = rng.gen::<f64>() * 2.0 - 1.0;
                }
            }
            let s = Self::project(&m);
            let n = s.frob();
            if n > 1e-3 {
                return StrainMatrix(s.0 / n);
            }
        }
    }
}

impl std::ops::Add for StrainMatrix {
    type Output = StrainMatrix;
    fn add(self, rhs: StrainMatrix) -> StrainMatrix {
        StrainMatrix(self.0 + rhs.0)
    }
}

impl std::ops::Mul<f64> for StrainMatrix {
    type Output = StrainMatrix;
    fn mul(self, rhs: f64) -> StrainMatrix {
        StrainMatrix(self.0 * rhs)
    }
}

/// Positive particle radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallRadius(f64);

impl BallRadius {
    pub fn new(a: f64) -> Result<Self> {
        if a.is_finite() && a > 0.0 {
            Ok(BallRadius(a))
        } else {
            Err(Error::validation("ball radius must be positive and finite"))
        }
    }

    pub fn get(&self) -> f64 {
        self.0
    }
}
