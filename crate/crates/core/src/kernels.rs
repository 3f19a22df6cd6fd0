//! Closed-form singular solutions: the point stresslet, the single-sphere
//! stresslet flow, and the induced pair interaction kernel.
//!
//! Gradient matrices follow the Jacobian convention `J[(i,k)] = d v_i / d x_k`.

use crate::error::{Error, Result};
use crate::tensor::{BallRadius, StrainMatrix, M3, V3};

const FRAC_3_8PI: f64 = 3.0 / (8.0 * std::f64::consts::PI);
const FRAC_3_4PI: f64 = 3.0 / (4.0 * std::f64::consts::PI);

fn nonzero_r2(x: &V3) -> Result<f64> {
    let r2 = x.norm_squared();
    if r2 == 0.0 {
        Err(Error::SingularPoint)
    } else {
        Ok(r2)
    }
}

/// Pair interaction kernel g_S(x) = 5 (Sx.x)^2 / |x|^7 - 2 |Sx|^2 / |x|^5.
pub fn g_s(x: &V3, s: &StrainMatrix) -> Result<f64> {
    let r2 = nonzero_r2(x)?;
    let r = r2.sqrt();
    let sx = s.apply(x);
    let sxx = sx.dot(x);
    let r5 = r2 * r2 * r;
    Ok(5.0 * sxx * sxx / (r5 * r2) - 2.0 * sx.norm_squared() / r5)
}

/// Point stresslet velocity G_S(x) = -(3/8 pi) (Sx.x) x / |x|^5.
pub fn stresslet_g(x: &V3, s: &StrainMatrix) -> Result<V3> {
    let r2 = nonzero_r2(x)?;
    let r5 = r2 * r2 * r2.sqrt();
    let sxx = s.apply(x).dot(x);
    Ok(x * (-FRAC_3_8PI * sxx / r5))
}

/// Point stresslet pressure p_S(x) = -(3/4 pi) (Sx.x) / |x|^5.
pub fn pressure_p(x: &V3, s: &StrainMatrix) -> Result<f64> {
    let r2 = nonzero_r2(x)?;
    let r5 = r2 * r2 * r2.sqrt();
    Ok(-FRAC_3_4PI * s.apply(x).dot(x) / r5)
}

/// Jacobian of the point stresslet, J[(i,k)] = d (G_S)_i / d x_k.
pub fn grad_stresslet_g(x: &V3, s: &StrainMatrix) -> Result<M3> {
    let r2 = nonzero_r2(x)?;
    let r5 = r2 * r2 * r2.sqrt();
    let sx = s.apply(x);
    let sxx = sx.dot(x);
    let j = x * sx.transpose() * 2.0 + M3::identity() * sxx - x * x.transpose() * (5.0 * sxx / r2);
    Ok(j * (-FRAC_3_8PI / r5))
}

/// S del . G_S(x); equals (3/8 pi) g_S(x).
pub fn div_sg(x: &V3, s: &StrainMatrix) -> Result<f64> {
    Ok(FRAC_3_8PI * g_s(x, s)?)
}

/// Far-field of the single-sphere stresslet flow:
/// v[S](x) = -(5/2) a^3 (Sx.x) x / |x|^5.
pub fn v_far(x: &V3, s: &StrainMatrix, a: BallRadius) -> Result<V3> {
    let r2 = nonzero_r2(x)?;
    let r5 = r2 * r2 * r2.sqrt();
    let a3 = a.get().powi(3);
    let sxx = s.apply(x).dot(x);
    Ok(x * (-2.5 * a3 * sxx / r5))
}

/// Exterior solution with boundary data v = -S x on |x| = a:
/// v^s[S](x) = v[S](x) - a^5 Sx / |x|^5 + (5/2) a^5 (Sx.x) x / |x|^7.
pub fn v_full(x: &V3, s: &StrainMatrix, a: BallRadius) -> Result<V3> {
    let r2 = nonzero_r2(x)?;
    let r5 = r2 * r2 * r2.sqrt();
    let a3 = a.get().powi(3);
    let a5 = a3 * a.get() * a.get();
    let sx = s.apply(x);
    let sxx = sx.dot(x);
    Ok(x * (-2.5 * a3 * sxx / r5) - sx * (a5 / r5) + x * (2.5 * a5 * sxx / (r5 * r2)))
}

/// Pressure of the single-sphere stresslet flow (unit viscosity):
/// p^s[S](x) = -5 a^3 (Sx.x) / |x|^5.
pub fn pressure_vs(x: &V3, s: &StrainMatrix, a: BallRadius) -> Result<f64> {
    let r2 = nonzero_r2(x)?;
    let r5 = r2 * r2 * r2.sqrt();
    Ok(-5.0 * a.get().powi(3) * s.apply(x).dot(x) / r5)
}

/// Jacobian of the far field v[S].
pub fn grad_v_far(x: &V3, s: &StrainMatrix, a: BallRadius) -> Result<M3> {
    let r2 = nonzero_r2(x)?;
    let r5 = r2 * r2 * r2.sqrt();
    let a3 = a.get().powi(3);
    let sx = s.apply(x);
    let sxx = sx.dot(x);
    let j = x * sx.transpose() * 2.0 + M3::identity() * sxx - x * x.transpose() * (5.0 * sxx / r2);
    Ok(j * (-2.5 * a3 / r5))
}

/// Symmetric gradient D(v[S]) = (J + J^T)/2; trace-free for the far field.
pub fn sym_grad_v_far(x: &V3, s: &StrainMatrix, a: BallRadius) -> Result<M3> {
    let j = grad_v_far(x, s, a)?;
    Ok((j + j.transpose()) * 0.5)
}

/// Jacobian of the full exterior solution v^s[S].
pub fn grad_v_full(x: &V3, s: &StrainMatrix, a: BallRadius) -> Result<M3> {
    let r2 = nonzero_r2(x)?;
    let r = r2.sqrt();
    let r5 = r2 * r2 * r;
    let r7 = r5 * r2;
    let a3 = a.get().powi(3);
    let a5 = a3 * a.get() * a.get();
    let sx = s.apply(x);
    let sxx = sx.dot(x);
    let far = (x * sx.transpose() * 2.0 + M3::identity() * sxx
        - x * x.transpose() * (5.0 * sxx / r2))
        * (-2.5 * a3 / r5);
    // -a^5 grad(Sx/|x|^5)
    let t1 = (s.matrix() / r5 - sx * x.transpose() * (5.0 / r7)) * (-a5);
    // (5/2) a^5 grad((Sx.x) x / |x|^7)
    let t2 = (x * sx.transpose() * (2.0 / r7) + M3::identity() * (sxx / r7)
        - x * x.transpose() * (7.0 * sxx / (r7 * r2)))
        * (2.5 * a5);
    Ok(far + t1 + t2)
}

/// Newtonian stress sigma(v^s, p^s) = 2 D(v^s) - p^s Id (unit viscosity).
pub fn stress_vs(x: &V3, s: &StrainMatrix, a: BallRadius) -> Result<M3> {
    let j = grad_v_full(x, s, a)?;
    let p = pressure_vs(x, s, a)?;
    Ok(j + j.transpose() - M3::identity() * p)
}

/// Stress of the point stresslet (G_S, p_S).
pub fn stress_stresslet(x: &V3, s: &StrainMatrix) -> Result<M3> {
    let j = grad_stresslet_g(x, s)?;
    let p = pressure_p(x, s)?;
    Ok(j + j.transpose() - M3::identity() * p)
}
