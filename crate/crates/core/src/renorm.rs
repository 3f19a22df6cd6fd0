//! The eta-regularization machinery: interior ball solution, surface traction
//! measure, the smoothing tensor Psi^eta, the energy constant, and the
//! boundary-pairing quadratures behind the renormalized-energy identities.
//!
//! The interior Stokes solution with boundary data G_S on the unit sphere is
//! the divergence-free polynomial pair
//!   v(x)  = c_cubic [ (x.Sx) x - (5/2)|x|^2 Sx ] + c_linear Sx,
//!   p(x)  = -(21/2) c_cubic (x.Sx),
//! with c_cubic = -3/(8 pi) and c_linear = -15/(16 pi); the coefficients are
//! recovered by least squares rather than hard-coded. For general eta the
//! solution rescales as G^eta(x) = eta^{-2} G^1(x/eta), p^eta = eta^{-3} p^1(./eta).

use crate::error::{Error, Result};
use crate::kernels;
use crate::quad::{BallQuadrature, SphereQuadrature};
use crate::tensor::{M3, StrainMatrix, V3};
use std::f64::consts::PI;

/// Divergence-free polynomial Stokes solution on the unit ball with boundary
/// data G_S, plus the achieved boundary residual.
#[derive(Clone, Debug)]
pub struct InteriorSolution {
    s: StrainMatrix,
    /// Coefficient of (x.Sx) x - (5/2)|x|^2 Sx.
    pub c_cubic: f64,
    /// Coefficient of Sx.
    pub c_linear: f64,
    /// Max-norm boundary mismatch over the fitting nodes.
    pub boundary_residual: f64,
}

fn basis_cubic(x: &V3, s: &StrainMatrix) -> V3 {
    let sx = s.apply(x);
    x * x.dot(&sx) - sx * (2.5 * x.norm_squared())
}

/// Least-squares solve for the interior solution; the boundary data is a
/// degree-3 spherical polynomial lying exactly in the span, so the residual
/// is round-off level.
pub fn solve_interior_g1(s: &StrainMatrix) -> Result<InteriorSolution> {
    if s.is_zero() {
        return Ok(InteriorSolution {
            s: *s,
            c_cubic: 0.0,
            c_linear: 0.0,
            boundary_residual: 0.0,
        });
    }
    let q = SphereQuadrature::new(10);
    let n_rows = 3 * q.nodes.len();
    let mut m = nalgebra::DMatrix::zeros(n_rows, 2);
    let mut b = nalgebra::DVector::zeros(n_rows);
    for (i, n) in q.nodes.iter().enumerate() {
        let b1 = basis_cubic(n, s);
        let b2 = s.apply(n);
        let g = kernels::stresslet_g(n, s)?;
        for r in 0..3 {
            m[(3 * i + r, 0)] = b1[r];
            m[(3 * i + r, 1)] = b2[r];
            b[3 * i + r] = g[r];
        }
    }
    let svd = m.clone().svd(true, true);
    let x = svd
        .solve(&b, 1e-13)
        .map_err(|e| Error::accuracy(format!("interior solve failed: {e}")))?;
    let resid = (&m * &x - &b).amax();
    if resid > 1e-10 {
        return Err(Error::accuracy(format!(
            "interior boundary residual {resid:.3e} exceeds 1e-10"
        )));
    }
    Ok(InteriorSolution {
        s: *s,
        c_cubic: x[0],
        c_linear: x[1],
        boundary_residual: resid,
    })
}

impl InteriorSolution {
    pub fn strain(&self) -> &StrainMatrix {
        &self.s
    }

    /// Interior velocity on the unit ball.
    pub fn velocity(&self, x: &V3) -> V3 {
        basis_cubic(x, &self.s) * self.c_cubic + self.s.apply(x) * self.c_linear
    }

    /// Interior pressure (zero ball average).
    pub fn pressure(&self, x: &V3) -> f64 {
        -10.5 * self.c_cubic * x.dot(&self.s.apply(x))
    }

    /// Velocity gradient, J[(i, k)] = d_k v_i.
    pub fn grad_velocity(&self, x: &V3) -> M3 {
        let s = self.s.matrix();
        let sx = self.s.apply(x);
        let q = x.dot(&sx);
        let mut j = M3::zeros();
        for i in 0..3 {
            for k in 0..3 {
                // d_k [ q x_i - (5/2)|x|^2 (Sx)_i ]
                let cubic = 2.0 * sx[k] * x[i] + q * if i == k { 1.0 } else { 0.0 }
                    - 5.0 * x[k] * sx[i]
                    - 2.5 * x.norm_squared() * s[(i, k)];
                j[(i, k)] = self.c_cubic * cubic + self.c_linear * s[(i, k)];
            }
        }
        j
    }

    /// Full interior Cauchy stress 2 D(v) - p Id on the unit ball.
    pub fn stress(&self, x: &V3) -> M3 {
        let j = self.grad_velocity(x);
        j + j.transpose() - M3::identity() * self.pressure(x)
    }

    /// Rescaled solution on the ball of radius eta.
    pub fn velocity_eta(&self, x: &V3, eta: f64) -> V3 {
        self.velocity(&(x / eta)) / (eta * eta)
    }

    pub fn stress_eta(&self, x: &V3, eta: f64) -> M3 {
        self.stress(&(x / eta)) / eta.powi(3)
    }
}

/// Traction jump density across the sphere of radius eta: interior minus
/// exterior Stokes conormal, evaluated at the surface point eta n. Closed
/// form (3/4 pi eta^3)(4 (n.Sn) n - Sn) for the exterior side; the jump
/// scales as eta^{-3} and has zero total surface integral.
pub fn traction_jump(n: &V3, s: &StrainMatrix, eta: f64, sol: &InteriorSolution) -> Result<V3> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::validation("eta must be positive"));
    }
    if (n.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::validation("traction direction must be a unit vector"));
    }
    let x = n * eta;
    let ext = kernels::stress_stresslet(&x, s)? * n;
    let int = sol.stress_eta(&x, eta) * n;
    Ok(int - ext)
}

/// Boundary pairing <S^eta(. - center), F> by sphere quadrature, run at two
/// degrees as an accuracy guard. For smooth F the eta -> 0 limit is
/// -S : grad F(center).
pub fn pair_with_s_eta(
    f: &dyn Fn(&V3) -> Result<V3>,
    center: &V3,
    eta: f64,
    s: &StrainMatrix,
) -> Result<f64> {
    let sol = solve_interior_g1(s)?;
    let eval = |degree: usize| -> Result<f64> {
        let q = SphereQuadrature::new(degree);
        q.integrate_try(|n| {
            let jump = traction_jump(n, s, eta, &sol)?;
            Ok(f(&(center + n * eta))?.dot(&jump) * eta * eta)
        })
    };
    let lo = eval(16)?;
    let hi = eval(24)?;
    if (lo - hi).abs() > 1e-8 * hi.abs().max(1.0) {
        return Err(Error::accuracy(format!(
            "surface pairing quadrature unstable: {lo} vs {hi}"
        )));
    }
    Ok(hi)
}

/// The smoothing tensor on B(0, eta); zero outside.
pub fn psi_eta(x: &V3, eta: f64, s: &StrainMatrix, sol: &InteriorSolution) -> Result<M3> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::validation("eta must be positive"));
    }
    if x.norm() > eta {
        return Ok(M3::zeros());
    }
    let sm = s.matrix();
    let sx = s.apply(x);
    let outer = sx * x.transpose() + x * sx.transpose();
    let poly = (outer - sm * (2.5 * x.norm_squared()) + sm * (1.25 * eta * eta))
        * (3.0 / (PI * eta.powi(5)));
    let j = sol.grad_velocity(&(x / eta)) / eta.powi(3);
    let d = j + j.transpose();
    Ok(poly - d + M3::identity() * (sol.pressure(&(x / eta)) / eta.powi(3)))
}

/// Integral of Psi^eta over its supporting ball; equals S.
pub fn psi_total(eta: f64, s: &StrainMatrix, sol: &InteriorSolution) -> Result<M3> {
    let q = BallQuadrature::new(eta, 8, 12);
    let mut total = M3::zeros();
    for (x, w) in q.nodes.iter().zip(&q.weights) {
        total += psi_eta(x, eta, s, sol)? * *w;
    }
    Ok(total)
}

/// Energy constant E*(S) = int_{B_1} |grad G_S^1|^2 + (3/10 pi) |S|^2;
/// equals (15/16 pi)|S|^2 and also eta^3 <S^eta, G_S>.
pub fn energy_constant(s: &StrainMatrix, sol: &InteriorSolution) -> f64 {
    // |grad v|^2 is a polynomial of degree 4: the product rule is exact
    let q = BallQuadrature::new(1.0, 6, 10);
    let mut grad2 = 0.0;
    for (x, w) in q.nodes.iter().zip(&q.weights) {
        grad2 += sol.grad_velocity(x).norm_squared() * w;
    }
    grad2 + 3.0 / (10.0 * PI) * s.frob2()
}

/// Boundary functional I_i = int_{dB_a} (sigma n (x) x - 2 v (x) n) ds,
/// symmetrized: only the symmetric part enters the effective-viscosity
/// identities (it is contracted with symmetric strains). Two quadrature
/// degrees guard accuracy.
pub fn quad_ii(
    v_field: &dyn Fn(&V3) -> Result<V3>,
    stress_field: &dyn Fn(&V3) -> Result<M3>,
    a: f64,
) -> Result<M3> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::validation("sphere radius must be positive"));
    }
    let eval = |degree: usize| -> Result<M3> {
        let q = SphereQuadrature::new(degree);
        let mut acc = M3::zeros();
        for (n, w) in q.nodes.iter().zip(&q.weights) {
            let x = n * a;
            let tn = stress_field(&x)? * n;
            let v = v_field(&x)?;
            acc += (tn * x.transpose() - v * n.transpose() * 2.0) * (*w * a * a);
        }
        Ok((acc + acc.transpose()) / 2.0)
    };
    let lo = eval(16)?;
    let hi = eval(24)?;
    if (lo - hi).norm() > 1e-8 * hi.norm().max(1.0) {
        return Err(Error::accuracy(format!(
            "boundary functional quadrature unstable: {} vs {}",
            lo.norm(),
            hi.norm()
        )));
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ewald::{self, EwaldParams};
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn s_diag() -> StrainMatrix {
        StrainMatrix::from_diag(1.0, -1.0, 0.0)
    }

    fn s_full() -> StrainMatrix {
        StrainMatrix::from_upper(0.4, -0.2, 0.7, 0.3, -0.1, -0.7)
    }

    #[test]
    fn interior_solution_coefficients_and_boundary() {
        let sol = solve_interior_g1(&s_full()).unwrap();
        assert_relative_eq!(sol.c_cubic, -3.0 / (8.0 * PI), epsilon = 1e-12);
        assert_relative_eq!(sol.c_linear, -15.0 / (16.0 * PI), epsilon = 1e-12);
        assert!(sol.boundary_residual < 1e-10);
        // 200 fresh unit normals
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = loop {
                let v = V3::new(
                    rand::Rng::gen::<f64>(&mut rng) * 2.0 - 1.0,
                    rand::Rng::gen::<f64>(&mut rng) * 2.0 - 1.0,
                    rand::Rng::gen::<f64>(&mut rng) * 2.0 - 1.0,
                );
                if (0.2..=1.0).contains(&v.norm()) {
                    break v.normalize();
                }
            };
            let err = (sol.velocity(&n) - kernels::stresslet_g(&n, &s_full()).unwrap()).norm();
            assert!(err < 1e-10, "boundary mismatch {err}");
        }
    }

    #[test]
    fn interior_solution_is_linear_in_s_and_zero_at_zero() {
        let s = s_full();
        let sol1 = solve_interior_g1(&s).unwrap();
        let sol2 = solve_interior_g1(&(s * 2.0)).unwrap();
        assert_relative_eq!(sol2.c_cubic, sol1.c_cubic, epsilon = 1e-12);
        assert_relative_eq!(sol2.c_linear, sol1.c_linear, epsilon = 1e-12);
        let z = solve_interior_g1(&StrainMatrix::zero()).unwrap();
        assert_eq!(z.c_cubic, 0.0);
        assert_eq!(z.c_linear, 0.0);
    }

    #[test]
    fn interior_solution_solves_stokes() {
        // finite-difference residual of -Delta v + grad p at interior points
        let sol = solve_interior_g1(&s_full()).unwrap();
        let h = 1e-4;
        for x in [V3::new(0.2, -0.1, 0.3), V3::new(-0.4, 0.25, 0.05)] {
            for c in 0..3 {
                let mut lap = -6.0 * sol.velocity(&x)[c];
                let mut gp = 0.0;
                for ax in 0..3 {
                    let mut e = V3::zeros();
                    e[ax] = h;
                    lap += sol.velocity(&(x + e))[c] + sol.velocity(&(x - e))[c];
                    if ax == c {
                        gp = (sol.pressure(&(x + e)) - sol.pressure(&(x - e))) / (2.0 * h);
                    }
                }
                lap /= h * h;
                assert!((-lap + gp).abs() < 1e-5, "Stokes residual {}", -lap + gp);
            }
            // incompressibility
            let j = sol.grad_velocity(&x);
            assert!(j.trace().abs() < 1e-12);
        }
    }

    #[test]
    fn traction_jump_matches_closed_form_and_scales() {
        let s = s_diag();
        let sol = solve_interior_g1(&s).unwrap();
        let n = V3::new(1.0, 0.0, 0.0);
        // exterior side at n = e1: (3/4 pi)(4 e1 - e1) = (9/4 pi) e1
        let ext = kernels::stress_stresslet(&n, &s).unwrap() * n;
        assert!((ext - V3::new(9.0 / (4.0 * PI), 0.0, 0.0)).norm() < 1e-12);
        // closed-form jump (15/8 pi) Sn - (105/16 pi)(n.Sn) n
        let j1 = traction_jump(&n, &s, 1.0, &sol).unwrap();
        let expect = s.apply(&n) * (15.0 / (8.0 * PI)) - n * (105.0 / (16.0 * PI));
        assert!((j1 - expect).norm() < 1e-10);
        let j2 = traction_jump(&n, &s, 0.5, &sol).unwrap();
        assert!((j2 - j1 * 8.0).norm() < 1e-9);
    }

    #[test]
    fn traction_has_zero_total_force() {
        let s = s_full();
        let sol = solve_interior_g1(&s).unwrap();
        let q = SphereQuadrature::new(12);
        let total = q.integrate_vec(|n| traction_jump(n, &s, 0.7, &sol).unwrap());
        assert!(total.norm() < 1e-10);
    }

    #[test]
    fn pairing_constant_field_vanishes() {
        let v = pair_with_s_eta(&|_x: &V3| Ok(V3::new(1.0, -2.0, 0.5)), &V3::zeros(), 0.3, &s_full())
            .unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn pairing_linear_field_gives_minus_s_contraction() {
        let s = s_full();
        let a = M3::new(0.3, -0.2, 0.5, 0.1, 0.7, -0.4, 0.2, 0.0, -0.6);
        let f = move |x: &V3| Ok(a * x);
        let expect = -s.matrix().transpose().dot(&((a + a.transpose()) / 2.0)) * 1.0;
        // the pairing sees only the symmetric part of the gradient
        for eta in [0.4, 0.2, 0.1] {
            let v = pair_with_s_eta(&f, &V3::new(0.3, 0.0, -0.1), eta, &s).unwrap();
            assert!((v - expect).abs() < 1e-9, "eta {eta}: {v} vs {expect}");
        }
    }

    #[test]
    fn pairing_with_g_s_gives_energy_constant() {
        let s = s_diag();
        let sol = solve_interior_g1(&s).unwrap();
        let e_star = energy_constant(&s, &sol);
        assert_relative_eq!(e_star, 15.0 / (16.0 * PI) * s.frob2(), epsilon = 1e-10);
        let f = move |x: &V3| kernels::stresslet_g(x, &s);
        for eta in [0.25, 0.5, 1.0] {
            let v = pair_with_s_eta(&f, &V3::zeros(), eta, &s).unwrap();
            assert_relative_eq!(v * eta.powi(3), e_star, epsilon = 1e-8);
        }
    }

    #[test]
    fn energy_constant_is_quadratic() {
        let s = s_full();
        let sol1 = solve_interior_g1(&s).unwrap();
        let sol2 = solve_interior_g1(&(s * 2.0)).unwrap();
        assert_relative_eq!(
            energy_constant(&(s * 2.0), &sol2),
            4.0 * energy_constant(&s, &sol1),
            epsilon = 1e-10
        );
        let z = solve_interior_g1(&StrainMatrix::zero()).unwrap();
        assert_eq!(energy_constant(&StrainMatrix::zero(), &z), 0.0);
    }

    #[test]
    fn psi_integrates_to_s_and_vanishes_outside() {
        let s = s_full();
        let sol = solve_interior_g1(&s).unwrap();
        for eta in [0.5, 1.0] {
            let total = psi_total(eta, &s, &sol).unwrap();
            assert!((total - s.matrix()).norm() < 1e-8, "eta {eta}");
        }
        let outside = psi_eta(&V3::new(0.9, 0.0, 0.0), 0.5, &s, &sol).unwrap();
        assert_eq!(outside, M3::zeros());
    }

    #[test]
    fn psi_is_divergence_free_inside() {
        let s = s_full();
        let sol = solve_interior_g1(&s).unwrap();
        let eta = 0.8;
        let h = 1e-4;
        for x in [V3::new(0.1, 0.2, -0.15), V3::new(-0.3, 0.05, 0.2)] {
            for j in 0..3 {
                let mut div = 0.0;
                for i in 0..3 {
                    let mut e = V3::zeros();
                    e[i] = h;
                    let hi = psi_eta(&(x + e), eta, &s, &sol).unwrap()[(i, j)];
                    let lo = psi_eta(&(x - e), eta, &s, &sol).unwrap()[(i, j)];
                    div += (hi - lo) / (2.0 * h);
                }
                assert!(div.abs() < 1e-7, "div Psi component {j}: {div}");
            }
        }
    }

    #[test]
    fn boundary_functional_of_sphere_solution() {
        let s = s_diag();
        let a = 1.3;
        let rad = crate::tensor::BallRadius::new(a).unwrap();
        let v = move |x: &V3| kernels::v_full(x, &s, rad);
        let sigma = move |x: &V3| kernels::stress_vs(x, &s, rad);
        let ii = quad_ii(&v, &sigma, a).unwrap();
        let expect = s.matrix() * (20.0 * PI / 3.0 * a.powi(3));
        assert!((ii - expect).norm() < 1e-8, "{ii} vs {expect}");
    }

    #[test]
    fn boundary_functional_of_rigid_rotation_vanishes() {
        let omega = V3::new(0.3, -0.2, 0.9);
        let v = move |x: &V3| Ok(omega.cross(x));
        let sigma = |_x: &V3| Ok(M3::zeros());
        let ii = quad_ii(&v, &sigma, 0.7).unwrap();
        assert!(ii.norm() < 1e-12);
    }

    #[test]
    fn boundary_functional_of_external_solution_vanishes_on_s() {
        // sphere solution centred away from a non-enclosing sphere is a
        // smooth Stokes solution inside it
        let s = s_diag();
        let sp = s_full();
        let c = V3::new(4.0, 0.0, 0.0);
        let rad = crate::tensor::BallRadius::new(1.0).unwrap();
        let v = move |x: &V3| kernels::v_full(&(x - c), &sp, rad);
        let sigma = move |x: &V3| kernels::stress_vs(&(x - c), &sp, rad);
        let ii = quad_ii(&v, &sigma, 1.0).unwrap();
        assert!(ii.dot(&s.matrix()).abs() < 1e-8, "{}", ii.dot(&s.matrix()));
    }

    #[test]
    fn eta_pairing_recovers_regularization_constant() {
        // <S^eta, G_{S,1} - G_S> -> -k(S, 1) as eta -> 0
        let s = s_diag();
        let p = EwaldParams::accurate();
        let f = move |x: &V3| {
            Ok(ewald::g_sl(x, &s, 1.0, &p)? - kernels::stresslet_g(x, &s)?)
        };
        let reg = ewald::regularization_constant(&s, 1.0, &p).unwrap();
        let v1 = pair_with_s_eta(&f, &V3::zeros(), 0.1, &s).unwrap();
        let v2 = pair_with_s_eta(&f, &V3::zeros(), 0.05, &s).unwrap();
        let richardson = (4.0 * v2 - v1) / 3.0;
        assert!(
            (richardson + reg).abs() < 1e-4,
            "richardson {richardson} vs -reg {}",
            -reg
        );
    }
}
