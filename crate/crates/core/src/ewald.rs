//! Ewald summation for the periodic stresslet Green function and the exact
//! periodic limit of V_N.
//!
//! Everything is computed on the unit cell and rescaled: with G_{S,L} the
//! L-periodic stresslet Green function,
//!   G_{S,L}(y) = L^{-2} G_{S,1}(y/L),   S del . G_{S,L}(y) = L^{-3} (S del . G_{S,1})(y/L).
//!
//! On the unit cell the vector field splits into scalar lattice sums,
//!   G_{S,1} = S grad Phi + S : (grad grad) grad Psi,
//! where Phi is the periodic Laplace Green function (Fourier coefficients
//! 1/(4 pi^2 k^2), zero mean) and Psi the periodic biharmonic one
//! (1/(16 pi^4 k^4)). Both are Ewald-split with screening parameter
//! kappa = 1/sigma; the screened real-space biharmonic kernel is
//!   rho(r) = exp(-kappa^2 r^2) / (8 pi kappa sqrt(pi)) - (r / 8 pi) erfc(kappa r).

use crate::error::{Error, Result};
use crate::kernels;
use crate::tensor::{StrainMatrix, V3};
use statrs::function::erf::erfc;
use std::f64::consts::PI;
use std::sync::OnceLock;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Ewald splitting parameters. `sigma` is the Gaussian splitting length as a
/// fraction of the cell size L and must lie in [0.2, 0.5]; the cutoffs grow
/// logarithmically with the requested tail tolerance.
#[derive(Clone, Copy, Debug)]
pub struct EwaldParams {
    pub sigma: f64,
    pub k_max: i64,
    pub r_max: i64,
}

impl EwaldParams {
    pub fn with_sigma(sigma: f64, tol: f64) -> Result<Self> {
        if !(0.2..=0.5).contains(&sigma) {
            return Err(Error::validation("sigma must lie in [0.2, 0.5] cells"));
        }
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::validation("tolerance must lie in (0, 1)"));
        }
        let q = (1.0 / tol).ln().sqrt();
        Ok(EwaldParams {
            sigma,
            k_max: (q / (PI * sigma)).ceil() as i64 + 1,
            r_max: (sigma * q).ceil() as i64 + 1,
        })
    }

    /// Default high-accuracy splitting.
    pub fn accurate() -> Self {
        Self::with_sigma(0.3, 1e-14).expect("valid defaults")
    }

    /// Looser splitting for statistical estimators.
    pub fn fast() -> Self {
        Self::with_sigma(0.35, 1e-10).expect("valid defaults")
    }
}

/// Unit-cell Ewald evaluator.
pub(crate) struct UnitEwald {
    kappa: f64,
    k_max: i64,
    r_max: i64,
}

fn wrap_unit(y: &V3) -> V3 {
    V3::new(
        y.x - (y.x + 0.5).floor(),
        y.y - (y.y + 0.5).floor(),
        y.z - (y.z + 0.5).floor(),
    )
}

impl UnitEwald {
    pub(crate) fn new(p: &EwaldParams) -> Self {
        UnitEwald {
            kappa: 1.0 / p.sigma,
            k_max: p.k_max,
            r_max: p.r_max,
        }
    }

    fn gaussian(&self, r: f64) -> f64 {
        // E(r) = (2 kappa / sqrt(pi)) exp(-kappa^2 r^2) = -d/dr erfc(kappa r)
        2.0 * self.kappa / PI.sqrt() * (-self.kappa * self.kappa * r * r).exp()
    }

    /// Screened biharmonic kernel value.
    fn rho(&self, r: f64) -> f64 {
        let k = self.kappa;
        (-k * k * r * r).exp() / (8.0 * PI * k * PI.sqrt()) - r / (8.0 * PI) * erfc(k * r)
    }

    /// Periodic Laplace Green function on the unit cell (zero mean).
    fn laplace(&self, y: &V3) -> Result<f64> {
        let yw = wrap_unit(y);
        if yw.norm() < 1e-12 {
            return Err(Error::SingularPoint);
        }
        let k = self.kappa;
        let mut real = 0.0;
        self.for_images(|n| {
            let r = (yw + n).norm();
            if k * r < 8.0 {
                real += erfc(k * r) / (4.0 * PI * r);
            }
        });
        let mut four = 0.0;
        self.for_modes(|kv, k2| {
            let t = PI * PI * k2 / (k * k);
            four += (-t).exp() / (4.0 * PI * PI * k2) * (2.0 * PI * kv.dot(&yw)).cos();
        });
        Ok(real + four - 1.0 / (4.0 * k * k))
    }

    /// Finite part of the Laplace Green function at the origin:
    /// lim_{y->0} [ Phi(y) - 1/(4 pi |y|) ] = -c1 / (4 pi).
    fn laplace_origin_finite_part(&self) -> f64 {
        let k = self.kappa;
        let mut real = 0.0;
        self.for_images(|n| {
            let r = n.norm();
            if r > 0.5 && k * r < 8.0 {
                real += erfc(k * r) / (4.0 * PI * r);
            }
        });
        let mut four = 0.0;
        self.for_modes(|_, k2| {
            let t = PI * PI * k2 / (k * k);
            four += (-t).exp() / (4.0 * PI * PI * k2);
        });
        real + four - 1.0 / (4.0 * k * k) - k / (2.0 * PI * PI.sqrt())
    }

    /// Periodic biharmonic Green function on the unit cell (zero mean).
    /// Continuous at lattice points.
    fn biharm(&self, y: &V3) -> f64 {
        let yw = wrap_unit(y);
        let k = self.kappa;
        let mut real = 0.0;
        self.for_images(|n| {
            real += self.rho((yw + n).norm());
        });
        let mut four = 0.0;
        self.for_modes(|kv, k2| {
            let t = PI * PI * k2 / (k * k);
            four += (1.0 + t) * (-t).exp() / (16.0 * PI.powi(4) * k2 * k2)
                * (2.0 * PI * kv.dot(&yw)).cos();
        });
        real + four - 1.0 / (32.0 * k.powi(4))
    }

    /// Unit-cell periodic stresslet Green function.
    fn g_s1(&self, y: &V3, s: &StrainMatrix) -> Result<V3> {
        let yw = wrap_unit(y);
        if yw.norm() < 1e-12 {
            return Err(Error::SingularPoint);
        }
        let mut real = V3::zeros();
        self.for_images(|n| {
            real += self.real_g(&(yw + n), s);
        });
        let mut four = V3::zeros();
        self.for_modes(|kv, k2| {
            let sk = s.apply(&kv);
            let ksk = sk.dot(&kv);
            let t = PI * PI * k2 / (self.kappa * self.kappa);
            let damp = (-t).exp();
            let v = (sk - kv * (ksk * (1.0 + t) / k2)) * (damp / (2.0 * PI * k2));
            four -= v * (2.0 * PI * kv.dot(&yw)).sin();
        });
        Ok(real + four)
    }

    /// Unit-cell S del . G_{S,1}.
    fn div_sg1(&self, y: &V3, s: &StrainMatrix) -> Result<f64> {
        let yw = wrap_unit(y);
        if yw.norm() < 1e-12 {
            return Err(Error::SingularPoint);
        }
        let mut real = 0.0;
        self.for_images(|n| {
            real += self.real_div_sg(&(yw + n), s);
        });
        let mut four = 0.0;
        self.for_modes(|kv, k2| {
            four += self.fourier_coeff_div_sg(&kv, k2, s) * (2.0 * PI * kv.dot(&yw)).cos();
        });
        Ok(real + four)
    }

    /// Damped Fourier coefficient of S del . G_{S,1} at integer mode k.
    pub(crate) fn fourier_coeff_div_sg(&self, kv: &V3, k2: f64, s: &StrainMatrix) -> f64 {
        let sk = s.apply(kv);
        let ksk = sk.dot(kv);
        let t = PI * PI * k2 / (self.kappa * self.kappa);
        (-t).exp() * (-sk.norm_squared() / k2 + ksk * ksk * (1.0 + t) / (k2 * k2))
    }

    /// Real-space (screened) part of the unit-cell stresslet Green function
    /// at a single image: phi'(r) S xh + C3(rho) (xh.S xh) xh + 2 D3(rho) S xh.
    fn real_g(&self, x: &V3, s: &StrainMatrix) -> V3 {
        let r = x.norm();
        if self.kappa * r > 8.0 {
            return V3::zeros();
        }
        let (phi1, _) = self.phi_derivs(r);
        let (rho1, rho2, rho3, _) = self.rho_derivs(r);
        let c3 = rho3 - 3.0 * rho2 / r + 3.0 * rho1 / (r * r);
        let d3 = rho2 / r - rho1 / (r * r);
        let xh = x / r;
        let sxh = s.apply(&xh);
        let sxx = sxh.dot(&xh);
        sxh * (phi1 + 2.0 * d3) + xh * (c3 * sxx)
    }

    /// Real-space part of S del . G_{S,1} at a single image:
    /// (S^2) : grad^2 phi + (S tensor S) :: grad^4 rho for radial phi, rho.
    pub(crate) fn real_div_sg(&self, x: &V3, s: &StrainMatrix) -> f64 {
        let r = x.norm();
        if self.kappa * r > 8.0 {
            return 0.0;
        }
        let r2 = r * r;
        let (phi1, phi2) = self.phi_derivs(r);
        let (rho1, rho2, rho3, rho4) = self.rho_derivs(r);
        let xh = x / r;
        let sxh = s.apply(&xh);
        let sxx = sxh.dot(&xh);
        let s2 = sxh.norm_squared();
        let sf2 = s.frob2();
        let h2 = (phi2 - phi1 / r) * s2 + phi1 / r * sf2;
        let e4 = rho4 - 6.0 * rho3 / r + 15.0 * rho2 / r2 - 15.0 * rho1 / (r2 * r);
        let f4 = rho3 / r - 3.0 * rho2 / r2 + 3.0 * rho1 / (r2 * r);
        let g4 = rho2 / r2 - rho1 / (r2 * r);
        h2 + e4 * sxx * sxx + 4.0 * f4 * s2 + 2.0 * g4 * sf2
    }

    /// First two derivatives of phi(r) = erfc(kappa r) / (4 pi r).
    fn phi_derivs(&self, r: f64) -> (f64, f64) {
        let k = self.kappa;
        let e = self.gaussian(r);
        let ec = erfc(k * r);
        let r2 = r * r;
        let phi1 = -(ec / r2 + e / r) / (4.0 * PI);
        let phi2 = (2.0 * ec / (r2 * r) + 2.0 * e / r2 + 2.0 * k * k * e) / (4.0 * PI);
        (phi1, phi2)
    }

    /// Derivatives 1..4 of rho(r); rho'(r) = -erfc(kappa r)/(8 pi).
    fn rho_derivs(&self, r: f64) -> (f64, f64, f64, f64) {
        let k = self.kappa;
        let e = self.gaussian(r);
        let rho1 = -erfc(k * r) / (8.0 * PI);
        let rho2 = e / (8.0 * PI);
        let rho3 = -2.0 * k * k * r * e / (8.0 * PI);
        let rho4 = 2.0 * k * k * e * (2.0 * k * k * r * r - 1.0) / (8.0 * PI);
        (rho1, rho2, rho3, rho4)
    }

    fn for_images(&self, mut f: impl FnMut(V3)) {
        for nx in -self.r_max..=self.r_max {
            for ny in -self.r_max..=self.r_max {
                for nz in -self.r_max..=self.r_max {
                    f(V3::new(nx as f64, ny as f64, nz as f64));
                }
            }
        }
    }

    fn for_modes(&self, mut f: impl FnMut(V3, f64)) {
        for kx in -self.k_max..=self.k_max {
            for ky in -self.k_max..=self.k_max {
                for kz in -self.k_max..=self.k_max {
                    if kx == 0 && ky == 0 && kz == 0 {
                        continue;
                    }
                    let kv = V3::new(kx as f64, ky as f64, kz as f64);
                    f(kv, kv.norm_squared());
                }
            }
        }
    }
}

/// Periodic Laplace Green function (zero mean): sum_{k != 0}
/// e^{2 pi i k.y / L} / (4 pi^2 |k|^2) for L = 1, rescaled as (1/L) Phi(y/L).
pub fn periodic_laplace_green(y: &V3, l: f64, params: &EwaldParams) -> Result<f64> {
    check_cell(l)?;
    Ok(UnitEwald::new(params).laplace(&(y / l))? / l)
}

/// Periodic biharmonic Green function (zero mean), rescaled as L Psi(y/L).
pub fn periodic_biharmonic_green(y: &V3, l: f64, params: &EwaldParams) -> Result<f64> {
    check_cell(l)?;
    Ok(UnitEwald::new(params).biharm(&(y / l)) * l)
}

/// L-periodic stresslet Green function G_{S,L}.
pub fn g_sl(y: &V3, s: &StrainMatrix, l: f64, params: &EwaldParams) -> Result<V3> {
    check_cell(l)?;
    Ok(UnitEwald::new(params).g_s1(&(y / l), s)? / (l * l))
}

/// S del . G_{S,L}.
pub fn div_sg_l(y: &V3, s: &StrainMatrix, l: f64, params: &EwaldParams) -> Result<f64> {
    check_cell(l)?;
    Ok(UnitEwald::new(params).div_sg1(&(y / l), s)? / l.powi(3))
}

fn check_cell(l: f64) -> Result<()> {
    if l.is_finite() && l > 0.0 {
        Ok(())
    } else {
        Err(Error::validation("cell size must be positive"))
    }
}

/// Fourier coefficient of G_{S,L} at integer mode k:
/// Ghat(k) = (i / (2 pi L^2 |k|^2)) (Sk - (Sk.k) k / |k|^2).
/// Returned as the real vector multiplying i.
pub fn g_sl_fourier_coeff(k: [i64; 3], s: &StrainMatrix, l: f64) -> Result<V3> {
    check_cell(l)?;
    if k == [0, 0, 0] {
        return Err(Error::validation("the zero mode is excluded"));
    }
    let kv = V3::new(k[0] as f64, k[1] as f64, k[2] as f64);
    let k2 = kv.norm_squared();
    let sk = s.apply(&kv);
    Ok((sk - kv * (sk.dot(&kv) / k2)) / (2.0 * PI * l * l * k2))
}

/// Polynomial extrapolation to t = 0 through the points (ts[i], vs[i]).
fn neville(ts: &[f64], vs: &[f64]) -> f64 {
    let mut v = vs.to_vec();
    let n = v.len();
    for m in 1..n {
        for i in 0..(n - m) {
            v[i] = (ts[i] * v[i + 1] - ts[i + m] * v[i]) / (ts[i] - ts[i + m]);
        }
    }
    v[0]
}

/// Slow oracle: Gaussian-damped direct Fourier sum, Richardson-extrapolated
/// in the damping parameter (the expansion terminates for these kernels, so
/// three levels reach machine-level accuracy away from the lattice).
pub fn div_sg_l_fourier_oracle(y: &V3, s: &StrainMatrix, l: f64) -> Result<f64> {
    check_cell(l)?;
    let yu = wrap_unit(&(y / l));
    if yu.norm() < 1e-12 {
        return Err(Error::SingularPoint);
    }
    let zetas = [0.15, 0.10, 0.05];
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for zeta in zetas {
        vs.push(damped_sum(&yu, zeta, |kv, k2| {
            let sk = s.apply(&kv);
            let ksk = sk.dot(&kv);
            -(sk.norm_squared() - ksk * ksk / k2) / k2
        }));
        ts.push(zeta * zeta);
    }
    Ok(neville(&ts, &vs) / l.powi(3))
}

/// Slow oracle for the periodic Laplace Green function.
pub fn laplace_green_fourier_oracle(y: &V3, l: f64) -> Result<f64> {
    check_cell(l)?;
    let yu = wrap_unit(&(y / l));
    if yu.norm() < 1e-12 {
        return Err(Error::SingularPoint);
    }
    let zetas = [0.15, 0.10, 0.05];
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for zeta in zetas {
        vs.push(damped_sum(&yu, zeta, |_, k2| 1.0 / (4.0 * PI * PI * k2)));
        ts.push(zeta * zeta);
    }
    Ok(neville(&ts, &vs) / l)
}

fn damped_sum(yu: &V3, zeta: f64, coeff: impl Fn(V3, f64) -> f64 + Sync) -> f64 {
    let k_max = (6.1 / zeta).ceil() as i64;
    let slice = |kx: i64| -> f64 {
        let mut acc = 0.0;
        for ky in -k_max..=k_max {
            for kz in -k_max..=k_max {
                if kx == 0 && ky == 0 && kz == 0 {
                    continue;
                }
                let kv = V3::new(kx as f64, ky as f64, kz as f64);
                let k2 = kv.norm_squared();
                acc += coeff(kv, k2)
                    * (-zeta * zeta * k2).exp()
                    * (2.0 * PI * kv.dot(yu)).cos();
            }
        }
        acc
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<f64> = (-k_max..=k_max).into_par_iter().map(slice).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<f64> = (-k_max..=k_max).map(slice).collect();
    parts.iter().sum()
}

/// Constants of the cubic-lattice sums.
#[derive(Clone, Copy, Debug)]
pub struct CubicConstants {
    /// Coefficient of the anisotropic quartic P(y) in the near-origin
    /// expansion of the biharmonic lattice sum (approx -0.046450).
    pub a: f64,
    /// alpha = (5/2)(1 - 60 a): diagonal coefficient of the quadratic form
    /// giving the simple-cubic limit of V_N.
    pub alpha: f64,
    /// beta = (5/2)(1 + 40 a): off-diagonal coefficient.
    pub beta: f64,
    /// Isotropic expansion constants of the Laplace / biharmonic sums.
    pub c1: f64,
    pub c2: f64,
    /// Largest absolute residual of the least-squares fit.
    pub fit_residual: f64,
}

/// The anisotropic quartic of the cubic lattice,
/// P(y) = (4 pi / 3) (|y|^4 - 5 (y1^2 y2^2 + y1^2 y3^2 + y2^2 y3^2));
/// a harmonic polynomial with zero angular mean.
pub fn cubic_quartic_p(y: &V3) -> f64 {
    let r2 = y.norm_squared();
    let e2 = y.x * y.x * y.y * y.y + y.x * y.x * y.z * y.z + y.y * y.y * y.z * y.z;
    4.0 * PI / 3.0 * (r2 * r2 - 5.0 * e2)
}

/// Compute (a, alpha, beta) for the simple-cubic lattice, plus the isotropic
/// expansion constants c1, c2 of the near-origin expansion
///   -4 pi Psi(y) = |y|/2 - c2 - c1 |y|^2/6 + pi |y|^4/30 + a P(y) + O(|y|^6).
/// The quartic coefficient is estimated two ways: a least-squares fit of the
/// expansion over a ball around the origin (with degree-6 cubic-invariant
/// nuisance terms; sample radii below 0.1), and Richardson extrapolation of
/// the lattice-kernel regularisation constant, which is sharper and supplies
/// the reported values. The routes must agree to 1e-6.
pub fn cubic_constants(params: &EwaldParams) -> Result<CubicConstants> {
    let ew = UnitEwald::new(params);
    let c1 = -4.0 * PI * ew.laplace_origin_finite_part();
    let c2 = 4.0 * PI * ew.biharm(&V3::zeros());

    // deterministic, well-spread sample directions
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5EED);
    let mut dirs = Vec::new();
    while dirs.len() < 32 {
        let v = V3::new(
            rand::Rng::gen::<f64>(&mut rng) * 2.0 - 1.0,
            rand::Rng::gen::<f64>(&mut rng) * 2.0 - 1.0,
            rand::Rng::gen::<f64>(&mut rng) * 2.0 - 1.0,
        );
        let n = v.norm();
        if (0.3..=1.0).contains(&n) {
            dirs.push(v / n);
        }
    }
    let radii = [0.02, 0.03, 0.04, 0.05, 0.06];

    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for r in radii {
        for d in &dirs {
            let y = d * r;
            let psi = ew.biharm(&y);
            let r2 = y.norm_squared();
            let resid =
                -4.0 * PI * psi - (r / 2.0 - c2 - c1 * r2 / 6.0 + PI * r2 * r2 / 30.0);
            let e2 = y.x * y.x * y.y * y.y + y.x * y.x * y.z * y.z + y.y * y.y * y.z * y.z;
            rows.push([
                cubic_quartic_p(&y),
                r2 * r2 * r2,
                r2 * e2,
                y.x * y.x * y.y * y.y * y.z * y.z,
            ]);
            rhs.push(resid);
        }
    }
    let m = nalgebra::DMatrix::from_fn(rows.len(), 4, |i, j| rows[i][j]);
    let b = nalgebra::DVector::from_vec(rhs.clone());
    let svd = m.clone().svd(true, true);
    let x = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::accuracy(format!("quartic fit failed: {e}")))?;
    let fit = &m * &x;
    let fit_residual = (0..rhs.len())
        .map(|i| (rhs[i] - fit[i]).abs())
        .fold(0.0f64, f64::max);
    if fit_residual > 1e-8 {
        return Err(Error::accuracy(format!(
            "quartic fit residual {fit_residual:.3e} exceeds 1e-8"
        )));
    }
    let a_fit = x[0];

    // Production values come from the sharper route: Richardson extrapolation
    // of the lattice-kernel regularisation constant along a generic ray,
    //   alpha = (25/2) k(diag(1,-1,0), 1) / 2,  beta = (25/2) k(offdiag, 1) / 2,
    // with a recovered from alpha = (5/2)(1 - 60 a), beta = (5/2)(1 + 40 a).
    // The quartic fit (bias O(r^4) from the truncated expansion) serves as an
    // independent cross-check of the same constant.
    let s_diag = StrainMatrix::from_diag(1.0, -1.0, 0.0);
    let s_off = StrainMatrix::from_upper(0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
    let alpha = 6.25 * reg_unit_richardson(&s_diag, params)?;
    let beta = 6.25 * reg_unit_richardson(&s_off, params)?;
    let a_alpha = (2.5 - alpha) / 150.0;
    let a_beta = (beta - 2.5) / 100.0;
    if (a_alpha - a_beta).abs() > 1e-9 {
        return Err(Error::accuracy(format!(
            "cubic quartic coefficient routes disagree: {a_alpha} vs {a_beta}"
        )));
    }
    let a = 0.5 * (a_alpha + a_beta);
    if (a - a_fit).abs() > 1e-6 {
        return Err(Error::accuracy(format!(
            "quartic-fit coefficient {a_fit} far from extrapolated value {a}"
        )));
    }
    Ok(CubicConstants {
        a,
        alpha,
        beta,
        c1,
        c2,
        fit_residual,
    })
}

fn cubic_constants_cached() -> Result<CubicConstants> {
    static CACHE: OnceLock<std::result::Result<CubicConstants, String>> = OnceLock::new();
    CACHE
        .get_or_init(|| cubic_constants(&EwaldParams::accurate()).map_err(|e| e.to_string()))
        .clone()
        .map_err(Error::Accuracy)
}

/// Regularisation constant k(S, L) = lim_{y -> 0} S del . (G_{S,L} - G_S)(y).
///
/// Production route: Richardson extrapolation (even powers) along a generic
/// ray; cross-checked against the closed form
///   k(S, 1) = |S|^2/5 - 12 a sum_i S_ii^2 + 8 a sum_{i != j} S_ij^2,
/// and scaled by L^-3.
fn reg_unit_richardson(s: &StrainMatrix, params: &EwaldParams) -> Result<f64> {
    let dir = V3::new(1.0, 2.0, 3.0).normalize();
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for t in [0.12, 0.06, 0.03, 0.015] {
        let y = dir * t;
        let v = div_sg_l(&y, s, 1.0, params)? - kernels::div_sg(&y, s)?;
        ts.push(t * t);
        vs.push(v);
    }
    Ok(neville(&ts, &vs))
}

pub fn regularization_constant(s: &StrainMatrix, l: f64, params: &EwaldParams) -> Result<f64> {
    check_cell(l)?;
    if s.is_zero() {
        return Ok(0.0);
    }
    let unit = reg_unit_richardson(s, params)?;

    let cc = cubic_constants_cached()?;
    let closed =
        s.frob2() / 5.0 - 12.0 * cc.a * s.diag_sq_sum() + 8.0 * cc.a * s.offdiag_sq_sum();
    if (unit - closed).abs() > 1e-6 * closed.abs().max(s.frob2()) {
        return Err(Error::accuracy(format!(
            "regularisation constant routes disagree: {unit} vs {closed}"
        )));
    }
    Ok(unit / l.powi(3))
}

/// A periodicity cell: cubic cell of side `l` with `basis` offsets in [0, l)^3,
/// distinct modulo the lattice.
#[derive(Clone, Debug)]
pub struct CellSpec {
    pub l: f64,
    pub basis: Vec<V3>,
}

impl CellSpec {
    pub fn new(l: f64, basis: Vec<V3>) -> Result<Self> {
        check_cell(l)?;
        if basis.is_empty() {
            return Err(Error::validation("basis must be non-empty"));
        }
        for a in &basis {
            for i in 0..3 {
                if a[i] < 0.0 || a[i] >= l {
                    return Err(Error::validation("basis offsets must lie in [0, l)^3"));
                }
            }
        }
        for (i, a) in basis.iter().enumerate() {
            for b in basis.iter().skip(i + 1) {
                let mut best = f64::INFINITY;
                for nx in -1..=1 {
                    for ny in -1..=1 {
                        for nz in -1..=1 {
                            best = best
                                .min((a - b + V3::new(nx as f64, ny as f64, nz as f64) * l).norm());
                        }
                    }
                }
                if best < 1e-9 * l {
                    return Err(Error::validation(
                        "basis points must be distinct modulo the lattice",
                    ));
                }
            }
        }
        Ok(CellSpec { l, basis })
    }
}

/// Exact limit of V_N for the periodised point set (cell L, M basis points):
///   lim V_N = (25 L^3 / 2 M^2) [ sum_{i != j} S del.G_{S,L}(a_i - a_j) + M k(S, L) ].
pub fn limit_periodic(cell: &CellSpec, s: &StrainMatrix, params: &EwaldParams) -> Result<f64> {
    let m = cell.basis.len();
    let mut pair = 0.0;
    for (i, a) in cell.basis.iter().enumerate() {
        for (j, b) in cell.basis.iter().enumerate() {
            if i != j {
                pair += div_sg_l(&(a - b), s, cell.l, params)?;
            }
        }
    }
    let reg = regularization_constant(s, cell.l, params)?;
    Ok(25.0 * cell.l.powi(3) / (2.0 * (m * m) as f64) * (pair + m as f64 * reg))
}

/// Self-check: two well-separated splitting parameters must agree.
pub fn sigma_invariance_check(l: f64, s: &StrainMatrix) -> Result<()> {
    let p1 = EwaldParams::with_sigma(0.25, 1e-13)?;
    let p2 = EwaldParams::with_sigma(0.4, 1e-13)?;
    let probes = [
        V3::new(0.31, 0.11, -0.05) * l,
        V3::new(-0.17, 0.42, 0.23) * l,
    ];
    for y in probes {
        let scale = 1.0 / l.powi(3);
        if (periodic_laplace_green(&y, l, &p1)? - periodic_laplace_green(&y, l, &p2)?).abs()
            > 1e-9 / l
        {
            return Err(Error::accuracy("Laplace Ewald sum depends on sigma"));
        }
        if (periodic_biharmonic_green(&y, l, &p1)? - periodic_biharmonic_green(&y, l, &p2)?).abs()
            > 1e-9 * l
        {
            return Err(Error::accuracy("biharmonic Ewald sum depends on sigma"));
        }
        if (g_sl(&y, s, l, &p1)? - g_sl(&y, s, l, &p2)?).norm() > 1e-9 / (l * l) {
            return Err(Error::accuracy("stresslet Ewald sum depends on sigma"));
        }
        if (div_sg_l(&y, s, l, &p1)? - div_sg_l(&y, s, l, &p2)?).abs() > 1e-9 * scale {
            return Err(Error::accuracy("S div Ewald sum depends on sigma"));
        }
    }
    Ok(())
}

/// sum_{z != z'} S del . G_{S,L}(z - z') over a finite point set, using the
/// structure-factor form of the Fourier part (O((M + pairs) K) instead of
/// O(M^2 K)). Matches the direct double sum to round-off.
pub fn pair_sum_div_sg_periodic(
    points: &[V3],
    l: f64,
    s: &StrainMatrix,
    params: &EwaldParams,
) -> Result<f64> {
    check_cell(l)?;
    let ew = UnitEwald::new(params);
    let unit_pts: Vec<V3> = points.iter().map(|z| z / l).collect();
    let m = unit_pts.len() as f64;

    // Fourier part: sum_k c(k) (|sum_z e^{2 pi i k.z}|^2 - M)
    let slice = |kx: i64| -> f64 {
        let mut acc = 0.0;
        for ky in -ew.k_max..=ew.k_max {
            for kz in -ew.k_max..=ew.k_max {
                if kx == 0 && ky == 0 && kz == 0 {
                    continue;
                }
                let kv = V3::new(kx as f64, ky as f64, kz as f64);
                let k2 = kv.norm_squared();
                let c = ew.fourier_coeff_div_sg(&kv, k2, s);
                let mut re = 0.0;
                let mut im = 0.0;
                for p in &unit_pts {
                    let th = 2.0 * PI * kv.dot(p);
                    re += th.cos();
                    im += th.sin();
                }
                acc += c * (re * re + im * im - m);
            }
        }
        acc
    };
    #[cfg(feature = "parallel")]
    let four: f64 = (-ew.k_max..=ew.k_max)
        .into_par_iter()
        .map(slice)
        .collect::<Vec<_>>()
        .iter()
        .sum();
    #[cfg(not(feature = "parallel"))]
    let four: f64 = (-ew.k_max..=ew.k_max).map(slice).sum();

    // Real part over wrapped pair differences and their nearby images.
    let row = |i: usize| -> f64 {
        let mut acc = 0.0;
        for j in (i + 1)..unit_pts.len() {
            let d = wrap_unit(&(unit_pts[i] - unit_pts[j]));
            if d.norm() < 1e-12 {
                return f64::NAN; // coincident points modulo the lattice
            }
            let mut term = 0.0;
            ew.for_images(|n| term += ew.real_div_sg(&(d + n), s));
            acc += 2.0 * term;
        }
        acc
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<f64> = (0..unit_pts.len()).into_par_iter().map(row).collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<f64> = (0..unit_pts.len()).map(row).collect();
    let real: f64 = rows.iter().sum();
    if real.is_nan() {
        return Err(Error::SingularPoint);
    }
    Ok((four + real) / l.powi(3))
}
