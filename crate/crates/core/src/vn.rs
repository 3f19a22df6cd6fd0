//! The finite-N interaction functional V_N, its mean-field background term,
//! the method-of-reflections operator, and the approximate-energy identities.

use crate::domain::DomainO;
use crate::error::{Error, Result};
use crate::kernels;
use crate::points::PointConfiguration;
use crate::quad::gauss_legendre_on;
use crate::tensor::{BallRadius, StrainMatrix, V3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Compensated (Kahan) accumulator.
#[derive(Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
    pub fn value(&self) -> f64 {
        self.sum
    }
}

fn row_sum(points: &[V3], i: usize, s: &StrainMatrix) -> Result<f64> {
    let mut acc = Kahan::default();
    let xi = points[i];
    for (j, xj) in points.iter().enumerate() {
        if j != i {
            acc.add(kernels::g_s(&(xi - xj), s)?);
        }
    }
    Ok(acc.value())
}

/// (1/N^2) sum_{i != j} g_S(x_i - x_j), with compensated summation and a
/// fixed reduction order (row sums combined in index order), so the result
/// does not depend on the number of worker threads.
pub fn pair_sum(cfg: &PointConfiguration, s: &StrainMatrix) -> Result<f64> {
    let points = cfg.points();
    let n = points.len();
    if n == 0 {
        return Err(Error::validation("empty configuration"));
    }
    let rows = pair_sum_rows(points, s)?;
    let mut total = Kahan::default();
    for r in rows {
        total.add(r);
    }
    Ok(total.value() / (n as f64 * n as f64))
}

#[cfg(feature = "parallel")]
fn pair_sum_rows(points: &[V3], s: &StrainMatrix) -> Result<Vec<f64>> {
    (0..points.len())
        .into_par_iter()
        .map(|i| row_sum(points, i, s))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn pair_sum_rows(points: &[V3], s: &StrainMatrix) -> Result<Vec<f64>> {
    (0..points.len()).map(|i| row_sum(points, i, s)).collect()
}

/// Sequential reference implementation (same reduction order as `pair_sum`).
pub fn pair_sum_sequential(cfg: &PointConfiguration, s: &StrainMatrix) -> Result<f64> {
    let points = cfg.points();
    let n = points.len();
    if n == 0 {
        return Err(Error::validation("empty configuration"));
    }
    let mut total = Kahan::default();
    for i in 0..n {
        total.add(row_sum(points, i, s)?);
    }
    Ok(total.value() / (n as f64 * n as f64))
}

/// Naive (uncompensated) sum, kept as a stability reference for tests.
pub fn pair_sum_naive(cfg: &PointConfiguration, s: &StrainMatrix) -> Result<f64> {
    let points = cfg.points();
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += kernels::g_s(&(points[i] - points[j]), s)?;
            }
        }
    }
    Ok(total / (n as f64 * n as f64))
}

/// Background double integral int int g_S(x - y) f(x) f(y) dx dy with
/// f = 1_O / |O|.
///
/// g_S is the distributional derivative of the degree -2 homogeneous field
/// -(S:(x tensor x)) x / |x|^5 contracted with S.  Differentiating a degree -2
/// homogeneous field produces, besides the pointwise (principal-value) part,
/// a Dirac mass at the origin; here its coefficient is
///   c = -int_{S^2} (n.Sn)^2 dOmega = -(8 pi / 15) |S|^2,
/// matching the nonzero angular mean of the Fourier symbol
///   ghat(k) = -(8 pi / 3) (|S n|^2 - (n.Sn)^2),  n = k/|k|.
/// The Dirac part contributes c int f^2 = c / |O|; the principal-value part
/// (zero angular mean) is a conditionally convergent integral that vanishes
/// for a ball and is a smooth sphere integral for a cube.  The total is
/// negative for S != 0 and scales as 1/|O|.
pub fn background_integral(o: &DomainO, s: &StrainMatrix) -> Result<f64> {
    if s.is_zero() {
        return Ok(0.0);
    }
    match o {
        DomainO::Ball { radius, .. } => background_ball(*radius, s),
        DomainO::Cube { side, .. } => background_cube(*side, s),
    }
}

/// Ball: the principal-value part integrates to zero against the radial
/// self-overlap of the ball, so the whole value is the Dirac term
/// -(8 pi / 15)|S|^2 / |O|.  Computed here spectrally as an independent
/// route: |fhat| is radial, so the angular average of the symbol factors out,
///   int_{S^2} (|Sn|^2 - (n.Sn)^2) dOmega = (4 pi / 5) |S|^2,
/// leaving a 1-D radial quadrature of |fhat(k)|^2 k^2 with
/// fhat(k) = 3 (sin u - u cos u)/u^3, u = k R.
fn background_ball(radius: f64, s: &StrainMatrix) -> Result<f64> {
    let j_coarse = ball_radial_integral(8, 800.0);
    let j = ball_radial_integral(16, 1600.0);
    if (j - j_coarse).abs() > 1e-6 * j.abs() {
        return Err(Error::accuracy(
            "ball background radial quadrature did not stabilise",
        ));
    }
    // Q = -(8 pi/3) (2 pi)^{-3} (4 pi/5) |S|^2 * J / R^3
    Ok(-4.0 / (15.0 * PI) * s.frob2() * j / radius.powi(3))
}

/// J = int_0^inf 9 (sin u - u cos u)^2 / u^4 du  (= 3 pi / 2),
/// by Gauss panels up to U plus the oscillatory tail expansion
///   9/(2U) - 9 sin(2U)/(4 U^2) + O(U^-3).
fn ball_radial_integral(nodes_per_panel: usize, u_max: f64) -> f64 {
    let integrand = |u: f64| {
        if u < 1e-4 {
            // series: 3(sin u - u cos u)/u^3 -> 1 - u^2/10 + ...; squared * u^2 / 9 ... keep leading
            let f = 1.0 - u * u / 10.0;
            f * f * u * u
        } else {
            let f = 3.0 * (u.sin() - u * u.cos()) / (u * u * u);
            f * f * u * u
        }
    };
    let n_panels = (u_max / PI).ceil() as usize;
    let h = u_max / n_panels as f64;
    let mut acc = Kahan::default();
    for p in 0..n_panels {
        let (xs, ws) = gauss_legendre_on(nodes_per_panel, p as f64 * h, (p + 1) as f64 * h);
        for (x, w) in xs.iter().zip(&ws) {
            acc.add(w * integrand(*x));
        }
    }
    acc.value() + 9.0 / (2.0 * u_max) - 9.0 * (2.0 * u_max).sin() / (4.0 * u_max * u_max)
}

/// Cube: the principal-value integral of g_S against the cube self-overlap
/// function w reduces to a smooth integral over the sphere,
///   Q_pv = (1/side^3) int_{S^2} g_S(n) J(n) dOmega,
/// with J(n) assembled from elementary symmetric functions of |n_i| (the
/// radial integral of the piecewise-cubic overlap profile is analytic; the
/// zero angular mean of the principal-value part removes the regularisation
/// constant).  The Dirac part of g_S adds -(8 pi / 15)|S|^2 / side^3.
fn background_cube(side: f64, s: &StrainMatrix) -> Result<f64> {
    let coarse = cube_sphere_integral(s, 16);
    let fine = cube_sphere_integral(s, 32);
    if (fine - coarse).abs() > 1e-6 * fine.abs().max(1e-30) {
        return Err(Error::accuracy(
            "cube background angular quadrature did not stabilise",
        ));
    }
    Ok((fine - 8.0 * PI / 15.0 * s.frob2()) / side.powi(3))
}

fn cube_j_factor(n: &V3) -> f64 {
    let a = [n.x.abs(), n.y.abs(), n.z.abs()];
    let m = a[0].max(a[1]).max(a[2]);
    let e1 = a[0] + a[1] + a[2];
    let e2 = a[0] * a[1] + a[0] * a[2] + a[1] * a[2];
    let e3 = a[0] * a[1] * a[2];
    -e1 / m + e2 / (2.0 * m * m) - e3 / (3.0 * m * m * m) - m.ln()
}

/// Sphere integral of g_S(n) J(n), split into the 6 radial projections of the
/// cube faces and 4 quadrants per face (J has kinks on the coordinate planes).
fn cube_sphere_integral(s: &StrainMatrix, n_gauss: usize) -> f64 {
    let (xs, ws) = gauss_legendre_on(n_gauss, 0.0, 1.0);
    let mut acc = Kahan::default();
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            for qu in [-1.0, 1.0] {
                for qv in [-1.0, 1.0] {
                    for (u, wu) in xs.iter().zip(&ws) {
                        for (v, wv) in xs.iter().zip(&ws) {
                            let mut z = V3::zeros();
                            z[axis] = sign;
                            z[(axis + 1) % 3] = qu * u;
                            z[(axis + 2) % 3] = qv * v;
                            let r = z.norm();
                            let n = z / r;
                            let g = kernels::g_s(&n, s).expect("unit vector is non-zero");
                            acc.add(wu * wv * g * cube_j_factor(&n) / (r * r * r));
                        }
                    }
                }
            }
        }
    }
    acc.value()
}

/// Monte-Carlo oracle for the background integral: diagonal-excluded sampling
/// at two exclusion radii with linear extrapolation to zero exclusion, plus
/// the analytic Dirac term of g_S (which sampling cannot see).
/// Returns (estimate, standard error).
pub fn background_mc(
    o: &DomainO,
    s: &StrainMatrix,
    n_samples: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let char_len = o.volume().cbrt();
    let d1 = 0.2 * char_len;
    let d2 = 0.1 * char_len;
    let chunks: u64 = 64;
    let per_chunk = n_samples / chunks;

    let chunk_stats = |c: u64| -> (f64, f64, u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9E3779B97F4A7C15u64.wrapping_mul(c + 1)));
        let mut sum = Kahan::default();
        let mut sumsq = Kahan::default();
        for _ in 0..per_chunk {
            let x = o.sample(&mut rng);
            let y = o.sample(&mut rng);
            let d = x - y;
            let r = d.norm();
            if r == 0.0 {
                continue;
            }
            let g = kernels::g_s(&d, s).expect("non-coincident");
            // statistic for the linear extrapolation 2 I(d2) - I(d1)
            let val = 2.0 * if r > d2 { g } else { 0.0 } - if r > d1 { g } else { 0.0 };
            sum.add(val);
            sumsq.add(val * val);
        }
        (sum.value(), sumsq.value(), per_chunk)
    };

    #[cfg(feature = "parallel")]
    let stats: Vec<(f64, f64, u64)> = (0..chunks).into_par_iter().map(chunk_stats).collect();
    #[cfg(not(feature = "parallel"))]
    let stats: Vec<(f64, f64, u64)> = (0..chunks).map(chunk_stats).collect();

    let mut sum = Kahan::default();
    let mut sumsq = Kahan::default();
    let mut count = 0u64;
    for (a, b, c) in stats {
        sum.add(a);
        sumsq.add(b);
        count += c;
    }
    if count < 2 {
        return Err(Error::validation("too few Monte-Carlo samples"));
    }
    let n = count as f64;
    let mean = sum.value() / n;
    let var = (sumsq.value() / n - mean * mean).max(0.0) * n / (n - 1.0);
    // Diagonal-excluded sampling only sees the principal-value part; add the
    // Dirac contribution c / |O| with c = -(8 pi / 15)|S|^2.
    let dirac = -8.0 * PI / 15.0 * s.frob2() / o.volume();
    Ok((mean + dirac, (var / n).sqrt()))
}

#[derive(Clone, Copy, Debug)]
pub struct VnBreakdown {
    pub n: usize,
    pub pair_sum: f64,
    pub background: f64,
    /// V_N = (75 |O| / 16 pi) (pair_sum - background)
    pub value: f64,
}

/// The finite-N functional
///   V_N = (75 |O| / 16 pi) [ (1/N^2) sum_{i!=j} g_S(x_i-x_j) - int int g_S f f ].
pub fn eval_vn(cfg: &PointConfiguration, o: &DomainO, s: &StrainMatrix) -> Result<VnBreakdown> {
    if cfg.is_empty() {
        return Err(Error::validation("empty configuration"));
    }
    for p in cfg.points() {
        if !o.contains(p) {
            return Err(Error::validation("configuration leaves the domain"));
        }
    }
    let ps = pair_sum(cfg, s)?;
    let bg = background_integral(o, s)?;
    Ok(VnBreakdown {
        n: cfg.len(),
        pair_sum: ps,
        background: bg,
        value: 75.0 * o.volume() / (16.0 * PI) * (ps - bg),
    })
}

/// One application of the method-of-reflections operator:
///   (A' )_i = sum_{j != i} D(v[A_j])(x_i - x_j).
pub fn apply_reflection(
    cfg: &PointConfiguration,
    state: &[StrainMatrix],
    a: BallRadius,
) -> Result<Vec<StrainMatrix>> {
    let points = cfg.points();
    let n = points.len();
    if state.len() != n {
        return Err(Error::validation("state length must match configuration"));
    }
    let one = |i: usize| -> Result<StrainMatrix> {
        let mut acc = nalgebra::Matrix3::<f64>::zeros();
        for j in 0..n {
            if j != i {
                acc += kernels::sym_grad_v_far(&(points[i] - points[j]), &state[j], a)?;
            }
        }
        Ok(StrainMatrix::project(&acc))
    };
    #[cfg(feature = "parallel")]
    let out: Result<Vec<_>> = (0..n).into_par_iter().map(one).collect();
    #[cfg(not(feature = "parallel"))]
    let out: Result<Vec<_>> = (0..n).map(one).collect();
    out
}

/// Sequential reference for `apply_reflection`.
pub fn apply_reflection_sequential(
    cfg: &PointConfiguration,
    state: &[StrainMatrix],
    a: BallRadius,
) -> Result<Vec<StrainMatrix>> {
    let points = cfg.points();
    let n = points.len();
    if state.len() != n {
        return Err(Error::validation("state length must match configuration"));
    }
    (0..n)
        .map(|i| {
            let mut acc = nalgebra::Matrix3::<f64>::zeros();
            for j in 0..n {
                if j != i {
                    acc += kernels::sym_grad_v_far(&(points[i] - points[j]), &state[j], a)?;
                }
            }
            Ok(StrainMatrix::project(&acc))
        })
        .collect()
}

/// Particle radius induced by a volume fraction: a^3 = 3 phi |O| / (4 pi N).
pub fn radius_from_fraction(phi: f64, o: &DomainO, n: usize) -> Result<BallRadius> {
    if !(phi.is_finite() && phi > 0.0) {
        return Err(Error::validation("volume fraction must be positive"));
    }
    if n == 0 {
        return Err(Error::validation("need at least one particle"));
    }
    BallRadius::new((3.0 * phi * o.volume() / (4.0 * PI * n as f64)).cbrt())
}

#[derive(Clone, Copy, Debug)]
pub struct IappBreakdown {
    pub i_a: f64,
    pub i_c: f64,
    pub radius: f64,
}

/// First terms of the approximate-energy expansion (unit viscosity scale mu):
///   I_a = 5 phi |O| mu |S|^2,
///   I_c = (20 pi / 3) mu a^3 sum_i S_i : S   with  S_i = (A S)_i.
pub fn compute_iapp(
    cfg: &PointConfiguration,
    o: &DomainO,
    s: &StrainMatrix,
    phi: f64,
    mu: f64,
) -> Result<IappBreakdown> {
    let a = radius_from_fraction(phi, o, cfg.len())?;
    let state = vec![*s; cfg.len()];
    let reflected = apply_reflection(cfg, &state, a)?;
    let mut acc = Kahan::default();
    for si in &reflected {
        acc.add(si.contract(s.matrix()));
    }
    Ok(IappBreakdown {
        i_a: 5.0 * phi * o.volume() * mu * s.frob2(),
        i_c: 20.0 * PI / 3.0 * mu * a.get().powi(3) * acc.value(),
        radius: a.get(),
    })
}

/// Discrete Calderon-Zygmund probe: the worst ratio
///   sum_i |(A A)_i|^q / (phi^{q/p} sum_i |A_i|^q),  1/p + 1/q = 1,
/// over random trace-free symmetric inputs, with a set by the volume fraction.
pub fn calderon_probe(
    cfg: &PointConfiguration,
    o: &DomainO,
    phi: f64,
    q: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if q <= 1.0 {
        return Err(Error::validation("q must exceed 1"));
    }
    let n = cfg.len();
    let a = radius_from_fraction(phi, o, n)?;
    let p = q / (q - 1.0);
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let state: Vec<StrainMatrix> = (0..n).map(|_| StrainMatrix::random_unit(&mut rng)).collect();
        let image = apply_reflection(cfg, &state, a)?;
        let num: f64 = image.iter().map(|m| m.frob().powf(q)).sum();
        let den: f64 = state.iter().map(|m| m.frob().powf(q)).sum();
        worst = worst.max(num / (phi.powf(q / p) * den));
    }
    Ok(worst)
}
