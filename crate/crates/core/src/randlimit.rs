//! Monte-Carlo estimation of lim V_N for stationary hard-core point
//! processes, together with the pair-correlation integral it converges to.
//!
//! For a realization Lambda on the torus K_L, the periodized pair estimator
//!   F_L = (1/L^3) sum_{z != z', z, z' in Lambda cap K_{L-1}} S del . G_{S,L}(z - z')
//! has expectation (1/L^3) int int_{K_{L-1}^2} S del . G_{S,L}(z - z') rho(z - z') dz dz'
//! and the limit functional is (25 / 2 m^2) lim_L E F_L, with m the process
//! intensity. Both lines are implemented and cross-checked.

use crate::error::{Error, Result};
use crate::ewald::{self, EwaldParams};
use crate::points::PointConfiguration;
use crate::processes::{self, PairCorrelationEstimate, ProcessSpec, ProcessVariant};
use crate::quad::gauss_legendre_on;
use crate::tensor::{StrainMatrix, V3};
use std::f64::consts::PI;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Periodized pair estimator F_L of a realization on the torus K_L. Points
/// are restricted to the inner window K_{L-1} before summation; with fewer
/// than two surviving points the estimator is zero.
pub fn periodized_pair_estimator(
    realization: &PointConfiguration,
    l: f64,
    s: &StrainMatrix,
    params: &EwaldParams,
) -> Result<f64> {
    if !(l.is_finite() && l > 1.0) {
        return Err(Error::validation("torus size L must exceed 1"));
    }
    let half = (l - 1.0) / 2.0;
    let inner: Vec<V3> = realization
        .points()
        .iter()
        .copied()
        .filter(|z| z.x.abs() <= half && z.y.abs() <= half && z.z.abs() <= half)
        .collect();
    if inner.len() < 2 {
        return Ok(0.0);
    }
    Ok(ewald::pair_sum_div_sg_periodic(&inner, l, s, params)? / l.powi(3))
}

/// Slow oracle for the estimator: direct double sum over Ewald evaluations.
pub fn periodized_pair_estimator_direct(
    realization: &PointConfiguration,
    l: f64,
    s: &StrainMatrix,
    params: &EwaldParams,
) -> Result<f64> {
    let half = (l - 1.0) / 2.0;
    let inner: Vec<V3> = realization
        .points()
        .iter()
        .copied()
        .filter(|z| z.x.abs() <= half && z.y.abs() <= half && z.z.abs() <= half)
        .collect();
    let mut acc = 0.0;
    for i in 0..inner.len() {
        for j in 0..inner.len() {
            if i != j {
                acc += ewald::div_sg_l(&(inner[i] - inner[j]), s, l, params)?;
            }
        }
    }
    Ok(acc / l.powi(3))
}

/// Result of the Monte-Carlo limit estimation.
#[derive(Clone, Debug)]
pub struct LimitEstimate {
    /// Largest-L normalized mean, (25/2) mean(F_L) / m_hat^2.
    pub value: f64,
    pub std_error: f64,
    pub l_ladder: Vec<f64>,
    /// Per-L (mean, standard error) of the normalized estimator.
    pub per_l_values: Vec<(f64, f64)>,
    pub replicates: usize,
    pub seed: u64,
    /// Empirical intensity pooled over every realization.
    pub m_hat: f64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Monte-Carlo estimate of lim V_N over a ladder of torus sizes. Each
/// (L, replicate) pair gets an independent deterministic seed stream derived
/// from `seed`; the reported value is the largest-L entry of the ladder.
pub fn mc_limit(
    process: &ProcessSpec,
    l_ladder: &[f64],
    replicates: usize,
    s: &StrainMatrix,
    seed: u64,
    params: &EwaldParams,
) -> Result<LimitEstimate> {
    if l_ladder.is_empty() || l_ladder.iter().any(|l| !(l.is_finite() && *l > 1.0)) {
        return Err(Error::validation("L ladder entries must exceed 1"));
    }
    if replicates < 2 {
        return Err(Error::validation("need at least 2 replicates"));
    }
    if matches!(process.variant, ProcessVariant::Explicit { .. }) {
        return Err(Error::validation(
            "mc_limit requires a resampleable process (lattice or Matern)",
        ));
    }

    // raw per-replicate estimators and realization counts, per ladder entry
    let mut raw: Vec<Vec<(f64, usize)>> = Vec::new();
    for (li, &l) in l_ladder.iter().enumerate() {
        let one = |rep: usize| -> Result<(f64, usize)> {
            let spec = ProcessSpec {
                variant: process.variant.clone(),
                window: l,
                seed: splitmix64(seed ^ splitmix64((li as u64) << 32 | rep as u64)),
            };
            let cfg = processes::generate(&spec)?;
            let f = periodized_pair_estimator(&cfg, l, s, params)?;
            Ok((f, cfg.len()))
        };
        #[cfg(feature = "parallel")]
        let level: Result<Vec<(f64, usize)>> =
            (0..replicates).into_par_iter().map(one).collect();
        #[cfg(not(feature = "parallel"))]
        let level: Result<Vec<(f64, usize)>> = (0..replicates).map(one).collect();
        raw.push(level?);
    }

    // pooled intensity over every realization
    let mut total_pts = 0usize;
    let mut total_vol = 0.0;
    for (li, level) in raw.iter().enumerate() {
        for (_, n) in level {
            total_pts += n;
            total_vol += l_ladder[li].powi(3);
        }
    }
    let m_hat = total_pts as f64 / total_vol;
    if m_hat == 0.0 {
        return Err(Error::Degenerate(
            "process produced no points (zero empirical intensity)".into(),
        ));
    }

    let norm = 12.5 / (m_hat * m_hat);
    let mut per_l_values = Vec::new();
    for level in &raw {
        let vals: Vec<f64> = level.iter().map(|(f, _)| norm * f).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (vals.len() as f64 * (vals.len() - 1) as f64);
        per_l_values.push((mean, var.sqrt()));
    }
    let &(value, std_error) = per_l_values.last().unwrap();
    Ok(LimitEstimate {
        value,
        std_error,
        l_ladder: l_ladder.to_vec(),
        per_l_values,
        replicates,
        seed,
        m_hat,
    })
}

/// Two-point correlation model fed to [`correlation_integral`].
#[derive(Clone, Debug)]
pub enum RhoModel {
    /// Closed-form Matern I correlation (union-volume formula).
    MaternI { lambda: f64, c: f64 },
    /// Histogram estimate with a declared hard core; the tail mean (bins
    /// beyond twice the hard core) is used as the squared intensity.
    Binned {
        estimate: PairCorrelationEstimate,
        hard_core: f64,
    },
    /// Stationarized lattice (spacing h): rho is a sum of shell masses. The
    /// integral reduces to the exact discrete pair sum of the grid in K_{L-1}.
    LatticeShells { spacing: f64 },
}

fn w_weight(u: &V3, span: f64) -> f64 {
    (span - u.x.abs()).max(0.0) * (span - u.y.abs()).max(0.0) * (span - u.z.abs()).max(0.0)
}

/// Sphere rule whose panels are aligned with the coordinate octants: Gauss
/// in cos(theta) on [-1, 0] and [0, 1], Gauss in phi on quarter turns. The
/// weight W(r n) involves |n_i|, which is smooth on each octant but kinked
/// across the equator and meridians; an octant-aligned rule integrates it
/// spectrally, and low-degree polynomials (such as the angular part of the
/// free kernel, whose mean must vanish to round-off) exactly.
struct OctantSphereRule {
    nodes: Vec<V3>,
    weights: Vec<f64>,
}

impl OctantSphereRule {
    fn new(n_theta: usize, n_phi: usize) -> Self {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for half in 0..2 {
            let (cts, wts) =
                gauss_legendre_on(n_theta, if half == 0 { -1.0 } else { 0.0 }, if half == 0 { 0.0 } else { 1.0 });
            for (ct, wt) in cts.iter().zip(&wts) {
                let st = (1.0 - ct * ct).max(0.0).sqrt();
                for quarter in 0..4 {
                    let lo = PI / 2.0 * quarter as f64;
                    let (ps, pw) = gauss_legendre_on(n_phi, lo, lo + PI / 2.0);
                    for (p, w) in ps.iter().zip(&pw) {
                        nodes.push(V3::new(st * p.cos(), st * p.sin(), *ct));
                        weights.push(wt * w);
                    }
                }
            }
        }
        OctantSphereRule { nodes, weights }
    }
}

/// Angular integral of a sphere of radius r > s that pokes out of the cube
/// [-s, s]^3. The weight W vanishes outside |u_i| <= s, so the domain is
/// restricted to cos(theta) <= s/r and, per quarter turn, to the phi window
/// where both horizontal components stay below s. Aligning the panels with
/// those cut circles keeps the integrand smooth on every panel.
fn angular_shell_outer(
    r: f64,
    n_theta: usize,
    n_phi: usize,
    l: f64,
    s: &StrainMatrix,
    params: &EwaldParams,
) -> Result<f64> {
    let span = l - 1.0;
    let rr = span / r; // cut parameter; the sphere exits the slab |u_z| <= s at ct = rr
    if rr * 3f64.sqrt() <= 1.0 {
        return Ok(0.0);
    }
    let ct_max = rr.min(1.0);
    // theta panels split where r sin(theta) crosses s and s sqrt 2: there the
    // phi window ends become non-smooth functions of theta.
    let mut ct_breaks: Vec<f64> = Vec::new();
    for b in [
        (1.0 - 2.0 * rr * rr).max(0.0).sqrt(),
        (1.0 - rr * rr).max(0.0).sqrt(),
    ] {
        if b > 1e-12 && b < ct_max - 1e-12 {
            ct_breaks.push(b);
        }
    }
    ct_breaks.push(ct_max);
    ct_breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut acc = 0.0;
    let mut lo = 0.0;
    for &hi in &ct_breaks {
        if hi <= lo {
            continue;
        }
        let (cts, wts) = gauss_legendre_on(n_theta, lo, hi);
        for (ct, wt) in cts.iter().zip(&wts) {
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            if st < 1e-14 {
                continue;
            }
            let c0 = rr / st;
            let (px, py) = if c0 >= 1.0 {
                (0.0, PI / 2.0)
            } else {
                (c0.acos(), c0.asin())
            };
            if px >= py {
                continue;
            }
            let (ps, pw) = gauss_legendre_on(n_phi, px, py);
            for quarter in 0..4 {
                let off = PI / 2.0 * quarter as f64;
                for (psi, w) in ps.iter().zip(&pw) {
                    let phi = off + psi;
                    let n = V3::new(st * phi.cos(), st * phi.sin(), *ct);
                    let u = n * r;
                    acc += wt * w * ewald::div_sg_l(&u, s, l, params)? * w_weight(&u, span);
                }
            }
        }
        lo = hi;
    }
    // the lower hemisphere follows by inversion symmetry of both factors
    Ok(2.0 * acc * r * r)
}

/// Angular integral A(r) = int_{S^2} divSG_L(r n) W(r n) r^2 dOmega.
/// Finite as r -> 0 because divSG has zero angular mean.
fn angular_shell(
    r: f64,
    sphq: &OctantSphereRule,
    l: f64,
    s: &StrainMatrix,
    params: &EwaldParams,
) -> Result<f64> {
    let span = l - 1.0;
    let mut acc = 0.0;
    for (n, w) in sphq.nodes.iter().zip(&sphq.weights) {
        acc += w * ewald::div_sg_l(&(n * r), s, l, params)? * w_weight(&(n * r), span);
    }
    Ok(acc * r * r)
}

/// Radial principal-value quadrature of int rho(|u|) S del . G_{S,L}(u) W(u) du
/// over the whole difference cube [-s, s]^3. In spherical shells the
/// integrand rho(r) A(r) is finite down to r = 0 (the kernel has zero
/// angular mean and rho vanishes inside the hard core), so integrating
/// shells outward realizes exactly the principal value the off-diagonal
/// pair sum sees. Panels split at the profile breakpoints (hard core, bin
/// edges) and at the radii r = s, s sqrt 2 where the sphere starts leaving
/// the cube and the angular factor acquires new kinks.
///
/// Summing the constant-tail part in Fourier space instead would be wrong:
/// the Fourier coefficients of the periodic kernel do not decay, and the
/// distribution they define differs from the pointwise kernel by a Dirac
/// comb on the period lattice that the pair sum never samples.
fn radial_rho_integral(
    rho: &(dyn Fn(f64) -> f64 + Sync),
    profile_breaks: &[f64],
    nodes_per_panel: usize,
    sph_degree: usize,
    l: f64,
    s: &StrainMatrix,
    params: &EwaldParams,
) -> Result<f64> {
    let span = l - 1.0;
    let r_max = span * 3f64.sqrt();
    let mut breaks: Vec<f64> = profile_breaks
        .iter()
        .copied()
        .filter(|b| *b > 0.0 && *b < r_max)
        .collect();
    breaks.extend([span / 2.0, span, span * 2f64.sqrt(), r_max]);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut nodes: Vec<(f64, f64)> = Vec::new();
    let mut lo = 0.0;
    for &hi in &breaks {
        if hi <= lo {
            continue;
        }
        let (xs, ws) = gauss_legendre_on(nodes_per_panel, lo, hi);
        nodes.extend(xs.into_iter().zip(ws));
        lo = hi;
    }
    // Shells of large radius pass close to the periodic images of the
    // kernel singularity (the gap is about L - r for r < L), producing
    // angular features of width ~ 1/r; grow the rule with the radius.
    let degree = |r: f64| sph_degree + (2.5 * r).round() as usize;
    let term = |&(x, w): &(f64, f64)| -> Result<f64> {
        let p = rho(x);
        if p == 0.0 {
            return Ok(0.0);
        }
        let deg = degree(x);
        let shell = if x <= span {
            let sphq = OctantSphereRule::new(deg, deg);
            angular_shell(x, &sphq, l, s, params)?
        } else {
            angular_shell_outer(x, deg, deg, l, s, params)?
        };
        Ok(w * p * shell)
    };
    #[cfg(feature = "parallel")]
    let acc = nodes
        .par_iter()
        .map(term)
        .collect::<Result<Vec<_>>>()?
        .iter()
        .sum();
    #[cfg(not(feature = "parallel"))]
    let acc = nodes.iter().map(term).sum::<Result<f64>>()?;
    Ok(acc)
}

/// Pair-correlation line of the limit proposition:
///   (1/L^3) int int_{K_{L-1}^2} S del . G_{S,L}(z - z') rho(z - z') dz dz'.
/// Evaluated as a radial shell quadrature of rho(r) against the W-weighted
/// kernel (see [`radial_rho_integral`]), refined until 1e-4 relative
/// stability between two resolution levels.
pub fn correlation_integral(
    rho: &RhoModel,
    l: f64,
    s: &StrainMatrix,
    params: &EwaldParams,
) -> Result<f64> {
    if !(l.is_finite() && l > 1.0) {
        return Err(Error::validation("torus size L must exceed 1"));
    }
    let span = l - 1.0;
    match rho {
        RhoModel::LatticeShells { spacing } => {
            let h = *spacing;
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::validation("lattice spacing must be positive"));
            }
            // grid points j h in [-s/2, s/2]; exact per-axis difference counts
            let jmax = (span / 2.0 / h).floor() as i64;
            let n_axis = 2 * jmax + 1;
            let count = |dj: i64| (n_axis - dj.abs()) as f64;
            let mut acc = 0.0;
            for jx in -(n_axis - 1)..n_axis {
                for jy in -(n_axis - 1)..n_axis {
                    for jz in -(n_axis - 1)..n_axis {
                        if jx == 0 && jy == 0 && jz == 0 {
                            continue;
                        }
                        let v = V3::new(jx as f64, jy as f64, jz as f64) * h;
                        acc += ewald::div_sg_l(&v, s, l, params)?
                            * count(jx)
                            * count(jy)
                            * count(jz);
                    }
                }
            }
            Ok(acc / l.powi(3))
        }
        RhoModel::MaternI { lambda, c } => {
            if !(lambda.is_finite() && *lambda > 0.0 && c.is_finite() && *c > 0.0) {
                return Err(Error::validation("Matern parameters must be positive"));
            }
            if 2.0 * c >= span / 2.0 {
                return Err(Error::validation(
                    "hard core too large for the window: need 4c < L - 1",
                ));
            }
            let rho_fn = |r: f64| processes::matern_i_pair_correlation(r, *lambda, *c);
            let breaks = [*c, 2.0 * c];
            let coarse = integral_at_level(&rho_fn, &breaks, l, s, params, 0)?;
            let fine = integral_at_level(&rho_fn, &breaks, l, s, params, 1)?;
            check_stable(coarse, fine)?;
            Ok(fine)
        }
        RhoModel::Binned {
            estimate,
            hard_core,
        } => {
            let hc = *hard_core;
            if !(hc.is_finite() && hc >= 0.0) {
                return Err(Error::validation("hard core must be non-negative"));
            }
            let edges = &estimate.bin_edges;
            let vals = &estimate.values;
            // rho must vanish inside the hard core
            for i in 0..vals.len() {
                if edges[i + 1] <= hc && vals[i] != 0.0 {
                    return Err(Error::validation(
                        "binned correlation has support below the hard core",
                    ));
                }
            }
            let r_hi = *edges.last().unwrap();
            let tail_lo = 2.0 * hc;
            let mut tail_w = 0.0;
            let mut tail_sum = 0.0;
            for i in 0..vals.len() {
                if edges[i] >= tail_lo {
                    let w = edges[i + 1].powi(3) - edges[i].powi(3);
                    tail_w += w;
                    tail_sum += w * vals[i];
                }
            }
            if tail_w == 0.0 && vals.iter().any(|v| *v != 0.0) {
                return Err(Error::validation(
                    "no histogram bins beyond twice the hard core",
                ));
            }
            let m2 = if tail_w == 0.0 { 0.0 } else { tail_sum / tail_w };
            let lookup = move |r: f64| -> f64 {
                if r < edges[0] {
                    return 0.0;
                }
                if r >= r_hi {
                    return m2; // constant tail beyond the histogram support
                }
                let i = edges.partition_point(|e| *e <= r) - 1;
                vals[i.min(vals.len() - 1)]
            };
            let breaks = edges.to_vec();
            let coarse = integral_at_level(&lookup, &breaks, l, s, params, 0)?;
            let fine = integral_at_level(&lookup, &breaks, l, s, params, 1)?;
            check_stable(coarse, fine)?;
            Ok(fine)
        }
    }
}

fn integral_at_level(
    rho: &(dyn Fn(f64) -> f64 + Sync),
    profile_breaks: &[f64],
    l: f64,
    s: &StrainMatrix,
    params: &EwaldParams,
    level: usize,
) -> Result<f64> {
    let value = radial_rho_integral(
        rho,
        profile_breaks,
        16 + 8 * level,
        12 + 6 * level,
        l,
        s,
        params,
    )?;
    Ok(value / l.powi(3))
}

fn check_stable(coarse: f64, fine: f64) -> Result<()> {
    let scale = fine.abs().max(1e-12);
    if (coarse - fine).abs() > 1e-4 * scale.max(coarse.abs()) {
        return Err(Error::accuracy(format!(
            "correlation integral did not stabilise: {coarse} vs {fine}"
        )));
    }
    Ok(())
}
