//! Gauss-Legendre rules and product quadrature on spheres and balls.

use crate::error::{Error, Result};
use crate::tensor::V3;
use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        xs[n - 1 - i] = x;
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| w * half).collect(),
    )
}

/// Product quadrature on the unit sphere, exact for spherical polynomials up
/// to the declared degree (Gauss-Legendre in cos(theta), uniform in phi).
#[derive(Clone, Debug)]
pub struct SphereQuadrature {
    pub nodes: Vec<V3>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl SphereQuadrature {
    pub fn new(degree: usize) -> Self {
        let n_theta = degree / 2 + 1;
        let n_phi = degree + 1;
        let (cts, wts) = gauss_legendre(n_theta);
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (ct, wt) in cts.iter().zip(&wts) {
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            for j in 0..n_phi {
                let phi = 2.0 * PI * (j as f64 + 0.5) / n_phi as f64;
                nodes.push(V3::new(st * phi.cos(), st * phi.sin(), *ct));
                weights.push(wt * 2.0 * PI / n_phi as f64);
            }
        }
        SphereQuadrature {
            nodes,
            weights,
            degree,
        }
    }

    pub fn integrate(&self, f: impl Fn(&V3) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(n, w)| w * f(n))
            .sum()
    }

    /// Fallible variant of [`integrate`](Self::integrate); the first error
    /// from the integrand aborts the sum.
    pub fn integrate_try(&self, f: impl Fn(&V3) -> Result<f64>) -> Result<f64> {
        let mut acc = 0.0;
        for (n, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(n)?;
        }
        Ok(acc)
    }

    pub fn integrate_vec(&self, f: impl Fn(&V3) -> V3) -> V3 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(V3::zeros(), |acc, (n, w)| acc + f(n) * *w)
    }

    /// Self-check: integrate x1^2 x2^2 over the sphere (= 4 pi / 15) and the
    /// surface area; returns an accuracy error on disagreement.
    pub fn verify(&self) -> Result<()> {
        let area = self.integrate(|_| 1.0);
        let m22 = self.integrate(|n| n.x * n.x * n.y * n.y);
        if (area - 4.0 * PI).abs() > 1e-12 || (m22 - 4.0 * PI / 15.0).abs() > 1e-12 {
            return Err(Error::accuracy("sphere quadrature failed moment check"));
        }
        Ok(())
    }
}

/// Product quadrature over a ball of given radius (Gauss-Legendre radially,
/// sphere rule angularly). Node weights include the r^2 Jacobian.
#[derive(Clone, Debug)]
pub struct BallQuadrature {
    pub nodes: Vec<V3>,
    pub weights: Vec<f64>,
}

impl BallQuadrature {
    pub fn new(radius: f64, radial_nodes: usize, sphere_degree: usize) -> Self {
        let sphere = SphereQuadrature::new(sphere_degree);
        let (rs, wrs) = gauss_legendre_on(radial_nodes, 0.0, radius);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (r, wr) in rs.iter().zip(&wrs) {
            for (n, ws) in sphere.nodes.iter().zip(&sphere.weights) {
                nodes.push(n * *r);
                weights.push(wr * ws * r * r);
            }
        }
        BallQuadrature { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(&V3) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .sum()
    }
}
