//! Orbit averaging by numerical quadrature over the sphere.
//!
//! The product rule combines Gauss-Legendre nodes in the cosine of the polar
//! angle with a uniform (periodic trapezoid) rule in the azimuth; combined
//! weights sum to one, so the rule computes a plain average over
//! orientations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanics::{Rotation3, SymTensor3};

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre recurrence. Exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = -p / d;
            x += dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereNode {
    pub theta: f64,
    pub phi: f64,
    pub weight: f64,
}

/// Normalized quadrature rule over orientation angles
/// `(theta, phi) in [0, pi] x [0, 2*pi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereRule {
    pub nodes: Vec<SphereNode>,
}

impl SphereRule {
    /// Gauss-Legendre in `cos(theta)` times a uniform azimuth rule.
    /// The azimuth rule is exact for trigonometric polynomials of degree
    /// below `n_azimuth`; the polar rule for polynomial integrands of degree
    /// `2*n_polar - 1` in `cos(theta)`.
    pub fn product(n_polar: usize, n_azimuth: usize) -> SphereRule {
        assert!(n_polar >= 1 && n_azimuth >= 1);
        let (u, w) = gauss_legendre(n_polar);
        let mut nodes = Vec::with_capacity(n_polar * n_azimuth);
        for (ui, wi) in u.iter().zip(&w) {
            let theta = ui.acos();
            for j in 0..n_azimuth {
                nodes.push(SphereNode {
                    theta,
                    phi: std::f64::consts::TAU * j as f64 / n_azimuth as f64,
                    weight: 0.5 * wi / n_azimuth as f64,
                });
            }
        }
        SphereRule { nodes }
    }

    fn total_weight(&self) -> Result<f64> {
        if self.nodes.is_empty() {
            return Err(Error::BadQuadrature {
                reason: "no nodes".into(),
            });
        }
        let mut total = 0.0;
        for node in &self.nodes {
            if !(node.weight > 0.0 && node.weight.is_finite()) {
                return Err(Error::BadQuadrature {
                    reason: format!("weight {} is not positive and finite", node.weight),
                });
            }
            total += node.weight;
        }
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::BadQuadrature {
                reason: format!("total weight {total}"),
            });
        }
        Ok(total)
    }
}

/// Conditional average of an estimator over one level set, realized as a
/// weighted quadrature average over the orbit parameterization
/// `omega(theta, phi)`.
pub fn rao_blackwellize_quadrature<W>(
    theta0: impl Fn(&W) -> f64,
    orbit: impl Fn(f64, f64) -> W,
    rule: &SphereRule,
) -> Result<f64> {
    let total = rule.total_weight()?;
    let mut acc = 0.0;
    for node in &rule.nodes {
        let omega = orbit(node.theta, node.phi);
        acc += node.weight * theta0(&omega);
    }
    Ok(acc / total)
}

/// Orbit average of the single-axis quadratic stretch: the initial estimator
/// reads the diagonal component along the axis that the rotation family
/// sweeps uniformly over the sphere. Converges to `tr(c) / 3`.
pub fn microsphere_orbit_average(c: &SymTensor3, rule: &SphereRule) -> Result<f64> {
    let c = *c;
    rao_blackwellize_quadrature(
        |t: &SymTensor3| t.zz,
        |theta, phi| c.rotate(&Rotation3::new(theta, phi)),
        rule,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for n in [1, 2, 3, 5, 8, 16] {
            let (_, w) = gauss_legendre(n);
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "n = {n}: sum = {total}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(3);
        // degree 4 is within the exactness degree 2n-1 = 5
        let quad: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(4)).sum();
        assert!((quad - 2.0 / 5.0).abs() < 1e-14);
        let quad: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(5)).sum();
        assert!(quad.abs() < 1e-14);
    }

    #[test]
    fn sphere_rule_is_normalized() {
        let rule = SphereRule::product(8, 16);
        let total: f64 = rule.nodes.iter().map(|n| n.weight).sum();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn constant_integrand_averages_to_itself() {
        let rule = SphereRule::product(4, 8);
        let avg =
            rao_blackwellize_quadrature(|_: &f64| 2.5, |_, _| 0.0, &rule).unwrap();
        assert!((avg - 2.5).abs() < 1e-14);
    }

    #[test]
    fn identity_tensor_averages_to_one() {
        let rule = SphereRule::product(8, 16);
        let avg = microsphere_orbit_average(&SymTensor3::identity(), &rule).unwrap();
        assert!((avg - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_tensor_matches_third_of_trace() {
        let rule = SphereRule::product(8, 16);
        let c = SymTensor3::diag(4.0, 1.0, 1.0);
        let avg = microsphere_orbit_average(&c, &rule).unwrap();
        assert!((avg - 2.0).abs() < 1e-8);
    }

    #[test]
    fn random_spd_tensors_match_third_of_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rule = SphereRule::product(8, 16);
        for _ in 0..20 {
            // b * b^T + eps * I is symmetric positive definite
            let b: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut c = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    c[i][j] = (0..3).map(|k| b[3 * i + k] * b[3 * j + k]).sum::<f64>();
                }
                c[i][i] += 0.1;
            }
            let t = SymTensor3::new(c[0][0], c[1][1], c[2][2], c[0][1], c[1][2], c[0][2]);
            let avg = microsphere_orbit_average(&t, &rule).unwrap();
            assert!((avg - t.trace() / 3.0).abs() < 1e-8);
        }
    }

    #[test]
    fn doubling_nodes_shrinks_the_error() {
        // product(1, 2) is below the exactness degree of the quadratic
        // integrand and must carry a real error; doubling removes it
        let c = SymTensor3::new(2.0, 0.5, 1.0, 0.3, -0.2, 0.7);
        let truth = c.trace() / 3.0;
        let coarse =
            (microsphere_orbit_average(&c, &SphereRule::product(1, 2)).unwrap() - truth).abs();
        let fine =
            (microsphere_orbit_average(&c, &SphereRule::product(2, 4)).unwrap() - truth).abs();
        assert!(coarse > 1e-3, "coarse rule unexpectedly exact: {coarse}");
        assert!(fine < coarse);
        assert!(fine < 1e-12);
    }

    #[test]
    fn bad_weights_are_rejected() {
        let mut rule = SphereRule::product(2, 2);
        rule.nodes[0].weight = -0.1;
        assert!(microsphere_orbit_average(&SymTensor3::identity(), &rule).is_err());
        let rule = SphereRule { nodes: vec![] };
        assert!(microsphere_orbit_average(&SymTensor3::identity(), &rule).is_err());
    }
}
