//! Gauss rules for the weights (1 - x²)^α on [-1, 1].
//!
//! Nodes come from the Golub-Welsch eigenproblem and are then polished by
//! Newton steps on the orthonormal three-term recurrence; weights use the
//! Christoffel formula so that they sum to the exact zeroth moment.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::special::gamma;

/// A one-dimensional Gauss rule on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn offdiag_sq(k: usize, alpha: f64) -> f64 {
    let k = k as f64;
    let s = 2.0 * k + 2.0 * alpha;
    k * (k + 2.0 * alpha) / ((s + 1.0) * (s - 1.0))
}

fn zeroth_moment(alpha: f64) -> f64 {
    // ∫_{-1}^{1} (1 - x²)^α dx = √π Γ(α+1) / Γ(α+3/2)
    std::f64::consts::PI.sqrt() * gamma(alpha + 1.0) / gamma(alpha + 1.5)
}

/// Evaluates the orthonormal polynomials p_0..p_{m} at x; returns (p_m, p_m', Σ_{k<m} p_k²).
fn orthonormal_eval(x: f64, m: usize, b: &[f64], mu0: f64) -> (f64, f64, f64) {
    let mut p_prev = 0.0;
    let mut p = 1.0 / mu0.sqrt();
    let mut d_prev = 0.0;
    let mut d = 0.0;
    let mut sum_sq = 0.0;
    for k in 0..m {
        sum_sq += p * p;
        let b_next = b[k + 1];
        let b_cur = b[k];
        let p_next = (x * p - b_cur * p_prev) / b_next;
        let d_next = (p + x * d - b_cur * d_prev) / b_next;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d, sum_sq)
}

/// Gauss rule with `m` nodes for the weight (1 - x²)^α, α > -1/2 excluded at the
/// Chebyshev-T endpoint; callers use α ≥ 0.
pub fn gauss_gegenbauer(m: usize, alpha: f64) -> GaussRule {
    assert!(m >= 1, "rule needs at least one node");
    assert!(alpha > -0.5, "alpha must exceed -1/2");
    let mu0 = zeroth_moment(alpha);
    // b[k] = sqrt(β_k) with b[0] = 0 sentinel, b[k] for k = 1..=m.
    let mut b = vec![0.0; m + 1];
    for (k, bk) in b.iter_mut().enumerate().skip(1) {
        *bk = offdiag_sq(k, alpha).sqrt();
    }
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        jac[(k, k - 1)] = b[k];
        jac[(k - 1, k)] = b[k];
    }
    let eig = SymmetricEigen::new(jac);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // symmetry: enforce x_i = -x_{m-1-i}
    for i in 0..m / 2 {
        let avg = 0.5 * (nodes[m - 1 - i] - nodes[i]);
        nodes[i] = -avg;
        nodes[m - 1 - i] = avg;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    let mut weights = Vec::with_capacity(m);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, d, _) = orthonormal_eval(*x, m, &b, mu0);
            if d != 0.0 {
                let step = p / d;
                if step.abs() < 1e-6 {
                    *x -= step;
                }
            }
        }
        let (_, _, sum_sq) = orthonormal_eval(*x, m, &b, mu0);
        weights.push(1.0 / sum_sq);
    }
    for i in 0..m / 2 {
        let avg_x = 0.5 * (nodes[m - 1 - i] - nodes[i]);
        nodes[i] = -avg_x;
        nodes[m - 1 - i] = avg_x;
        let avg_w = 0.5 * (weights[i] + weights[m - 1 - i]);
        weights[i] = avg_w;
        weights[m - 1 - i] = avg_w;
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w *= mu0 / total;
    }
    GaussRule { nodes, weights }
}

/// Gauss-Legendre rule with `m` nodes on [-1, 1].
pub fn gauss_legendre(m: usize) -> GaussRule {
    gauss_gegenbauer(m, 0.0)
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_exact_on_polynomials() {
        let rule = gauss_legendre(8);
        for deg in 0..16 {
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            let got = rule.integrate(-1.0, 1.0, |x| x.powi(deg));
            assert!((got - exact).abs() < 1e-14, "deg {deg}: {got} vs {exact}");
        }
    }

    #[test]
    fn legendre_known_nodes() {
        let rule = gauss_legendre(2);
        assert!((rule.nodes[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((rule.weights[0] - 1.0).abs() < 1e-15, "{:?}", rule.weights);
    }

    #[test]
    fn gegenbauer_moments() {
        // α = 1/2: ∫ x² √(1-x²) dx = π/8
        let rule = gauss_gegenbauer(16, 0.5);
        let w: f64 = rule.weights.iter().sum();
        assert!((w - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        let m2: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x * x).sum();
        assert!((m2 - std::f64::consts::PI / 8.0).abs() < 1e-14);
    }

    #[test]
    fn large_rule_stays_accurate() {
        let rule = gauss_gegenbauer(128, 1.5);
        let w: f64 = rule.weights.iter().sum();
        assert!((w - zeroth_moment(1.5)).abs() < 1e-13);
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        assert!(rule.nodes.windows(2).all(|p| p[0] < p[1]));
    }
}
