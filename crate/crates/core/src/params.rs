//! The admissible parameter region and every closed-form scalar attached to it.

use serde::{Deserialize, Serialize};

use crate::error::{CknError, Result};
use crate::special::{ln_gamma, sphere_area};

/// A validated parameter tuple (n, p, a, b) together with its derived exponents.
///
/// `q`, `gamma` and `k` are computed once by [`CknParams::new`] and stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CknParams {
    pub n: usize,
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub gamma: f64,
    pub k: f64,
}

impl CknParams {
    /// Validates (n, p, a, b) against the open region
    /// `1 < p < n`, `0 ≤ a < (n-p)/p`, `a ≤ b < a+1`.
    pub fn new(n: usize, p: f64, a: f64, b: f64) -> Result<Self> {
        derive_params(n, p, a, b)
    }

    /// γ = 1 + a − b.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// n − p − pa, the quantity that controls every scaling exponent.
    pub fn gap(&self) -> f64 {
        self.n as f64 - self.p - self.p * self.a
    }

    /// Exponent σ of |x| inside the extremal profile.
    pub fn sigma(&self) -> f64 {
        let n = self.n as f64;
        self.p * self.gamma * self.gap() / ((self.p - 1.0) * (n - self.p * self.gamma))
    }

    /// β = n/(pγ) − 1, so that extremals read A (1 + B r^σ)^{-β}.
    pub fn profile_power(&self) -> f64 {
        self.n as f64 / (self.p * self.gamma) - 1.0
    }

    /// Dilation weight (n − p − pa)/p used by λ^{(n-p-pa)/p} V(λx).
    pub fn dilation_weight(&self) -> f64 {
        self.gap() / self.p
    }

    /// Common energy of Talenti bubbles, S^{pq/(q-p)}.
    pub fn bubble_energy(&self) -> f64 {
        sharp_constant(self).powf(self.p * self.q / (self.q - self.p))
    }

    /// |S^{n-1}|.
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.n)
    }

    /// Stability exponent: max{4, 2p} when p ≠ 2 and 0 < a = b (and the field is
    /// not n-symmetric), max{2, p} otherwise.
    pub fn stability_exponent(&self, n_symmetric: bool) -> f64 {
        if self.p != 2.0 && self.a > 0.0 && self.a == self.b && !n_symmetric {
            (2.0 * self.p).max(4.0)
        } else {
            self.p.max(2.0)
        }
    }

    /// Same (n, p) with the weights shifted to (0, b − a): the target of the Horiuchi map.
    pub fn unweighted_partner(&self) -> Result<Self> {
        derive_params(self.n, self.p, 0.0, self.b - self.a)
    }

    /// Ordered tuple used for hashing and comparisons in configs.
    pub fn key(&self) -> (usize, f64, f64, f64) {
        (self.n, self.p, self.a, self.b)
    }
}

/// Validates the region and derives q, γ and k.
pub fn derive_params(n: usize, p: f64, a: f64, b: f64) -> Result<CknParams> {
    if !(p.is_finite() && a.is_finite() && b.is_finite()) {
        return Err(CknError::region("non-finite parameter"));
    }
    let nf = n as f64;
    if !(p > 1.0) {
        return Err(CknError::region(format!("p = {p} must satisfy p > 1")));
    }
    if !(p < nf) {
        return Err(CknError::region(format!("p = {p} must satisfy p < n = {n}")));
    }
    if !(a >= 0.0) {
        return Err(CknError::region(format!("a = {a} must satisfy a >= 0")));
    }
    let a_max = (nf - p) / p;
    if !(a < a_max) {
        return Err(CknError::region(format!(
            "a = {a} must satisfy a < (n-p)/p = {a_max}"
        )));
    }
    if !(b >= a) {
        return Err(CknError::region(format!("b = {b} must satisfy b >= a = {a}")));
    }
    if !(b < a + 1.0) {
        return Err(CknError::region(format!("b = {b} must satisfy b < a + 1 = {}", a + 1.0)));
    }
    let gamma = 1.0 + a - b;
    let q = nf * p / (nf - p * gamma);
    let k = (nf - p) / (nf - p - a * p);
    Ok(CknParams {
        n,
        p,
        a,
        b,
        q,
        gamma,
        k,
    })
}

/// Closed-form sharp constant S(p, a, b) evaluated through Gamma functions.
pub fn sharp_constant(params: &CknParams) -> f64 {
    let n = params.n as f64;
    let p = params.p;
    let g = params.gamma;
    let gn = g / n;
    let pi = std::f64::consts::PI;
    let ln_gamma_ratio = ln_gamma(n / (g * p)) + ln_gamma(n * (p - 1.0) / (g * p))
        - ln_gamma(n / 2.0)
        - ln_gamma(n / g);
    let ln_s = n.ln() / p
        + (gn - 1.0 + 1.0 / p) * (p - 1.0).ln()
        + (gn - 1.0 / p) * (n - g * p).ln()
        + (1.0 - gn) * params.gap().ln()
        + gn * (2.0 * pi.powf(n / 2.0) / (p * g)).ln()
        + gn * ln_gamma_ratio;
    ln_s.exp()
}

/// Parameters for the hat transform between two tuples sharing p and γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HatParams {
    pub base: CknParams,
    pub target: CknParams,
    pub h: f64,
}

impl HatParams {
    /// ν = 1 + max{1, p − 1} γ / n.
    pub fn nu(&self) -> f64 {
        let p = self.base.p;
        1.0 + (p - 1.0).max(1.0) * self.base.gamma / self.base.n as f64
    }
}

/// Builds [`HatParams`] for base (a1, b1) and target (a2, b2); h = (n−p−a1 p)/(n−p−a2 p).
pub fn derive_hat_params(n: usize, p: f64, a1: f64, b1: f64, a2: f64, b2: f64) -> Result<HatParams> {
    let d1 = b1 - a1;
    let d2 = b2 - a2;
    if (d1 - d2).abs() > 1e-12 * (1.0 + d1.abs()) {
        return Err(CknError::GammaMismatch { base: d1, target: d2 });
    }
    let base = derive_params(n, p, a1, b1)?;
    let target = derive_params(n, p, a2, b2)?;
    let h = base.gap() / target.gap();
    Ok(HatParams { base, target, h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn classical_sobolev_tuple() {
        let p = derive_params(3, 2.0, 0.0, 0.0).unwrap();
        assert_eq!(p.q, 6.0);
        assert_eq!(p.gamma, 1.0);
        assert_eq!(p.k, 1.0);
    }

    #[test]
    fn weighted_tuple() {
        let p = derive_params(4, 2.0, 0.5, 0.5).unwrap();
        assert!((p.q - 4.0).abs() < 1e-15);
        assert_eq!(p.gamma, 1.0);
        assert!((p.k - 2.0).abs() < 1e-15);
    }

    #[test]
    fn region_violations() {
        for (n, p, a, b) in [
            (3, 2.0, 0.5, 0.0),
            (3, 2.0, 0.5, 1.5),
            (3, 1.0, 0.0, 0.0),
            (3, 3.0, 0.0, 0.0),
            (3, 2.0, -0.1, 0.0),
            (3, 2.0, 0.5, 0.5),
            (4, 2.0, 0.2, 1.2),
        ] {
            assert!(
                matches!(derive_params(n, p, a, b), Err(CknError::RegionViolation(_))),
                "{n} {p} {a} {b}"
            );
        }
    }

    #[test]
    fn sobolev_constant_value() {
        // S(2,0,0) in ℝ³ in the form S = √(n(n-2)/4) |S^n|^{1/n}.
        let p = derive_params(3, 2.0, 0.0, 0.0).unwrap();
        let talenti = (3.0f64 * 1.0 / 4.0).sqrt() * sphere_area(4).powf(1.0 / 3.0);
        assert!((sharp_constant(&p) - talenti).abs() < 1e-13 * talenti);
    }

    #[test]
    fn hat_params_examples() {
        let hp = derive_hat_params(4, 2.0, 0.0, 0.5, 0.5, 1.0).unwrap();
        assert!((hp.h - 2.0).abs() < 1e-15);
        let hp = derive_hat_params(4, 2.0, 0.5, 1.0, 0.5, 1.0).unwrap();
        assert_eq!(hp.h, 1.0);
        assert!(matches!(
            derive_hat_params(4, 2.0, 0.0, 0.5, 0.0, 1.0),
            Err(CknError::GammaMismatch { .. })
        ));
    }

    #[test]
    fn alpha_rule() {
        let p = derive_params(4, 3.0, 0.3, 0.3).unwrap();
        assert_eq!(p.stability_exponent(false), 6.0);
        assert_eq!(p.stability_exponent(true), 3.0);
        let p = derive_params(4, 2.0, 0.3, 0.3).unwrap();
        assert_eq!(p.stability_exponent(false), 2.0);
        let p = derive_params(4, 2.5, 0.2, 0.5).unwrap();
        assert_eq!(p.stability_exponent(false), 2.5);
    }

    fn region() -> impl Strategy<Value = (usize, f64, f64, f64)> {
        (3usize..7, 0.05f64..0.95, 0.0f64..0.98, 0.0f64..0.98).prop_map(|(n, sp, sa, sb)| {
            let nf = n as f64;
            let p = 1.0 + sp * (nf - 1.0);
            let a = sa * (nf - p) / p;
            let b = a + sb;
            (n, p, a, b)
        })
    }

    proptest! {
        #[test]
        fn invariants_hold((n, p, a, b) in region()) {
            let prm = derive_params(n, p, a, b).unwrap();
            let nf = n as f64;
            prop_assert!((prm.q * (nf - p * prm.gamma) - nf * p).abs() <= 1e-12 * nf * p);
            prop_assert!(prm.gamma > 0.0 && prm.gamma <= 1.0);
            prop_assert!(prm.k >= 1.0);
            prop_assert_eq!(prm.k == 1.0, a == 0.0);
            let again = derive_params(prm.n, prm.p, prm.a, prm.b).unwrap();
            prop_assert_eq!(again, prm);
            let s = sharp_constant(&prm);
            prop_assert!(s.is_finite() && s > 0.0);
        }

        #[test]
        fn ratio_law((n, p, a, b) in region()) {
            prop_assume!(a > 1e-6);
            let prm = derive_params(n, p, a, b).unwrap();
            let partner = prm.unweighted_partner().unwrap();
            let expected = prm.k.powf(1.0 / p - 1.0 - 1.0 / prm.q);
            let got = sharp_constant(&prm) / sharp_constant(&partner);
            prop_assert!((got - expected).abs() <= 1e-10 * expected, "{} vs {}", got, expected);
        }
    }
}
