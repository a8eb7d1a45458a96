use ckn_lab::bubble::{default_grid, Bubble};
use ckn_lab::critical::elementary_ratio;
use ckn_lab::functionals::functional_report;
use ckn_lab::{derive_params, sharp_constant};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// sqrt(pi n (n-2)) (Gamma(n/2)/Gamma(n))^(1/n), evaluated with an independent lgamma.
const AUBIN_TALENTI: [(usize, f64); 6] = [
    (3, 2.3404922750420116),
    (4, 3.2031857019684185),
    (5, 3.848624653042426),
    (6, 4.388559748422391),
    (7, 4.863282399879984),
    (8, 5.292497289563744),
];

// General-p unweighted constant, same independent evaluation.
const TALENTI: [(usize, f64, f64); 5] = [
    (3, 1.5, 3.8383165853550256),
    (4, 2.5, 2.118249623705029),
    (4, 3.0, 1.3101942137519436),
    (5, 4.0, 0.8327845068206126),
    (8, 3.0, 3.112088007771366),
];

// Rayleigh quotient of (1 + r^{(n-2)(q-2)/2})^{-2/(q-2)} by 30-digit adaptive quadrature.
const HARDY_SOBOLEV: [(usize, f64, f64); 3] = [
    (3, 0.5, 1.1891374690170068),
    (4, 0.3, 2.3669505943074819),
    (5, 0.8, 1.8817885275170626),
];

#[test]
fn closed_form_matches_classical_sobolev_constants() {
    for (n, s) in AUBIN_TALENTI {
        let prm = derive_params(n, 2.0, 0.0, 0.0).unwrap();
        assert!(rel(sharp_constant(&prm), s) <= 1e-12, "n = {n}");
    }
    for (n, p, s) in TALENTI {
        let prm = derive_params(n, p, 0.0, 0.0).unwrap();
        assert!(rel(sharp_constant(&prm), s) <= 1e-12, "n = {n}, p = {p}");
    }
}

#[test]
fn closed_form_matches_hardy_sobolev_quadrature() {
    for (n, b, s) in HARDY_SOBOLEV {
        let prm = derive_params(n, 2.0, 0.0, b).unwrap();
        assert!(rel(sharp_constant(&prm), s) <= 1e-12, "n = {n}, b = {b}");
    }
}

#[test]
fn equal_weights_follow_the_k_power_of_the_unweighted_constant() {
    for (n, p, s) in TALENTI {
        for frac in [0.2, 0.5, 0.9] {
            let a = frac * (n as f64 - p) / p;
            let prm = derive_params(n, p, a, a).unwrap();
            let expect = prm.k.powf(1.0 / p - 1.0 - 1.0 / prm.q) * s;
            assert!(rel(sharp_constant(&prm), expect) <= 1e-12, "n = {n}, p = {p}, a = {a}");
        }
    }
}

#[test]
fn derived_exponents() {
    let flat = derive_params(3, 2.0, 0.0, 0.0).unwrap();
    assert_eq!((flat.q, flat.gamma, flat.k), (6.0, 1.0, 1.0));
    let w = derive_params(4, 2.5, 0.2, 0.5).unwrap();
    assert!(rel(w.q, 10.0 / 2.25) <= 1e-15);
    assert!(rel(w.gamma, 0.7) <= 1e-15);
    assert!(rel(w.k, 1.5) <= 1e-15);
}

#[test]
fn extremal_rayleigh_quotient_reaches_the_constant() {
    for (n, p, a, b) in [(3, 2.0, 0.0, 0.0), (4, 2.5, 0.2, 0.5), (5, 3.0, 0.1, 0.1), (6, 1.5, 1.0, 1.3)] {
        let prm = derive_params(n, p, a, b).unwrap();
        let g = default_grid(&prm);
        let v = Bubble::canonical(&prm, 1.7).unwrap().field(&prm, &g, None).unwrap();
        let rep = functional_report(&v, &prm).unwrap();
        let quotient = rep.grad_term.powf(1.0 / p) / rep.q_term.powf(1.0 / prm.q);
        assert!(rel(quotient, sharp_constant(&prm)) <= 1e-9, "{n} {p} {a} {b}: {quotient}");
    }
}

#[test]
fn elementary_ratio_is_jointly_homogeneous() {
    for case in 1..=6u8 {
        let e = if matches!(case, 1 | 3 | 5) { 2.5 } else { 4.0 };
        let (x, y) = ([0.8, 0.0], [0.3, -0.5]);
        let r = elementary_ratio(case, e, x, y);
        let scaled = elementary_ratio(case, e, [8.0, 0.0], [3.0, -5.0]);
        assert!(rel(scaled, r) <= 1e-12, "case {case}");
    }
}
