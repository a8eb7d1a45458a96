use std::sync::Arc;

use proptest::prelude::*;

use ckn_lab::bubble::Bubble;
use ckn_lab::critical::elementary_ratio;
use ckn_lab::experiment::config::{ExperimentConfig, Operation, ParamTuple, Tolerance};
use ckn_lab::field::{AnalyticShape, AxisymField, Field, RadialProfile};
use ckn_lab::functionals::{d_norm, raw_deficit};
use ckn_lab::grid::{default_range_truncated, AngularRule, GridRef, RadialGrid};
use ckn_lab::manifold::manifold_distance;
use ckn_lab::snapshot::{read_snapshot, write_snapshot};
use ckn_lab::transforms::{horiuchi_map, transform_identity_check, Direction};
use ckn_lab::{derive_params, CknParams};

/// (n, p, a, b) inside the region whose default grid reaches the full e^{-36}
/// tail range.
fn tuple() -> impl Strategy<Value = (usize, f64, f64, f64)> {
    (3usize..7, 0.1f64..0.9, 0.0f64..0.8, 0.0f64..0.9)
        .prop_map(|(n, pf, af, bf)| {
            let p = 1.2 + pf * (n as f64 - 1.4);
            let a = af * (n as f64 - p) / p;
            let b = a + bf;
            (n, p, a, b)
        })
        .prop_filter("tail range not representable", |&t| !default_range_truncated(&params(t)))
}

fn params(t: (usize, f64, f64, f64)) -> CknParams {
    derive_params(t.0, t.1, t.2, t.3).unwrap()
}

fn grid(prm: &CknParams) -> GridRef {
    Arc::new(RadialGrid::for_params_with_density(prm, 12.0))
}

fn bumps(g: &GridRef, terms: &[(f64, f64, f64)]) -> Field {
    let shape = AnalyticShape::Combination(
        terms
            .iter()
            .map(|&(c, w, amp)| {
                (
                    1.0,
                    AnalyticShape::LogGaussian {
                        amplitude: amp,
                        center: c,
                        width: w,
                    },
                )
            })
            .collect(),
    );
    Field::Radial(RadialProfile::from_shape(g.clone(), shape))
}

fn terms() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-2.0f64..2.0, 0.3f64..1.5, -1.0f64..1.0), 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn inequality_holds_for_perturbed_bubbles(t in tuple(), ts in terms(), eps in 0.01f64..1.0) {
        let prm = params(t);
        let g = grid(&prm);
        let v = Bubble::canonical(&prm, 1.0).unwrap().field(&prm, &g, None).unwrap();
        let u = v.add_scaled(eps, &bumps(&g, &ts)).unwrap();
        prop_assume!(!u.is_zero());
        let d = raw_deficit(&u, &prm).unwrap();
        prop_assert!(d >= -1e-8, "deficit {d}");
    }

    #[test]
    fn horiuchi_identities_on_radial_fields(t in tuple(), ts in terms()) {
        let prm = params(t);
        prop_assume!(prm.a > 1e-3);
        let g = grid(&prm);
        let u = bumps(&g, &ts);
        prop_assume!(!u.is_zero());
        let rep = transform_identity_check(&u, &prm).unwrap();
        prop_assert!(rep.q_norm_residual <= 1e-8);
        prop_assert!(rep.grad_identity_residual <= 1e-8);
        prop_assert!(rep.grad_drop_gap.abs() <= 1e-8 * rep.grad_rhs.abs().max(1e-300));
    }

    #[test]
    fn horiuchi_round_trip_is_exact(t in tuple(), ts in terms()) {
        let prm = params(t);
        let g = grid(&prm);
        let u = bumps(&g, &ts);
        let there = horiuchi_map(&u, &prm, Direction::Forward).unwrap();
        let back = horiuchi_map(&there, &prm, Direction::Inverse).unwrap();
        prop_assert!(back.grid().same_as(u.grid()));
        for (x, y) in back.values().iter().zip(u.values()) {
            prop_assert!((x - y).abs() <= 1e-13 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn gradient_drop_is_nonnegative_on_axisym_fields(t in tuple(), c in -1.5f64..1.5, w in 0.4f64..1.2, tilt in -0.9f64..0.9) {
        let prm = params(t);
        prop_assume!(prm.a > 1e-3);
        let g = grid(&prm);
        let ang = Arc::new(AngularRule::new(prm.n, 24).unwrap());
        let u = Field::Axisym(AxisymField::from_fn(g, ang, |r, psi| {
            let s = r.ln() - c;
            let e = (-s * s / (2.0 * w * w)).exp();
            let m = 1.0 + tilt * psi.cos();
            (e * m, -e * s / (w * w * r) * m, -e * tilt * psi.sin())
        }));
        let rep = transform_identity_check(&u, &prm).unwrap();
        prop_assert!(rep.q_norm_residual <= 1e-8);
        prop_assert!(rep.grad_drop_gap >= 0.0);
    }

    #[test]
    fn d_norm_is_absolutely_homogeneous(t in tuple(), ts in terms(), c in -5.0f64..5.0) {
        let prm = params(t);
        let u = bumps(&grid(&prm), &ts);
        let n1 = d_norm(&u, &prm).unwrap();
        let n2 = d_norm(&u.scaled(c), &prm).unwrap();
        prop_assert!((n2 - c.abs() * n1).abs() <= 1e-12 * (1.0 + n2));
    }

    #[test]
    fn snapshots_round_trip_bit_for_bit(t in tuple(), ts in terms()) {
        let prm = params(t);
        let u = bumps(&grid(&prm), &ts);
        let mut buf = Vec::new();
        write_snapshot(&u, &mut buf).unwrap();
        let back = read_snapshot(buf.as_slice()).unwrap();
        prop_assert_eq!(back, u);
    }

    #[test]
    fn elementary_ratio_is_scale_free(
        case in 1u8..=6,
        x in (0.1f64..3.0, -3.0f64..3.0),
        y in (-3.0f64..3.0, -3.0f64..3.0),
        lam in 0.01f64..100.0,
    ) {
        let e = if matches!(case, 1 | 3 | 5) { 2.7 } else { 4.2 };
        let r = elementary_ratio(case, e, [x.0, x.1], [y.0, y.1]);
        let s = elementary_ratio(case, e, [lam * x.0, lam * x.1], [lam * y.0, lam * y.1]);
        prop_assume!(r.is_finite());
        prop_assert!((r - s).abs() <= 1e-10 * r.abs().max(1e-300));
    }

    #[test]
    fn configs_round_trip(t in tuple(), bound in 1e-12f64..1e3, seed in 0..=i64::MAX as u64) {
        let mut cfg = ExperimentConfig::with_defaults(
            Operation::StabilityScan,
            Some(ParamTuple { n: t.0, p: t.1, a: t.2, b: t.3 }),
            None,
        );
        cfg.seed = seed;
        cfg.tolerances.insert("min_ratio".into(), Tolerance::Max(bound));
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn bubbles_lie_on_the_manifold(t in tuple(), scale in 0.3f64..3.0, factor in 0.5f64..2.0) {
        let prm = params(t);
        let g = grid(&prm);
        let canon = Bubble::canonical(&prm, scale).unwrap();
        let v = Bubble::new(canon.amplitude * factor, canon.scale, 0.0)
            .unwrap()
            .field(&prm, &g, None)
            .unwrap();
        let (dist, _) = manifold_distance(&v, &prm).unwrap();
        prop_assert!(dist <= 1e-6 * d_norm(&v, &prm).unwrap(), "{dist}");
    }
}
