mod common;

use common::{any_expr, at, smooth_expr};
use mslab::dsl::{parse_expression, Var};
use mslab::experiments::{fit_rate, CurvePoint, ErrorCurve};
use mslab::homogenize::psd_sqrt;
use mslab::model::{
    classify_averaging_regime, classify_deviation_regime, predicted_strong_rate, predicted_weak_rate,
    RateModel, ScaleSchedule,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn printed_expressions_parse_back(e in any_expr()) {
        let text = e.to_string();
        let back = parse_expression(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(&back, &e, "{}", text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn symbolic_derivative_matches_finite_differences(
        e in smooth_expr(),
        which in 0usize..3,
        p in (-1.5f64..1.5, -1.5f64..1.5, 0.0f64..1.0),
    ) {
        let (x, y, t) = p;
        let v = [Var::X(0), Var::Y(0), Var::T][which];
        let d = e.differentiate(v);
        let Some(exact) = at(&d, t, x, y) else { return Ok(()) };
        let shifted = |k: f64| {
            let h = 1e-3 * k;
            match v {
                Var::X(_) => at(&e, t, x + h, y),
                Var::Y(_) => at(&e, t, x, y + h),
                _ => at(&e, t + h, x, y),
            }
        };
        let (Some(m2), Some(m1), Some(p1), Some(p2)) = (shifted(-2.0), shifted(-1.0), shifted(1.0), shifted(2.0))
        else { return Ok(()) };
        let f0 = at(&e, t, x, y).unwrap_or(0.0);
        // five-point stencil, truncation O(h^4)
        let fd = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / 12e-3;
        let scale = exact.abs().max(f0.abs()).max(1.0);
        prop_assume!(scale < 1e6);
        prop_assert!((exact - fd).abs() <= 1e-6 * scale, "{e} d/d{v}: symbolic {exact}, fd {fd}");
    }

    #[test]
    fn simplification_preserves_values(e in smooth_expr(), x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let (Some(a), Some(b)) = (at(&e, 0.3, x, y), at(&e.simplify(), 0.3, x, y)) else { return Ok(()) };
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{e}: {a} vs {b}");
    }
}

fn grid_schedule() -> impl Strategy<Value = (f64, f64, f64)> {
    (1u32..12, 0u32..20, 0u32..12).prop_map(|(a, b, g)| (a as f64 / 4.0, b as f64 / 4.0, g as f64 / 4.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    /// Exponents are homogeneous of degree one in `(a, b, g)`.
    #[test]
    fn regimes_and_rates_scale_with_the_schedule(s in grid_schedule(), lam in prop_oneof![Just(0.5), Just(2.0), Just(3.0)], h in any::<bool>()) {
        let (a, b, g) = s;
        let Ok(base) = ScaleSchedule::new(a, b, g) else {
            prop_assert!(ScaleSchedule::new(lam * a, lam * b, lam * g).is_err());
            return Ok(());
        };
        let scaled = ScaleSchedule::new(lam * a, lam * b, lam * g).unwrap();
        let c1 = classify_averaging_regime(&base, h);
        let c2 = classify_averaging_regime(&scaled, h);
        prop_assert_eq!(c1, c2);
        let rm = RateModel::default();
        match (predicted_strong_rate(&base, c1, &rm), predicted_strong_rate(&scaled, c2, &rm)) {
            (Ok(r1), Ok(r2)) => prop_assert!((lam * r1 - r2).abs() < 1e-12),
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "{x:?} vs {y:?}"),
        }
        match (classify_deviation_regime(&base, c1), classify_deviation_regime(&scaled, c2)) {
            (Ok(d1), Ok(d2)) => {
                prop_assert_eq!(d1.tag, d2.tag);
                prop_assert!((lam * d1.eta_exp - d2.eta_exp).abs() < 1e-12);
                prop_assert!(d1.eta_exp > 0.0);
                let w1 = predicted_weak_rate(&base, &d1, &rm);
                let w2 = predicted_weak_rate(&scaled, &d2, &rm);
                prop_assert!((lam * w1 - w2).abs() < 1e-12);
            }
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "{x:?} vs {y:?}"),
        }
    }

    #[test]
    fn fit_recovers_exact_power_laws(slope in -1.0f64..4.0, c in 0.01f64..100.0, n in 3usize..8) {
        let points = (0..n)
            .map(|k| {
                let eps = 2f64.powi(-(k as i32) - 2);
                CurvePoint { eps, error: c * eps.powf(slope), stderr: 0.0, exploded_fraction: 0.0 }
            })
            .collect();
        let curve = ErrorCurve {
            kind: "strong".into(),
            regime: String::new(),
            q: 2.0,
            functionals: vec![],
            points,
            profile: vec![],
            predicted_slope: None,
        };
        let f = fit_rate(&curve).unwrap();
        prop_assert!((f.slope - slope).abs() < 1e-9);
        prop_assert!((f.intercept - c.log2()).abs() < 1e-9);
    }

    /// `psd_sqrt` of a PSD matrix squares back to it.
    #[test]
    fn psd_root_squares_back(v in proptest::collection::vec(-2.0f64..2.0, 9)) {
        let d = 3;
        let mut m = vec![0.0; 9];
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] = (0..d).map(|k| v[i * d + k] * v[j * d + k]).sum();
            }
        }
        let (r, rep) = psd_sqrt(&m, d, 1e-9).unwrap();
        prop_assert!(rep.clamped <= 1e-9 * rep.total.max(1.0));
        for i in 0..d {
            for j in 0..d {
                let sq: f64 = (0..d).map(|k| r[i * d + k] * r[k * d + j]).sum();
                prop_assert!((sq - m[i * d + j]).abs() < 1e-8 * (1.0 + m[i * d + i].abs() + m[j * d + j].abs()));
                prop_assert!((r[i * d + j] - r[j * d + i]).abs() < 1e-10);
            }
        }
    }
}
