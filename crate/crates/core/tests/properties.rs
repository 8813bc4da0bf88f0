use std::collections::BTreeMap;

use ecm_energy::ecm::{plain_performance, plain_utilization, predict_performance, utilization_curve};
use ecm_energy::files::{InputDigest, ModelFile, Provenance};
use ecm_energy::power::{p_chip, reference::snb_params};
use ecm_energy::stats::{coefficient_of_variation, fleet_summary, gaussian_fit, histogram, Bins, FleetSample};
use ecm_energy::synthetic;
use ecm_energy::{CoreCoeffs, EcmContributions, OperatingPoint, ScalingParams};
use proptest::prelude::*;

fn contributions() -> impl Strategy<Value = EcmContributions> {
    (0.0..50.0f64, 0.0..20.0f64, 0.0..20.0f64, 0.0..20.0f64, 0.1..60.0f64, 1.0..32.0f64).prop_map(
        |(t_comp, a, b, c, t_l3_mem, work_per_unit)| EcmContributions {
            t_comp,
            t_reg_l1: a,
            t_l1_l2: b,
            t_l2_l3: c,
            t_l3_mem,
            work_per_unit,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn utilization_is_bounded(c in contributions(), p0 in 0.0..40.0f64, n_max in 1u32..64) {
        let curve = utilization_curve(n_max, c.t_ecm(), c.t_l3_mem, p0).unwrap();
        prop_assert_eq!(curve[0], c.t_l3_mem / c.t_ecm());
        for u in curve {
            prop_assert!(u > 0.0 && u <= 1.0);
        }
    }

    #[test]
    fn refined_never_exceeds_plain(c in contributions(), p0 in 0.0..40.0f64, pi_bw in 1.0..1e11f64, n in 1u32..64) {
        let s = ScalingParams { p0, n_cores: 64, pi_bw, f_core: 2.0 };
        let refined = predict_performance(n, &c, &s).unwrap();
        let plain = plain_performance(n, &c, &s).unwrap();
        prop_assert!(refined <= plain);
        if n == 1 {
            prop_assert_eq!(refined, plain);
        }
    }

    #[test]
    fn zero_penalty_is_plain_model(c in contributions(), n in 1u32..64) {
        let curve = utilization_curve(n, c.t_ecm(), c.t_l3_mem, 0.0).unwrap();
        for (i, u) in curve.iter().enumerate() {
            let plain = plain_utilization(i as u32 + 1, c.t_ecm(), c.t_l3_mem).unwrap();
            prop_assert_eq!(u.to_bits(), plain.to_bits());
        }
    }

    #[test]
    fn chip_power_is_affine_in_cores(f in 1.2..2.7f64, eps in 0.05..1.0f64, n in 1u32..8) {
        let p = snb_params();
        let f = (f * 1e3).round() / 1e3;
        let d1 = p_chip(n + 1, f, f, eps, &p, "stream").unwrap() - p_chip(n, f, f, eps, &p, "stream").unwrap();
        let d0 = p_chip(1, f, f, eps, &p, "stream").unwrap() - p_chip(0, f, f, eps, &p, "stream").unwrap();
        prop_assert!((d1 - d0).abs() <= 1e-12 * d0.abs().max(1.0));
    }

    #[test]
    fn energy_times_performance_is_power(n in 1u32..=8, k in 0u32..16, kernel in prop::sample::select(vec!["dgemm", "stream"])) {
        let m = synthetic::snb_model();
        let f = 1.2 + k as f64 * 0.1;
        let f = (f * 1e9).round() / 1e9;
        let p = m.predict(kernel, OperatingPoint::new(n, f, f)).unwrap();
        let back = p.energy_per_work * p.performance;
        prop_assert!((back - p.power).abs() <= 4.0 * f64::EPSILON * p.power.abs());
    }

    #[test]
    fn histogram_is_normalized(values in prop::collection::vec(-1e3..1e3f64, 1..300), bins in 1usize..40) {
        for b in [Bins::Auto, Bins::Count(bins)] {
            let h = histogram(&values, b).unwrap();
            prop_assert_eq!(h.counts.iter().sum::<usize>(), values.len());
            prop_assert!((h.probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert_eq!(h.edges.len(), h.counts.len() + 1);
        }
    }

    #[test]
    fn cv_is_scale_invariant(values in prop::collection::vec(1.0..100.0f64, 2..50), k in 1e-3..1e3f64) {
        let scaled: Vec<f64> = values.iter().map(|v| v * k).collect();
        let a = coefficient_of_variation(&values).unwrap();
        let b = coefficient_of_variation(&scaled).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-12));
    }

    #[test]
    fn gaussian_is_translation_equivariant(values in prop::collection::vec(-10.0..10.0f64, 2..50), c in -100.0..100.0f64) {
        let shifted: Vec<f64> = values.iter().map(|v| v + c).collect();
        let a = gaussian_fit(&values).unwrap();
        let b = gaussian_fit(&shifted).unwrap();
        prop_assert!((b.mean - (a.mean + c)).abs() <= 1e-10);
        prop_assert!((b.std - a.std).abs() <= 1e-9);
    }

    #[test]
    fn fleet_summary_ignores_chip_order(values in prop::collection::vec((0.0..10.0f64, 0.0..10.0f64), 3..30), seed in any::<u64>()) {
        let chips: Vec<String> = (0..values.len()).map(|i| format!("c{i:02}")).collect();
        let sample = |order: &[usize]| {
            vec![
                FleetSample { parameter: "a".into(), values: order.iter().map(|&i| (chips[i].clone(), values[i].0)).collect() },
                FleetSample { parameter: "b".into(), values: order.iter().map(|&i| (chips[i].clone(), values[i].1)).collect() },
            ]
        };
        let identity: Vec<usize> = (0..values.len()).collect();
        let mut shuffled = identity.clone();
        let len = shuffled.len();
        let mut s = seed;
        for i in (1..len).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(fleet_summary(&sample(&identity)).unwrap(), fleet_summary(&sample(&shuffled)).unwrap());
    }

    #[test]
    fn model_file_round_trip_is_lossless(w in prop::array::uniform3(-100.0..100.0f64), alpha in 0.0..2.0f64, p0 in 0.0..30.0f64, scale in 1e-12..1e12f64) {
        let mut model = synthetic::bdw_model();
        model.power.baseline.segments[1].w0 = w[0] * scale;
        model.power.baseline.segments[1].w1 = w[1];
        model.power.baseline.segments[1].w2 = w[2] / scale;
        model.power.per_kernel_core.insert("stream".into(), CoreCoeffs { w0: w[0], w1: w[1], w2: w[2], alpha });
        model.kernels.get_mut("stream").unwrap().set_p0(p0);
        let provenance = Provenance {
            fitted_at: "2020-01-01T00:00:00Z".into(),
            inputs: vec![InputDigest { path: "x.csv".into(), sha256: "ab".into() }],
        };
        let file = ModelFile::new("bdw-07".into(), model.clone(), BTreeMap::new(), provenance).unwrap();
        let back = ModelFile::from_json(&file.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.model(), model);
        prop_assert_eq!(back, file);
    }
}
