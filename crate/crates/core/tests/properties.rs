use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use zcrit::asymptotics::fit_expansion;
use zcrit::charforms::z_integral_check;
use zcrit::curvature::curvature_at;
use zcrit::functions::{Field, RadialBump, SphereX, Sum};
use zcrit::model::metric_from_jet;
use zcrit::quantization::{bergman_density, gram, kostant_souriau, section_basis};
use zcrit::report::{Check, Comparison, Report};
use zcrit::KahlerModel;

fn perturbed_cp1() -> &'static KahlerModel {
    static M: OnceLock<KahlerModel> = OnceLock::new();
    M.get_or_init(|| {
        KahlerModel::fubini_study_with_level(1, 1.0, 16)
            .unwrap()
            .perturb(Arc::new(RadialBump { coord: 0, m: 2 }), 0.1)
            .unwrap()
    })
}

fn cp2() -> &'static KahlerModel {
    static M: OnceLock<KahlerModel> = OnceLock::new();
    M.get_or_init(|| KahlerModel::fubini_study_with_level(2, 1.0, 8).unwrap())
}

fn point(re: &[f64], im: &[f64]) -> Vec<C64> {
    re.iter().zip(im).map(|(&a, &b)| C64::new(a, b)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn metric_is_hermitian_positive(re in prop::collection::vec(-3.0..3.0f64, 2), im in prop::collection::vec(-3.0..3.0f64, 2)) {
        let m = cp2();
        let p = point(&re, &im);
        let g = metric_from_jet(&m.chart.adapted_potential_jet(&p, 2));
        let defect = (&g - g.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(defect < 1e-12);
        prop_assert!(zcrit::model::hermitian_min_eigenvalue(&g) > 0.0);
    }

    #[test]
    fn curvature_is_torus_invariant(r in 0.05..4.0f64, theta in 0.0..std::f64::consts::TAU) {
        let m = perturbed_cp1();
        let a = curvature_at(m, &[C64::new(r, 0.0)]).unwrap();
        let b = curvature_at(m, &[C64::from_polar(r, theta)]).unwrap();
        prop_assert!((a.scalar - b.scalar).abs() < 1e-10 * a.scalar.abs().max(1.0));
    }

    #[test]
    fn gauss_bonnet_under_perturbation(eps in -0.2..0.2f64) {
        let m = KahlerModel::fubini_study_with_level(1, 1.0, 16)
            .unwrap()
            .perturb(Arc::new(RadialBump { coord: 0, m: 3 }), eps)
            .unwrap();
        let r = z_integral_check(&m, 1).unwrap();
        prop_assert!((r.integral - 1.0).abs() < 1e-8);
    }

    #[test]
    fn mixed_gram_is_hermitian_and_density_basis_free(entries in prop::collection::vec(-0.3..0.3f64, 32)) {
        let m = perturbed_cp1();
        let b = section_basis(m, 3).unwrap();
        let d = b.dimension();
        let mix = DMatrix::from_fn(d, d, |i, j| {
            let z = C64::new(entries[2 * (i * d + j)], entries[2 * (i * d + j) + 1]);
            if i == j { z + 1.0 } else { z }
        });
        let plain = m.to_full(&bergman_density(m, &b, &gram(m, &b).unwrap()).unwrap()).unwrap();
        let mixed = b.with_mixing(mix).unwrap();
        let g = gram(m, &mixed).unwrap();
        prop_assert!(g.hermitian_defect() < 1e-12 * g.matrix.norm());
        let rho = bergman_density(m, &mixed, &g).unwrap();
        for (a, c) in plain.values.iter().zip(&rho.values) {
            prop_assert!((a - c).norm() < 1e-8 * a.norm());
        }
    }

    #[test]
    fn kostant_souriau_skew_for_random_hamiltonians(c in prop::collection::vec(-1.0..1.0f64, 3)) {
        let m = perturbed_cp1();
        let f: Field = Arc::new(Sum(vec![
            (c[0], Arc::new(RadialBump { coord: 0, m: 2 }) as Field),
            (c[1], Arc::new(RadialBump { coord: 0, m: 4 })),
            (c[2], Arc::new(SphereX { coord: 0 })),
        ]));
        let b = section_basis(m, 4).unwrap();
        let g = gram(m, &b).unwrap();
        let op = kostant_souriau(m, &b, &g, f.as_ref()).unwrap();
        prop_assert!(op.skew_hermitian_defect() < 1e-12);
    }

    #[test]
    fn expansion_fit_recovers_polynomials(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64) {
        let samples: Vec<(f64, f64)> = [8.0, 12.0, 16.0, 24.0, 32.0]
            .iter()
            .map(|&k: &f64| (k, a * k * k + b * k + c))
            .collect();
        let fit = fit_expansion(&samples, &[2, 1, 0]).unwrap();
        prop_assert!((fit.coefficient(2).unwrap() - a).abs() < 1e-9);
        prop_assert!((fit.coefficient(1).unwrap() - b).abs() < 1e-7);
        prop_assert!((fit.coefficient(0).unwrap() - c).abs() < 1e-6);
    }

    #[test]
    fn report_json_round_trips_bitwise(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 1..6)) {
        let mut r = Report::new("abc".into(), "bergman", "fs1");
        for (i, &v) in values.iter().enumerate() {
            r.push(Check::new(format!("density_integral[k={i}]"), v, 1.0, Comparison::Relative, 1e-10));
            r.value(format!("v{i}"), v);
        }
        let text = r.to_json_string();
        let back = Report::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        prop_assert_eq!(back.to_json_string(), text);
        for ((_, a), (_, b)) in back.values.iter().zip(&r.values) {
            prop_assert_eq!(a.to_bits(), (if *b == 0.0 { 0.0 } else { *b }).to_bits());
        }
    }
}
