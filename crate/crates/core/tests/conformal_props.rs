use proptest::prelude::*;

use fracyamabe::conformal::{
    bubble, grad_quotient, harnack_quotient, kelvin_transform, stereographic_inverse,
    stereographic_projection, stroock_varopoulos_check, PointCloudField,
};
use fracyamabe::extension::{check_harnack_fks, BoundaryData, HarnackExperiment};
use fracyamabe::profiles::random_smooth_positive;
use fracyamabe::Grid;

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-1.0f64..1.0, dim), -4.0f64..6.0).prop_map(|(d, e)| {
        let len = d.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        d.iter().map(|v| 10f64.powf(e) * v / len).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stereographic_lands_on_sphere(x in (1usize..5).prop_flat_map(point)) {
        let s = stereographic_inverse(&x);
        let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() <= 1e-14);
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r < 1e3 {
            let back = stereographic_projection(&s);
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-12 * r.max(1.0));
            }
        }
    }

    #[test]
    fn kelvin_is_an_involution(
        pts in prop::collection::vec(point(3), 1..20),
        n in 1usize..6,
        gamma in 0.05f64..0.5,
    ) {
        let f = PointCloudField::from_fn(pts, |x| 2.0 + x[0].sin());
        let twice = kelvin_transform(&kelvin_transform(&f, n, gamma).unwrap(), n, gamma).unwrap();
        for (a, b) in f.values().iter().zip(twice.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }
        for (p, q) in f.points().iter().zip(twice.points()) {
            for (a, b) in p.iter().zip(q) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn bubble_is_kelvin_invariant(pts in prop::collection::vec(point(2), 1..20), gamma in 0.05f64..0.95) {
        let b = PointCloudField::from_fn(pts, |x| bubble(x, 2, gamma));
        let k = kelvin_transform(&b, 2, gamma).unwrap();
        for (y, v) in k.points().iter().zip(k.values()) {
            prop_assert!((v - bubble(y, 2, gamma)).abs() <= 1e-12 * v);
        }
    }

    #[test]
    fn stroock_varopoulos_holds(seed in any::<u64>(), amp in 0.1f64..2.0, q in 1.05f64..4.0, gamma in 0.05f64..0.95) {
        let g = Grid::periodic(1, 64).unwrap();
        let v = random_smooth_positive(&g, 1.0, amp, 8, seed);
        let rep = stroock_varopoulos_check(&v, gamma, q).unwrap();
        prop_assert!(rep.holds(1e-10 * rep.lhs.abs().max(1.0)), "{:?}", rep);
    }
}

#[test]
fn unit_sphere_samples_are_unchanged_by_kelvin() {
    let pts: Vec<Vec<f64>> = (0..50)
        .map(|k| {
            let t = 0.37 * k as f64;
            vec![t.cos(), t.sin()]
        })
        .collect();
    let f = PointCloudField::from_fn(pts.clone(), |_| 1.0);
    let k = kelvin_transform(&f, 4, 0.3).unwrap();
    for (v, (p, q)) in k.values().iter().zip(pts.iter().zip(k.points())) {
        assert!((v - 1.0).abs() < 1e-15);
        assert!((p[0] - q[0]).abs() < 1e-15 && (p[1] - q[1]).abs() < 1e-15);
    }
}

#[test]
fn smooth_fields_have_moderate_quotients() {
    let g = Grid::periodic(2, 32).unwrap();
    let v = random_smooth_positive(&g, 1.0, 0.5, 3, 1);
    let h = harnack_quotient(&v).unwrap();
    assert!(h >= 1.0 && h <= 0.5f64.exp().powi(2) + 1e-12);
    assert!(grad_quotient(&v).unwrap().is_finite());
}

#[test]
fn box_harnack_quotient_is_scale_invariant() {
    for gamma in [0.3, 0.5, 0.7] {
        let exp = HarnackExperiment {
            gamma,
            trials: 4,
            cells_per_radius: 8,
            seed: 3,
            ..HarnackExperiment::default()
        };
        let rep = check_harnack_fks(&exp).unwrap();
        assert!(rep
            .scales
            .iter()
            .all(|s| s.max_ratio >= 1.0 && s.max_ratio < 10.0));
        assert!(rep.scale_spread < 1.5, "gamma={gamma}: {}", rep.scale_spread);
    }
}

#[test]
fn box_harnack_handles_vanishing_data() {
    let exp = HarnackExperiment {
        gamma: 0.7,
        trials: 3,
        cells_per_radius: 8,
        data: BoundaryData::VanishingCorner,
        ..HarnackExperiment::default()
    };
    let rep = check_harnack_fks(&exp).unwrap();
    assert!(rep.scales.iter().all(|s| s.max_ratio.is_finite()));
}

#[test]
fn box_harnack_default_experiment_spread() {
    let rep = check_harnack_fks(&HarnackExperiment::default()).unwrap();
    assert_eq!(rep.scales[0].ratios.len(), 50);
    assert!(
        rep.scale_spread <= 1.2,
        "{:?}",
        rep.scales.iter().map(|s| s.max_ratio).collect::<Vec<_>>()
    );
}
