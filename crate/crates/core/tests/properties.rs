use std::sync::OnceLock;

use proptest::prelude::*;

use hypfield::bumps::{m_of_r_omega, BumpConfig};
use hypfield::field::{
    ExternalInput, FieldGrid, FieldModel, FiringRate, InitialCondition, InputConvention, KernelMatrix,
    Simulation,
};
use hypfield::geometry::DiskPoint;
use hypfield::kernels::RadialKernel;
use hypfield::stationary::{picard_stationary, ContractionCertificate};
use hypfield::verify::{m_oracle, m_oracle_at, Scheme};

fn small_matrix() -> &'static (FieldGrid, KernelMatrix) {
    static M: OnceLock<(FieldGrid, KernelMatrix)> = OnceLock::new();
    M.get_or_init(|| {
        let grid = FieldGrid::new(0.5, 6, 8).unwrap();
        let k = RadialKernel::diff_gaussians(0.1, 0.2, 1.0).unwrap();
        let m = KernelMatrix::assemble(&grid, &k).unwrap();
        (grid, m)
    })
}

fn bump_config() -> &'static BumpConfig {
    static C: OnceLock<BumpConfig> = OnceLock::new();
    C.get_or_init(|| {
        BumpConfig::new(1.0, 0.04, RadialKernel::exponential(0.2).unwrap(), 0.04, 0.05).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrix_depends_on_angle_difference_only(
        i in 0usize..=6, k in 0usize..=6, j in 0usize..8, l in 0usize..8, s in 0usize..8
    ) {
        let (g, m) = small_matrix();
        let a = m.get(g.index(i, j), g.index(k, l));
        let b = m.get(g.index(i, (j + s) % 8), g.index(k, (l + s) % 8));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn matrix_symmetric_up_to_weights(i in 1usize..=6, k in 1usize..=6, j in 0usize..=8, l in 0usize..=8) {
        let (g, m) = small_matrix();
        let (qi, qk) = (g.weights()[i], g.weights()[k]);
        let a = m.get(g.index(i, j), g.index(k, l)) / qk;
        let b = m.get(g.index(k, l), g.index(i, j)) / qi;
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn sigmoid_ranges_and_slope(mu in 0.1f64..40.0, x in -5.0f64..5.0) {
        let s = FiringRate::Sigmoid { mu };
        let v = s.eval(x);
        prop_assert!(v > 0.0 && v < 1.0 || (x.abs() * mu > 30.0 && (0.0..=1.0).contains(&v)));
        let h = 1e-6;
        let slope = (s.eval(x + h) - s.eval(x - h)) / (2.0 * h);
        prop_assert!(slope <= mu / 4.0 * (1.0 + 1e-6));
        let shifted = FiringRate::ShiftedSigmoid { mu }.eval(x);
        prop_assert!(shifted >= -0.5 && shifted <= 0.5);
        prop_assert!((shifted - (v - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn certificate_margin_is_linear_in_mu(mu in 0.0f64..20.0, w0 in 0.01f64..5.0, alpha in 0.01f64..2.0) {
        let c = ContractionCertificate::for_rate(FiringRate::Sigmoid { mu }, w0, alpha);
        prop_assert!((c.margin - (alpha - mu * 0.25 * w0)).abs() < 1e-12);
        prop_assert_eq!(c.is_contraction(), mu < c.threshold_mu());
    }

    #[test]
    fn m_decreases_in_r(r in 0.02f64..1.2, omega in 0.05f64..0.8) {
        let cfg = bump_config();
        let h = 1e-3;
        let d = m_of_r_omega(cfg, r + h, omega).unwrap() - m_of_r_omega(cfg, r - h, omega).unwrap();
        prop_assert!(d < 0.0, "M(r, ω) increased at r = {}, ω = {}", r, omega);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn trajectories_respect_norm_envelope(seed in 0u64..1000, amp in 0.0f64..3.0, b in 0.15f64..0.4) {
        let grid = FieldGrid::new(0.5, 6, 10).unwrap();
        let k = RadialKernel::gabor_squared_width(b).unwrap();
        let input = ExternalInput::GaussianBump { i0: 0.1, sigma: 0.1, convention: InputConvention::SigmaSq };
        let model = FieldModel::new(grid, &k, FiringRate::Sigmoid { mu: 10.0 }, 0.1, input).unwrap();
        let sim = Simulation::new(&model, InitialCondition::Noise { amplitude: amp, seed }, vec![0.0, 5.0, 20.0, 60.0]);
        // The run fails if any snapshot leaves the envelope.
        let tr = sim.run().unwrap();
        prop_assert!(tr.bounds.worst_excess <= 1e-6);
    }

    #[test]
    fn picard_fixed_point_is_unique(seed_a in 0u64..1000, seed_b in 0u64..1000) {
        let grid = FieldGrid::new(0.5, 6, 10).unwrap();
        let k = RadialKernel::exponential(0.2).unwrap();
        let input = ExternalInput::GaussianBump { i0: 0.2, sigma: 0.1, convention: InputConvention::SigmaSq };
        let model = FieldModel::new(grid.clone(), &k, FiringRate::Sigmoid { mu: 1.0 }, 0.5, input).unwrap();
        prop_assert!(ContractionCertificate::for_model(&model).unwrap().is_contraction());
        let tol = 1e-11;
        let start = |s| InitialCondition::Noise { amplitude: 10.0, seed: s }.realize(&grid).unwrap();
        let a = picard_stationary(&model, &start(seed_a), tol, 10_000).unwrap();
        let b = picard_stationary(&model, &start(seed_b), tol, 10_000).unwrap();
        let gap = a.values.iter().zip(&b.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        prop_assert!(gap < 2.0 * tol / model.alpha() * 10.0, "gap {}", gap);
    }
}

#[test]
fn m_oracle_vanishing_cases() {
    let g = RadialKernel::gabor_squared_width(0.3).unwrap();
    assert_eq!(m_oracle(&g, 0.4, 0.0, 1e-10).unwrap(), 0.0);
    assert!(m_oracle(&g, 5.0, 0.1, 1e-10).unwrap().abs() < 1e-8);
}

#[test]
fn m_oracle_is_rotation_invariant() {
    let g = RadialKernel::gabor_squared_width(0.3).unwrap();
    let scheme = Scheme::TensorGaussLegendre {
        n_r: 200,
        n_theta: 400,
    };
    let values: Vec<f64> = [0.0, 1.0, 2.0]
        .iter()
        .map(|&t| {
            m_oracle_at(&g, DiskPoint::from_polar(0.3, t).unwrap(), 0.5, scheme)
                .unwrap()
                .value
        })
        .collect();
    for v in &values[1..] {
        assert!((v - values[0]).abs() < 1e-10 * values[0].abs(), "{values:?}");
    }
}
