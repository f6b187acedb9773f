//! Structural invariants of the inverse pipeline, the gauge rotation and the
//! double commutation.

mod common;

use approx::assert_abs_diff_eq;
use pencil_core::commutation::{self, CommutationParams};
use pencil_core::dirac::{self, DiracPotential};
use pencil_core::gauge;
use pencil_core::pipeline::{self, PipelineConfig};
use pencil_core::{Grid, GridFn};
use proptest::prelude::*;

fn config(m: usize, pairs: usize) -> PipelineConfig {
    PipelineConfig {
        m,
        pairs,
        ..PipelineConfig::default()
    }
}

#[test]
fn commutation_changes_only_alpha0() {
    let g = Grid::new(512).unwrap();
    let (_, truth) = common::corpus(g, 3..4).remove(0);
    let data = pipeline::forward(&truth, 16).unwrap().data;
    let res = pipeline::inverse(&data, &config(512, 16), false).unwrap();
    let (v1, v2) = dirac::dirac_ivp(&res.q, 0.0).unwrap();
    let density = v1.zip_with(&v2, |a, b| a * a + b * b).unwrap();
    let (alpha0, target) = (1.0, 0.4);
    let params = CommutationParams::new(alpha0, target, &density).unwrap();
    assert_abs_diff_eq!(1.0 / (1.0 / alpha0 + params.alpha_star), target, epsilon = 1e-14);
    let qt = commutation::commute_general(&res.q, &v1, &v2, &params).unwrap();

    let before = dirac::dirac_spectral_data(&res.q, 8).unwrap();
    let after = dirac::dirac_spectral_data(&qt, 8).unwrap();
    for (a, b) in before.iter().zip(&after) {
        assert_eq!(a.n, b.n);
        assert!(
            (a.lambda - b.lambda).abs() <= 1e-6,
            "n = {}: {} vs {}",
            a.n,
            a.lambda,
            b.lambda
        );
        if a.n == 0 {
            assert!((b.alpha - target).abs() <= 1e-4, "alpha0 {}", b.alpha);
        } else {
            assert!(
                (a.alpha - b.alpha).abs() <= 1e-5,
                "n = {}: {} vs {}",
                a.n,
                a.alpha,
                b.alpha
            );
        }
    }
}

#[test]
fn commutation_in_pencil_form_keeps_p_and_shifts_r() {
    let g = Grid::new(512).unwrap();
    let (_, truth) = common::corpus(g, 5..6).remove(0);
    let data = pipeline::forward(&truth, 16).unwrap().data;
    let res = pipeline::inverse(&data, &config(512, 16), false).unwrap();
    let (qt, _) = commutation::commute_pencil_form(&res.pencil_form, &res.angle, 1.0, 2.5).unwrap();

    let (v1, v2) = dirac::dirac_ivp(&qt, 0.0).unwrap();
    let angle = gauge::theta_from_zero_mode(&qt, &v1, &v2).unwrap();
    gauge::check_quantization(&angle, gauge::DEFAULT_QUANTIZATION_TOL).unwrap();
    let pt = gauge::q_to_p(&qt, &angle).unwrap();
    let moved = gauge::extract_pq(&pt).unwrap();

    assert!(moved.p().l2_distance(res.potentials.p()).unwrap() <= 1e-6);
    let dr = moved.r().zip_with(res.potentials.r(), |a, b| a - b).unwrap();
    assert!(dr.centered().max_abs() <= 1e-4, "{}", dr.centered().max_abs());
    let p22 = pt.mat().e22.zip_with(&res.pencil_form.mat().e22, |a, b| a - b).unwrap();
    assert!(p22.max_abs() <= 1e-8, "{}", p22.max_abs());
}

#[test]
fn independence_report_on_constant_p() {
    let sd = pencil_core::SpectralData::constant_p(0.5, 16);
    let rep = pipeline::verify_alpha0_independence(&sd, 0.5, 2.0, &config(512, 16)).unwrap();
    assert!(rep.passed(), "{rep:?}");
    assert!(rep.quantization_residuals.iter().all(|&r| r <= 1e-3));
    rep.ensure().unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// From `Q = 0` with zero mode `(1, 0)` the commuted potential is
    /// `-a / (1 + a x)` off the diagonal, `a = 1/alpha~ - 1`.
    #[test]
    fn free_commutation_closed_form(target in 0.2f64..5.0) {
        let g = Grid::new(128).unwrap();
        let q = DiracPotential::zero(g);
        let (v1, v2) = (GridFn::constant(g, 1.0), GridFn::zeros(g));
        let params = CommutationParams::new(1.0, target, &GridFn::constant(g, 1.0)).unwrap();
        let qt = commutation::commute_general(&q, &v1, &v2, &params).unwrap();
        let a = 1.0 / target - 1.0;
        for (j, x) in g.nodes().enumerate() {
            prop_assert!((qt.mat().e12[j] + a / (1.0 + a * x)).abs() <= 1e-12);
            prop_assert_eq!(qt.mat().e11[j], 0.0);
        }
    }

    /// Rotating into pencil form and back returns the input potential.
    #[test]
    fn gauge_round_trip(c in proptest::collection::vec(-1.0f64..1.0, 4), h in -1.0f64..1.0) {
        let g = Grid::new(256).unwrap();
        let q1 = GridFn::from_fn(g, |x| c[0] + c[1] * (std::f64::consts::PI * x).cos());
        let q2 = GridFn::from_fn(g, |x| c[2] * x + c[3] * x * x);
        let q = DiracPotential::shifted_akns(h, &q1, &q2).unwrap();
        let angle = gauge::solve_theta(&q).unwrap();
        let p = gauge::q_to_p(&q, &angle).unwrap();
        prop_assert!(p.mat().e11.max_abs() == 0.0);
        let back = gauge::p_to_q(&p, &angle).unwrap();
        prop_assert!(back.mat().l2_distance(q.mat()).unwrap() <= 1e-10);
    }

    /// Forward data of small smooth potentials increase in `n` and have
    /// positive norming constants.
    #[test]
    fn forward_data_are_ordered(seed in 0u64..1000) {
        let g = Grid::new(256).unwrap();
        let (_, pp) = common::corpus(g, seed..seed + 1).remove(0);
        let sd = pipeline::forward(&pp, 4).unwrap().data;
        for w in sd.pairs().windows(2) {
            prop_assert!(w[0].lambda < w[1].lambda);
        }
        prop_assert!(sd.pairs().iter().all(|p| p.alpha > 0.0));
        prop_assert_eq!(sd.zero_mode().map(|z| z.lambda), Some(0.0));
    }
}
