use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::flow::{sample_with_likelihood, DivergenceMode, LinearField, PriorSpec, WeightedSamples};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn lj_pair_at_minimum() {
    let spec = SystemSpec::lennard_jones(2, 3);
    let e = lj_energy(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0], &spec).unwrap();
    assert!(close(e, -1.0, 1e-15));
}

#[test]
fn lj_decays_with_distance() {
    let spec = SystemSpec::lennard_jones(2, 2);
    let e = lj_energy(&[0.0, 0.0, 1e4, 0.0], &spec).unwrap();
    assert!(e < 0.0 && e.abs() < 1e-20);
}

#[test]
fn lj_equilateral_triangle() {
    let spec = SystemSpec::lennard_jones(3, 2);
    let h = 3f64.sqrt() / 2.0;
    let e = spec.energy(&[0.0, 0.0, 1.0, 0.0, 0.5, h]).unwrap();
    assert!(close(e, -3.0, 1e-12));
}

#[test]
fn lj_scales_with_epsilon_and_tau() {
    let spec = SystemSpec {
        epsilon: 3.0,
        tau: 2.0,
        ..SystemSpec::lennard_jones(2, 2)
    };
    assert!(close(spec.energy(&[0.0, 0.0, 0.0, 1.0]).unwrap(), -1.5, 1e-15));
}

#[test]
fn lj_coincident_particles_are_singular() {
    let spec = SystemSpec::lennard_jones(3, 2);
    match spec.energy(&[0.0, 0.0, 1.0, 1.0, 1.0, 1.0]) {
        Err(Error::Singular(1, 2)) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn mixture_energy_minimum_at_means() {
    let spec = SystemSpec::gaussian_mixture(2, 2, vec![-1.0, 0.0, 1.0, 0.0], 0.36);
    let at = spec.energy(&[-1.0, 0.0, 1.0, 0.0]).unwrap();
    let off = spec.energy(&[0.0, 0.0, 1.0, 0.0]).unwrap();
    assert!(at < off);
    // Each particle sits on one mean: −log(1 + e^{−4/(2σ²)}).
    let one = -(1.0 + (-4.0f64 / 0.72).exp()).ln();
    assert!(close(at, 2.0 * one, 1e-12));
}

#[test]
fn spec_validation() {
    assert!(SystemSpec { beta: 0.0, ..SystemSpec::default() }.validate().is_err());
    assert!(SystemSpec { r_m: -1.0, ..SystemSpec::lennard_jones(3, 2) }.validate().is_err());
    assert!(SystemSpec::gaussian_mixture(2, 2, vec![1.0], 1.0).validate().is_err());
    assert!(SystemSpec::gaussian_mixture(2, 2, vec![1.0, 0.0], 1.0).validate().is_ok());
}

fn rotation_3d(a: f64, b: f64) -> [f64; 9] {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    [ca, -sa * cb, sa * sb, sa, ca * cb, -ca * sb, 0.0, sb, cb]
}

proptest! {
    #[test]
    fn lj_invariances(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0, shift in prop::array::uniform3(-4.0f64..4.0)) {
        let n = 5;
        let spec = SystemSpec::lennard_jones(n, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..3 * n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let e = spec.energy(&x).unwrap();
        let r = rotation_3d(a, b);
        let rot: Vec<f64> = x
            .chunks(3)
            .flat_map(|p| (0..3).map(move |i| (0..3).map(|j| r[3 * i + j] * p[j]).sum::<f64>()))
            .collect();
        let moved: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + shift[i % 3]).collect();
        let perm: Vec<f64> = [3usize, 0, 4, 1, 2].iter().flat_map(|&i| x[3 * i..3 * i + 3].to_vec()).collect();
        let tol = 1e-10 * e.abs().max(1.0);
        prop_assert!((spec.energy(&rot).unwrap() - e).abs() <= tol);
        prop_assert!((spec.energy(&moved).unwrap() - e).abs() <= tol);
        prop_assert!((spec.energy(&perm).unwrap() - e).abs() <= tol);
    }

    #[test]
    fn ess_in_unit_interval(seed in any::<u64>(), len in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lw: Vec<f64> = (0..len).map(|_| rng.gen_range(-30.0..30.0)).collect();
        let e = ess_kish(&lw).unwrap();
        prop_assert!(e > 0.0 && e <= 1.0 + 1e-12);
    }
}

#[test]
fn gaussian_chain_variance() {
    let spec = SystemSpec::gaussian(2, 2, 2.0);
    let cfg = McmcConfig {
        samples: 20_000,
        burn_in: 200,
        thin: 3,
        step_size: 1.0,
        seed: 3,
        ..McmcConfig::default()
    };
    let run = mcmc_sample(&spec, &cfg).unwrap();
    let x = &run.data.x;
    let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    assert!(close(var, 0.5, 0.025), "variance {var}");
    assert!(run.acceptance_rate > 0.2 && run.acceptance_rate < 0.9);
}

#[test]
fn tiny_steps_accept_almost_everything() {
    let spec = SystemSpec::lennard_jones(4, 2);
    let cfg = McmcConfig {
        samples: 50,
        burn_in: 0,
        thin: 2,
        step_size: 1e-7,
        ..McmcConfig::default()
    };
    assert!(mcmc_sample(&spec, &cfg).unwrap().acceptance_rate > 0.99);
}

#[test]
fn chain_is_deterministic() {
    let spec = SystemSpec::lennard_jones(4, 2);
    let cfg = McmcConfig {
        samples: 200,
        burn_in: 50,
        seed: 17,
        center: true,
        ..McmcConfig::default()
    };
    let a = mcmc_sample(&spec, &cfg).unwrap().data.to_csv();
    let b = mcmc_sample(&spec, &cfg).unwrap().data.to_csv();
    assert_eq!(a, b);
    let c = mcmc_sample(&spec, &McmcConfig { seed: 18, ..cfg }).unwrap().data.to_csv();
    assert_ne!(a, c);
}

#[test]
fn centred_chain_has_zero_mean() {
    let spec = SystemSpec::lennard_jones(4, 2);
    let cfg = McmcConfig {
        samples: 20,
        burn_in: 10,
        center: true,
        ..McmcConfig::default()
    };
    let run = mcmc_sample(&spec, &cfg).unwrap();
    for i in 0..run.data.len() {
        let s = run.data.sample(i);
        for a in 0..2 {
            let m: f64 = s.chunks(2).map(|p| p[a]).sum();
            assert!(m.abs() < 1e-12);
        }
    }
}

#[test]
fn huge_steps_stop_the_chain() {
    let spec = SystemSpec::gaussian(3, 2, 1.0);
    let cfg = McmcConfig {
        samples: 100,
        step_size: 1e6,
        window: 20,
        ..McmcConfig::default()
    };
    assert!(matches!(mcmc_sample(&spec, &cfg), Err(Error::NoAcceptance { .. })));
    assert!(mcmc_sample(&spec, &McmcConfig { step_size: 0.0, ..McmcConfig::default() }).is_err());
}

fn weighted(spec: &SystemSpec, x1: Vec<f64>, log_rho1: Vec<f64>) -> WeightedSamples {
    WeightedSamples {
        n: spec.n,
        d: spec.d,
        x1,
        log_rho1,
        ..WeightedSamples::default()
    }
}

#[test]
fn exact_model_gives_equal_weights() {
    let spec = SystemSpec::lennard_jones(3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x: Vec<f64> = (0..6 * 10).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let lr: Vec<f64> = x.chunks(6).map(|s| spec.log_target(s).unwrap() - 7.5).collect();
    let mut ws = weighted(&spec, x, lr);
    let iw = importance_weights(&mut ws, &spec).unwrap();
    assert!(iw.log_w.iter().all(|w| close(*w, 7.5, 1e-9)));
    assert!(close(ess_kish(&iw.log_w).unwrap(), 1.0, 1e-12));
}

#[test]
fn doubling_beta_doubles_energy_term() {
    let spec = SystemSpec::lennard_jones(3, 2);
    let hot = SystemSpec { beta: 2.0, ..spec.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..6 * 8).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let lr: Vec<f64> = (0..8).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let a = importance_weights(&mut weighted(&spec, x.clone(), lr.clone()), &spec).unwrap();
    let b = importance_weights(&mut weighted(&hot, x, lr.clone()), &hot).unwrap();
    for i in 0..8 {
        let ea = a.log_w[i] + lr[i];
        let eb = b.log_w[i] + lr[i];
        assert!(close(eb, 2.0 * ea, 1e-9 * ea.abs().max(1.0)));
    }
}

#[test]
fn singular_samples_are_rejected_and_counted() {
    let spec = SystemSpec::lennard_jones(2, 2);
    let x = vec![0.0, 0.0, 1.0, 0.0, 0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0, 2.0];
    let mut ws = weighted(&spec, x, vec![0.0, 0.0, f64::NAN]);
    let iw = importance_weights(&mut ws, &spec).unwrap();
    assert_eq!(iw.kept, vec![0]);
    assert_eq!(iw.rejected, vec![1, 2]);
    assert_eq!(iw.n_rejected(), 2);
    assert_eq!(ws.log_w[1], f64::NEG_INFINITY);
}

#[test]
fn prior_model_on_prior_target_is_fully_efficient() {
    let (n, d) = (4, 2);
    let spec = SystemSpec::gaussian(n, d, 1.0);
    for mean_free in [false, true] {
        let prior = PriorSpec::new(n, d, mean_free).unwrap();
        let field = LinearField::scaled_identity(n, d, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut ws = sample_with_likelihood(&field, &prior, 200, 20, DivergenceMode::Brute, 50, &mut rng).unwrap();
        let iw = importance_weights(&mut ws, &spec).unwrap();
        assert!(close(ess_kish(&iw.log_w).unwrap(), 1.0, 1e-10));
    }
}

#[test]
fn kish_examples() {
    assert_eq!(ess_kish(&[0.0; 4]).unwrap(), 1.0);
    let inf = f64::NEG_INFINITY;
    assert_eq!(ess_kish(&[0.0, inf, inf, inf]).unwrap(), 0.25);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let lw: Vec<f64> = (0..50).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let shifted: Vec<f64> = lw.iter().map(|v| v + 123.4).collect();
    assert!(close(ess_kish(&lw).unwrap(), ess_kish(&shifted).unwrap(), 1e-12));
    assert!(ess_kish(&[inf, inf]).is_err());
    assert!(ess_kish(&[]).is_err());
    // Large log weights are handled without overflow.
    assert!(close(ess_kish(&[800.0, 800.0]).unwrap(), 1.0, 1e-15));
}

#[test]
fn kish_hundred_one_hot() {
    let mut lw = vec![f64::NEG_INFINITY; 100];
    lw[37] = 0.0;
    assert!(close(ess_kish(&lw).unwrap(), 0.01, 1e-15));
}

#[test]
fn clipping_examples() {
    assert_eq!(ess_clipped(&[0.0; 100], 1.0).unwrap(), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let lw: Vec<f64> = (0..100).map(|_| rng.gen_range(-4.0..4.0)).collect();
    assert_eq!(ess_clipped(&lw, 0.0).unwrap(), ess_kish(&lw).unwrap());
    let mut spiked = vec![0.0; 100];
    spiked[10] = 1e3;
    assert!(ess_kish(&spiked).unwrap() < 0.011);
    assert_eq!(ess_clipped(&spiked, 1.0).unwrap(), ess_kish(&[0.0; 98]).unwrap());
    assert!(ess_clipped(&lw, 50.0).is_err());
    assert!(ess_clipped(&lw, -1.0).is_err());
    assert!(ess_clipped(&[0.0], 49.0).is_ok());
    assert!(ess_clipped(&[0.0, 1.0], 49.0).is_ok());
    assert!(ess_clipped(&[0.0; 4], 49.0).is_ok());
}

#[test]
fn clipping_retains_ninety_eight() {
    let lw: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
    let kept = clip_indices(&lw, 1.0).unwrap();
    assert_eq!(kept.len(), 98);
    let lo = (0..100).min_by(|&a, &b| lw[a].total_cmp(&lw[b])).unwrap();
    let hi = (0..100).max_by(|&a, &b| lw[a].total_cmp(&lw[b])).unwrap();
    let expect: Vec<usize> = (0..100).filter(|&i| i != lo && i != hi).collect();
    assert_eq!(kept, expect);
    let rest: Vec<f64> = expect.iter().map(|&i| lw[i]).collect();
    assert_eq!(ess_clipped(&lw, 1.0).unwrap(), ess_kish(&rest).unwrap());
    assert_eq!(clip_indices(&lw, 0.0).unwrap().len(), 100);
    assert_eq!(clip_indices(&lw, 2.5).unwrap().len(), 96);
}

#[test]
fn clipping_breaks_ties_by_index() {
    let mut lw = vec![1.0; 100];
    for v in lw.iter_mut().take(10) {
        *v = -1.0;
    }
    // Among equal lowest weights index 0 ranks first; among equal highest
    // weights index 99 ranks last.
    let kept = clip_indices(&lw, 1.0).unwrap();
    assert_eq!(kept, (1..99).collect::<Vec<_>>());
}

#[test]
fn speedup_examples() {
    let a = RunSummary::new(0.4, 1000, 10.0);
    assert_eq!(effective_speedup(&a, &a).unwrap(), 1.0);
    let fast = RunSummary { rt_s: 5.0, ..a };
    assert_eq!(effective_speedup(&fast, &a).unwrap(), 2.0);
    assert!(effective_speedup(&RunSummary { rt_s: 0.0, ..a }, &a).is_err());
    assert!(effective_speedup(&a, &RunSummary { rt_s: 0.0, ..a }).is_err());
}
