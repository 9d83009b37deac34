use itertools::Itertools;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::network::{ArchConfig, GraphMode};

fn small_arch(pd: bool) -> ArchConfig {
    ArchConfig {
        n_particles: 4,
        dim: 2,
        n_hidden: 5,
        steps: 2,
        pd,
        graph: GraphMode::Knn { k: 2 },
        n_rbf: 4,
        ..ArchConfig::default()
    }
}

fn brute_min(cost: &[f64], n: usize) -> f64 {
    (0..n)
        .permutations(n)
        .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn interpolant_midpoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (xt, ut) = interpolant_sample(&[0.0, 0.0], &[2.0, 0.0], &[0.5], 0.0, &mut rng).unwrap();
    assert_eq!(xt, vec![1.0, 0.0]);
    assert_eq!(ut, vec![2.0, 0.0]);
}

#[test]
fn interpolant_start_is_x0() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x0 = [0.3, -1.2, 4.0, 0.5];
    let (xt, _) = interpolant_sample(&x0, &[9.0, 9.0, 9.0, 9.0], &[0.0, 0.0], 0.0, &mut rng).unwrap();
    assert_eq!(xt, x0.to_vec());
}

#[test]
fn interpolant_noise_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 100_000;
    let x0 = vec![1.0; n];
    let x1 = vec![3.0; n];
    let t = vec![0.25; n];
    let (xt, _) = interpolant_sample(&x0, &x1, &t, 0.1, &mut rng).unwrap();
    let mean = xt.iter().sum::<f64>() / n as f64;
    let var = xt.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - 1.5).abs() < 2e-3);
    assert!((var.sqrt() - 0.1).abs() < 0.002, "std {}", var.sqrt());
}

#[test]
fn interpolant_rejects_negative_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(interpolant_sample(&[0.0], &[1.0], &[0.5], -0.1, &mut rng).is_err());
}

#[test]
fn scalar_pairing_example() {
    let c = minibatch_ot_coupling(&[0.0, 10.0], &[11.0, 1.0], 1).unwrap();
    assert_eq!(c.perm, vec![1, 0]);
    assert_eq!(c.cost, 2.0);
}

#[test]
fn identical_batches_pair_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b: Vec<f64> = (0..24).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let c = minibatch_ot_coupling(&b, &b, 3).unwrap();
    assert_eq!(c.perm, (0..8).collect::<Vec<_>>());
    assert_eq!(c.cost, 0.0);
}

#[test]
fn coupling_size_mismatch() {
    assert!(minibatch_ot_coupling(&[0.0, 1.0], &[0.0], 1).is_err());
    assert!(minibatch_ot_coupling(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], 2).is_err());
}

#[test]
fn five_sample_batches_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let a: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = minibatch_ot_coupling(&a, &b, 2).unwrap();
        let best = brute_min(&squared_cost(&a, &b, 2), 5);
        assert!((c.cost - best).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hungarian_is_optimal(seed in any::<u64>(), n in 1usize..=7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..10.0)).collect();
        let perm = hungarian(&cost, n).unwrap();
        let mut seen = perm.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        let got: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
        prop_assert!((got - brute_min(&cost, n)).abs() < 1e-9);
    }

    #[test]
    fn translation_keeps_pairing(seed in any::<u64>(), n in 2usize..=7, shift in prop::array::uniform3(-5.0f64..5.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..3 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..3 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let moved = |x: &[f64]| -> Vec<f64> { x.iter().enumerate().map(|(i, v)| v + shift[i % 3]).collect() };
        let p = minibatch_ot_coupling(&a, &b, 3).unwrap();
        let q = minibatch_ot_coupling(&moved(&a), &moved(&b), 3).unwrap();
        prop_assert_eq!(p.perm, q.perm);
    }
}

fn toy_batch(seed: u64, count: usize, width: usize, sigma: f64) -> CfmBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0: Vec<f64> = (0..count * width).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let x1: Vec<f64> = x0.iter().map(|v| 2.0 * v).collect();
    CfmBatch::prepare(x0, x1, width, sigma, false, &mut rng).unwrap()
}

#[test]
fn loss_vanishes_when_field_matches_target() {
    let params = HompParams::zeros(small_arch(true)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<f64> = (0..3 * 8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let batch = CfmBatch::prepare(x.clone(), x, 8, 0.0, false, &mut rng).unwrap();
    let (loss, grad) = cfm_loss(&params, &[0; 4], &batch).unwrap();
    assert_eq!(loss, 0.0);
    assert_eq!(grad.len(), params.len());
}

#[test]
fn zero_field_loss_is_mean_target_norm() {
    let params = HompParams::zeros(small_arch(true)).unwrap();
    let batch = toy_batch(2, 6, 8, 0.01);
    let expect = batch.ut.chunks(8).map(|u| u.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / 6.0;
    let (loss, _) = cfm_loss(&params, &[0; 4], &batch).unwrap();
    assert!((loss - expect).abs() < 1e-12 * expect.max(1.0));
    assert_eq!(cfm_loss_value(&params, &[0; 4], &batch).unwrap(), loss);
}

#[test]
fn loss_gradient_matches_central_differences() {
    for (pd, message) in [
        (true, crate::network::MessageKind::Plain),
        (false, crate::network::MessageKind::Attention),
        (true, crate::network::MessageKind::AttentionSoftmax),
    ] {
        let arch = ArchConfig { message, ..small_arch(pd) };
        let params = HompParams::random(arch, 7, 0.5).unwrap();
        let batch = toy_batch(8, 3, 8, 0.05);
        let labels = [0; 4];
        let (_, grad) = cfm_loss(&params, &labels, &batch).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-5;
        for _ in 0..10 {
            let idx = rng.gen_range(0..params.len());
            let mut p = params.clone();
            p.values_mut()[idx] += h;
            let up = cfm_loss_value(&p, &labels, &batch).unwrap();
            p.values_mut()[idx] -= 2.0 * h;
            let dn = cfm_loss_value(&p, &labels, &batch).unwrap();
            let fd = (up - dn) / (2.0 * h);
            let scale = fd.abs().max(grad[idx].abs()).max(1e-3);
            assert!(
                (fd - grad[idx]).abs() / scale <= 1e-5,
                "pd={pd} {message:?} param {idx}: ad {} fd {fd}",
                grad[idx]
            );
        }
    }
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let mut adam = Adam::new(3);
    let mut p = vec![1.0, 2.0, 3.0];
    adam.update(&mut p, &[0.5, -2.0, 0.0], 0.1);
    assert!((p[0] - 0.9).abs() < 1e-6);
    assert!((p[1] - 2.1).abs() < 1e-6);
    assert_eq!(p[2], 3.0);
}

#[test]
fn learning_rate_schedule() {
    let c = TrainConfig {
        lr_initial: 1e-3,
        lr_final: 1e-4,
        lr_decay_epochs: 9,
        ..TrainConfig::default()
    };
    assert_eq!(c.learning_rate(0), 1e-3);
    assert!((c.learning_rate(3) - 7e-4).abs() < 1e-15);
    assert_eq!(c.learning_rate(9), 1e-4);
    assert_eq!(c.learning_rate(50), 1e-4);
}

#[test]
fn config_validation_names_key() {
    let c = TrainConfig { batch_size: 0, ..TrainConfig::default() };
    match c.validate() {
        Err(Error::Config { key, .. }) => assert_eq!(key, "train.batch_size"),
        other => panic!("{other:?}"),
    }
    assert!(TrainConfig { lr_final: 0.0, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig::default().validate().is_ok());
}

#[test]
fn linear_toy_loss_decreases() {
    // Full-batch Adam on fixed pairs x1 = 2·x0.
    let seeds = 10;
    let mut monotone = 0;
    for seed in 0..seeds {
        let arch = small_arch(false);
        let mut params = HompParams::init(arch, seed).unwrap();
        let batch = toy_batch(100 + seed, 16, 8, 0.0);
        let mut adam = Adam::new(params.len());
        let mut losses = Vec::new();
        let cfg = TrainConfig { lr_initial: 1e-3, lr_final: 1e-4, lr_decay_epochs: 20, ..TrainConfig::default() };
        for epoch in 0..21 {
            let (loss, grad) = cfm_loss(&params, &[0; 4], &batch).unwrap();
            losses.push(loss);
            let mut v = params.values().to_vec();
            adam.update(&mut v, &grad, cfg.learning_rate(epoch));
            params.set_values(&v).unwrap();
        }
        if losses.windows(2).all(|w| w[1] < w[0]) {
            monotone += 1;
        }
    }
    assert!(monotone * 10 >= seeds * 9, "{monotone}/{seeds} monotone");
}

fn toy_data(count: usize, seed: u64) -> Dataset {
    let prior = PriorSpec::new(4, 2, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = prior.sample(&mut rng, count).iter().map(|v| 2.0 * v).collect();
    Dataset::new(4, 2, x, vec![0; 4 * count]).unwrap()
}

#[test]
fn one_epoch_writes_loadable_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig { epochs: 1, batch_size: 4, ..TrainConfig::default() };
    let params = HompParams::init(small_arch(true), 3).unwrap();
    let prior = PriorSpec::new(4, 2, true).unwrap();
    let report = train(&cfg, &toy_data(10, 1), params, &prior, dir.path()).unwrap();
    let loaded = HompParams::load(&report.last).unwrap();
    assert_eq!(loaded.values(), report.params.values());
    assert!(HompParams::load(&report.best).is_ok());
    let csv = std::fs::read_to_string(&report.loss_csv).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epoch,train_loss,val_loss,lr,wallclock_s"));
    assert_eq!(lines.count(), 1);
}

#[test]
fn best_checkpoint_is_validation_argmin() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        epochs: 6,
        batch_size: 8,
        lr_initial: 2e-2,
        lr_final: 2e-2,
        val_fraction: 0.25,
        seed: 4,
        ..TrainConfig::default()
    };
    let params = HompParams::init(small_arch(true), 5).unwrap();
    let prior = PriorSpec::new(4, 2, true).unwrap();
    let report = train(&cfg, &toy_data(32, 2), params, &prior, dir.path()).unwrap();
    let vals: Vec<f64> = report.log.iter().map(|e| e.val_loss.unwrap()).collect();
    let argmin = vals
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc })
        .0;
    assert_eq!(report.best_epoch, argmin);
    assert!(report.log.iter().all(|e| e.train_loss.is_finite()));
}

#[test]
fn training_rejects_mismatched_data() {
    let dir = tempfile::tempdir().unwrap();
    let params = HompParams::init(small_arch(true), 3).unwrap();
    let prior = PriorSpec::new(4, 2, true).unwrap();
    let data = Dataset::new(3, 2, vec![0.0; 6], vec![0; 3]).unwrap();
    assert!(train(&TrainConfig::default(), &data, params, &prior, dir.path()).is_err());
}
