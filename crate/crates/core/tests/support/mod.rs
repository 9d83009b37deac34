//! Checks shared by the acceptance harness and the integration tests.
#![allow(dead_code)]

use std::cell::RefCell;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hollowflow::autodiff::{full_jacobian_fd, jacobian_reverse, DetachGroup};
use hollowflow::bench::{fit_scaling, run_sweep, speedup_report, BenchMode, BenchRecord, SweepConfig};
use hollowflow::boltzmann::{
    clip_indices, ess_clipped, ess_kish, importance_weights, mcmc_sample, McmcConfig, SystemSpec,
};
use hollowflow::flow::{
    rk4_integrate, sample_with_likelihood, Direction, DivergenceMode, LinearField, NetworkField, PriorSpec,
    VectorField,
};
use hollowflow::graph::{build_knn_graph, connectivity_profile, fully_connected, LineGraph};
use hollowflow::network::{ArchConfig, GraphMode, HompParams, MessageKind, ModelKind, NetworkProgram};
use hollowflow::train::{hungarian, train, TrainConfig};

/// Outcome of one check: pass flag plus a one-line summary.
pub struct Check {
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Check {
            passed,
            detail: detail.into(),
        }
    }
}

pub fn arch(n: usize, d: usize, k: usize, steps: usize, pd: bool, message: MessageKind) -> ArchConfig {
    ArchConfig {
        n_particles: n,
        dim: d,
        n_hidden: 8,
        steps,
        pd,
        message,
        graph: GraphMode::Knn { k },
        n_rbf: 6,
        ..ArchConfig::default()
    }
}

pub fn positions(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.5..1.5)).collect()
}

const MESSAGES: [MessageKind; 3] = [MessageKind::Plain, MessageKind::Attention, MessageKind::AttentionSoftmax];

/// Random instance `i` of the decomposition sweep; pd and message kind
/// cycle so every combination appears.
fn instance(i: usize, rng: &mut ChaCha8Rng) -> ArchConfig {
    let n = rng.gen_range(4..=10);
    let d = if rng.gen_bool(0.5) { 2 } else { 3 };
    let k = rng.gen_range(2..n);
    let steps = rng.gen_range(1..=3);
    arch(n, d, k, steps, i % 2 == 0, MESSAGES[(i / 2) % 3])
}

fn fd_frozen(prog: &mut NetworkProgram) -> hollowflow::autodiff::DenseMatrix {
    let x = prog.inputs().to_vec();
    let cell = RefCell::new(prog);
    let jac = full_jacobian_fd(|y| cell.borrow_mut().reevaluate(y), &x, 1e-5).unwrap();
    cell.borrow_mut().reevaluate(&x).unwrap();
    jac
}

/// FD Jacobian minus the detached-path Jacobian is zero on the diagonal
/// blocks; the detached-path Jacobian is zero off them.
pub fn block_hollow(instances: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_diag, mut worst_off) = (0.0f64, 0.0f64);
    for i in 0..instances {
        let a = instance(i, &mut rng);
        let (n, d) = (a.n_particles, a.dim);
        let p = HompParams::random(a, seed + i as u64, 1.0).unwrap();
        let x = positions(&mut rng, n * d);
        let t = rng.gen::<f64>();
        let mut prog = NetworkProgram::build(&p, &x, &vec![0; n], &[t]).unwrap();
        let full = fd_frozen(&mut prog);
        prog.program_mut().set_detach(DetachGroup::Conditioner, true);
        let tau = jacobian_reverse(prog.program()).unwrap();
        worst_diag = worst_diag.max(full.sub(&tau).block_max(d, |r, c| r == c));
        worst_off = worst_off.max(tau.block_max(d, |r, c| r != c));
    }
    Check::new(
        worst_diag < 1e-5 && worst_off < 1e-5,
        format!("{instances} instances, max diag block of J−τ {worst_diag:.2e}, max off-diag block of τ {worst_off:.2e}"),
    )
}

/// Hollow and brute-force divergence agree per evaluation and along whole
/// trajectories; reverse-pass counters are `d` and `n·d`.
pub fn divergence_equivalence(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut eval_gap, mut traj_gap) = (0.0f64, 0.0f64);
    let mut counters_ok = true;
    for i in 0..12 {
        let a = instance(i, &mut rng);
        let (n, d) = (a.n_particles, a.dim);
        let p = HompParams::random(a.clone(), seed + i as u64, 0.5).unwrap();
        let field = NetworkField::unlabeled(p);
        let batch = 3;
        let x = positions(&mut rng, batch * n * d);
        let t: Vec<f64> = (0..batch).map(|_| rng.gen()).collect();
        let h = field.eval(&x, &t, Some(DivergenceMode::Hollow)).unwrap();
        let b = field.eval(&x, &t, Some(DivergenceMode::Brute)).unwrap();
        counters_ok &= h.reverse_passes == d && b.reverse_passes == n * d;
        for (u, v) in h.div.iter().zip(&b.div) {
            eval_gap = eval_gap.max((u - v).abs());
        }
        if i < 6 {
            let prior = PriorSpec::new(n, d, a.pd).unwrap();
            let run = |mode| {
                let mut r = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
                sample_with_likelihood(&field, &prior, 4, 10, mode, 4, &mut r).unwrap()
            };
            let (sh, sb) = (run(DivergenceMode::Hollow), run(DivergenceMode::Brute));
            counters_ok &= sh.reverse_passes == sh.field_evals * d && sb.reverse_passes == sb.field_evals * n * d;
            for (u, v) in sh.log_rho1.iter().zip(&sb.log_rho1) {
                traj_gap = traj_gap.max((u - v).abs());
            }
        }
    }
    Check::new(
        eval_gap <= 1e-10 && traj_gap <= 1e-9 && counters_ok,
        format!("max per-eval gap {eval_gap:.2e}, max log-likelihood gap {traj_gap:.2e}, counters exact: {counters_ok}"),
    )
}

/// Rows whose line-graph features at some step depend on their own target
/// particle (exact AD gradient), as `(t, row)` pairs.
pub fn self_dependence(prog: &NetworkProgram, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let d = prog.d();
    let mut bad = Vec::new();
    for head in prog.heads() {
        let rows = head.rows.len();
        for (t, &(s, v)) in head.features.iter().enumerate() {
            let hs = prog.program().shape(s).1;
            let hv = prog.program().shape(v).1;
            for (r, row) in head.rows.iter().enumerate() {
                let mut cs = vec![0.0; rows * hs];
                let mut cv = vec![0.0; rows * hv];
                cs[r * hs..(r + 1) * hs].iter_mut().for_each(|e| *e = rng.gen_range(0.5..1.5));
                cv[r * hv..(r + 1) * hv].iter_mut().for_each(|e| *e = rng.gen_range(0.5..1.5));
                let g = prog.program().vjp_from(&[(s, &cs), (v, &cv)]).unwrap();
                let base = (row.sample * prog.n() + row.j) * d;
                if g[base..base + d].iter().any(|&e| e != 0.0) {
                    bad.push((t, r));
                }
            }
        }
    }
    bad
}

/// `h^t_ij` never depends on `x_j` with pruning; without pruning a
/// triangle breaks this from `t = 2`.
pub fn non_backtracking(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut deep = 0;
    for i in 0..20 {
        let n = rng.gen_range(4..=9);
        let k = rng.gen_range(2..n);
        let steps = 1 + i % 4;
        deep += usize::from(steps >= 3);
        let a = arch(n, 2, k, steps, i % 2 == 0, MESSAGES[i % 3]);
        let p = HompParams::random(a, seed + i as u64, 1.0).unwrap();
        let x = positions(&mut rng, 2 * n);
        let mut prog = NetworkProgram::build(&p, &x, &vec![0; n], &[0.3]).unwrap();
        prog.program_mut().set_detach(DetachGroup::Conditioner, false);
        violations += self_dependence(&prog, &mut rng).len();
    }
    let triangle = |prune: bool| {
        let a = ArchConfig {
            graph: GraphMode::Full,
            prune,
            ..arch(3, 2, 2, 3, false, MessageKind::Plain)
        };
        let p = HompParams::random(a, seed, 1.0).unwrap();
        let x = [0.0, 0.0, 1.0, 0.1, 0.3, 0.9];
        let prog = NetworkProgram::build(&p, &x, &[0; 3], &[0.3]).unwrap();
        self_dependence(&prog, &mut ChaCha8Rng::seed_from_u64(seed))
    };
    let pruned = triangle(true);
    let control = triangle(false);
    let control_late = !control.is_empty() && control.iter().all(|&(t, _)| t >= 2);
    let control_hits_two = control.iter().any(|&(t, _)| t == 2);
    Check::new(
        violations == 0 && deep >= 5 && pruned.is_empty() && control_late && control_hits_two,
        format!(
            "20 graphs ({deep} with T ≥ 3): {violations} self-dependent rows; triangle pruned: {}, unpruned: {} violations, first at t = {:?}",
            pruned.len(),
            control.len(),
            control.iter().map(|c| c.0).min()
        ),
    )
}

/// B = 0 implies exact-zero AD dependence; for pd=false most B = 1
/// entries show a finite-difference dependence.
pub fn backtrack_tracking(seed: u64) -> (Check, Check) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut zeros, mut unsound) = (0usize, 0usize);
    let (mut ones, mut seen) = (0usize, 0usize);
    for i in 0..16 {
        let n = rng.gen_range(4..=8);
        let k = rng.gen_range(2..n);
        let steps = 1 + i % 3;
        let pd = i % 2 == 1;
        let a = arch(n, 2, k, steps, pd, MESSAGES[i % 3]);
        let p = HompParams::random(a, seed + 100 + i as u64, 1.0).unwrap();
        let x = positions(&mut rng, 2 * n);
        let mut prog = NetworkProgram::build(&p, &x, &vec![0; n], &[0.4]).unwrap();
        prog.program_mut().set_detach(DetachGroup::Conditioner, false);
        let head = prog.heads()[0].clone();
        let rows = head.rows.len();
        for (t, &(s, v)) in head.features.iter().enumerate() {
            let b = &head.backtrack[t][0];
            let hs = prog.program().shape(s).1;
            let hv = prog.program().shape(v).1;
            for r in 0..rows {
                let mut cs = vec![0.0; rows * hs];
                let mut cv = vec![0.0; rows * hv];
                cs[r * hs..(r + 1) * hs].iter_mut().for_each(|e| *e = rng.gen_range(0.5..1.5));
                cv[r * hv..(r + 1) * hv].iter_mut().for_each(|e| *e = rng.gen_range(0.5..1.5));
                let g = prog.program().vjp_from(&[(s, &cs), (v, &cv)]).unwrap();
                for m in 0..n {
                    if !b.get(r, m) {
                        zeros += 1;
                        unsound += usize::from(g[2 * m..2 * m + 2].iter().any(|&e| e != 0.0));
                    }
                }
            }
        }
        if pd {
            continue;
        }
        // Central differences of every feature row with the structure frozen.
        let eps = 1e-5;
        let feats = head.features.clone();
        let mut dep = vec![vec![vec![0.0f64; n]; rows]; feats.len()];
        for m in 0..n {
            for axis in 0..2 {
                let mut up = x.clone();
                up[2 * m + axis] += eps;
                prog.reevaluate(&up).unwrap();
                let hi: Vec<(Vec<f64>, Vec<f64>)> = feats
                    .iter()
                    .map(|&(s, v)| (prog.program().value(s).to_vec(), prog.program().value(v).to_vec()))
                    .collect();
                let mut dn = x.clone();
                dn[2 * m + axis] -= eps;
                prog.reevaluate(&dn).unwrap();
                for (t, &(s, v)) in feats.iter().enumerate() {
                    let (ls, lv) = (prog.program().value(s), prog.program().value(v));
                    let (hs, hv) = (ls.len() / rows, lv.len() / rows);
                    for r in 0..rows {
                        let ds = (0..hs).map(|c| (hi[t].0[r * hs + c] - ls[r * hs + c]).abs()).fold(0.0, f64::max);
                        let dv = (0..hv).map(|c| (hi[t].1[r * hv + c] - lv[r * hv + c]).abs()).fold(0.0, f64::max);
                        dep[t][r][m] = dep[t][r][m].max(ds.max(dv) / (2.0 * eps));
                    }
                }
            }
        }
        prog.reevaluate(&x).unwrap();
        for t in 0..feats.len() {
            let b = &head.backtrack[t][0];
            for r in 0..rows {
                for m in 0..n {
                    if b.get(r, m) {
                        ones += 1;
                        seen += usize::from(dep[t][r][m] > 1e-8);
                    }
                }
            }
        }
    }
    let frac = seen as f64 / ones.max(1) as f64;
    (
        Check::new(unsound == 0 && zeros > 0, format!("{zeros} zero entries, {unsound} with AD dependence")),
        Check::new(
            frac >= 0.95,
            format!("{seen}/{ones} one entries ({:.1}%) show FD dependence > 1e-8", 100.0 * frac),
        ),
    )
}

/// Mean `|E^lg|` of the k-nearest-neighbour graph over `draws` uniform
/// point clouds in the unit square.
pub fn mean_knn_line_edges(n: usize, k: usize, draws: usize, rng: &mut impl Rng) -> f64 {
    let total: usize = (0..draws)
        .map(|_| {
            let x: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(0.0..1.0)).collect();
            LineGraph::new(&build_knn_graph(&x, 2, k).unwrap()).edge_count()
        })
        .sum();
    total as f64 / draws as f64
}

pub fn edge_count_laws(seed: u64) -> Check {
    let exact = (3..=30).all(|n| LineGraph::new(&fully_connected(n)).edge_count() == n * (n - 1) * (n - 2));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = [16.0, 32.0, 64.0, 128.0];
    let y: Vec<f64> = ns.iter().map(|&n| mean_knn_line_edges(n as usize, 4, 16, &mut rng)).collect();
    let fit = fit_scaling(&ns, &y).unwrap();
    Check::new(
        exact && (fit.slope - 1.0).abs() <= 0.2,
        format!(
            "fully connected exact for n = 3..30: {exact}; kNN (k = 4) slope {:.3} ± {:.3}",
            fit.slope, fit.stderr
        ),
    )
}

pub fn runtime_trends(seed: u64) -> (Check, Vec<BenchRecord>) {
    let cfg = SweepConfig {
        ns: vec![8, 16, 32, 64],
        d: 2,
        k: 4,
        repeats: 5,
        seed,
        ..SweepConfig::default()
    };
    let records = run_sweep(&cfg).unwrap();
    let pick = |mode| -> Vec<BenchRecord> { records.iter().filter(|r| r.mode == mode).cloned().collect() };
    let (hol, base) = (pick(BenchMode::Hollow), pick(BenchMode::Baseline));
    let ns: Vec<f64> = hol.iter().map(|r| r.n as f64).collect();
    let base_grad = fit_scaling(&ns, &base.iter().map(|r| r.rt_divergence_s).collect::<Vec<_>>()).unwrap();
    let hol_step = fit_scaling(&ns, &hol.iter().map(|r| r.rt_s).collect::<Vec<_>>()).unwrap();
    let rep = speedup_report(&hol, &base).unwrap();
    let ratios: Vec<String> = rep.rows.iter().map(|r| format!("{:.1}", r.ratio)).collect();
    (
        Check::new(
            base_grad.slope >= 2.5 && hol_step.slope <= 1.5 && rep.monotone,
            format!(
                "baseline RT∇ slope {:.2}, hollow RT step slope {:.2}, speed-up by n [{}]",
                base_grad.slope,
                hol_step.slope,
                ratios.join(", ")
            ),
        ),
        records,
    )
}

pub fn analytic_flow() -> Check {
    let (n, d) = (3, 2);
    let field = LinearField::scaled_identity(n, d, -1.0);
    let x0 = [0.4, -1.0, 2.0, 0.3, -0.7, 1.1];
    let st = rk4_integrate(&field, &x0, 20, Direction::Forward, Some(DivergenceMode::Brute), false).unwrap();
    let dlogp = (st.delta_logp[0] - (n * d) as f64).abs();
    let e = (-1.0f64).exp();
    let dx = st.x.iter().zip(&x0).map(|(a, b)| (a - e * b).abs()).fold(0.0, f64::max);
    Check::new(
        dlogp <= 1e-9 && dx <= 1e-6,
        format!("|Δlogρ − dn| = {dlogp:.2e}, max |x(1) − e⁻¹x0| = {dx:.2e}"),
    )
}

pub fn metric_definitions() -> Check {
    let uniform = ess_kish(&[0.3; 64]).unwrap();
    let mut hot = vec![f64::NEG_INFINITY; 50];
    hot[7] = 2.0;
    let one_hot = ess_kish(&hot).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let lw: Vec<f64> = (0..100).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let noop = ess_clipped(&lw, 0.0).unwrap() == ess_kish(&lw).unwrap();
    let kept = clip_indices(&lw, 1.0).unwrap().len();
    Check::new(
        uniform == 1.0 && (one_hot - 1.0 / 50.0).abs() < 1e-15 && noop && kept == 98,
        format!("uniform {uniform}, one-hot {one_hot} (N = 50), pct 0 no-op: {noop}, pct 1 keeps {kept}/100"),
    )
}

pub fn hungarian_optimality(trials: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let b = 1 + trial % 7;
        let width = 2;
        let x0: Vec<f64> = (0..b * width).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x1: Vec<f64> = (0..b * width).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let cost = hollowflow::train::squared_cost(&x0, &x1, width);
        let perm = hungarian(&cost, b).unwrap();
        let got: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i * b + j]).sum();
        let best = (0..b)
            .permutations(b)
            .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i * b + j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(got - best);
    }
    Check::new(
        worst.abs() <= 1e-12,
        format!("{trials} trials, B = 1..7, max excess over exhaustive minimum {worst:.1e}"),
    )
}

/// Setup of the desk-scale Boltzmann generator run.
#[derive(Clone, Debug)]
pub struct BoltzmannRun {
    pub data_samples: usize,
    pub epochs: usize,
    pub eval_samples: usize,
    pub seed: u64,
}

impl Default for BoltzmannRun {
    fn default() -> Self {
        BoltzmannRun {
            data_samples: 10_000,
            epochs: 60,
            eval_samples: 2_000,
            seed: 0,
        }
    }
}

pub fn mixture_system() -> SystemSpec {
    SystemSpec::gaussian_mixture(5, 2, vec![-1.0, 0.0, 1.0, 0.0], 0.36)
}

pub fn mixture_arch() -> ArchConfig {
    ArchConfig {
        model: ModelKind::Hollow,
        n_particles: 5,
        dim: 2,
        n_hidden: 16,
        steps: 2,
        pd: false,
        graph: GraphMode::Knn { k: 3 },
        equivariant: false,
        ..ArchConfig::default()
    }
}

pub struct BoltzmannOutcome {
    pub ess: f64,
    pub ess_rem: f64,
    pub weight_gap: f64,
    pub train_s: f64,
    pub detail: String,
}

pub fn boltzmann_generator(run: &BoltzmannRun, out: &std::path::Path) -> BoltzmannOutcome {
    let spec = mixture_system();
    let mcmc = McmcConfig {
        samples: run.data_samples,
        burn_in: 500,
        thin: 5,
        step_size: 0.5,
        seed: run.seed,
        ..McmcConfig::default()
    };
    let data = mcmc_sample(&spec, &mcmc).unwrap();
    let params = HompParams::init(mixture_arch(), run.seed).unwrap();
    let prior = PriorSpec::new(5, 2, false).unwrap();
    let cfg = TrainConfig {
        epochs: run.epochs,
        batch_size: 256,
        lr_initial: 5e-3,
        lr_final: 5e-4,
        lr_decay_epochs: run.epochs,
        seed: run.seed,
        ..TrainConfig::default()
    };
    let start = std::time::Instant::now();
    let report = train(&cfg, &data.data, params, &prior, out).unwrap();
    let train_s = start.elapsed().as_secs_f64();
    let best = HompParams::load(&report.best).unwrap();
    let field = NetworkField::unlabeled(best);
    let draw = |mode| {
        let mut rng = ChaCha8Rng::seed_from_u64(run.seed + 1);
        let mut ws = sample_with_likelihood(&field, &prior, run.eval_samples, 20, mode, 250, &mut rng).unwrap();
        let iw = importance_weights(&mut ws, &spec).unwrap();
        (ws, iw)
    };
    let (ws_h, iw_h) = draw(DivergenceMode::Hollow);
    let (ws_b, _) = draw(DivergenceMode::Brute);
    let weight_gap = ws_h.log_w.iter().zip(&ws_b.log_w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let ess = ess_kish(&iw_h.log_w).unwrap();
    let ess_rem = ess_clipped(&iw_h.log_w, 1.0).unwrap();
    let last = report.log.last().unwrap();
    BoltzmannOutcome {
        ess,
        ess_rem,
        weight_gap,
        train_s,
        detail: format!(
            "acceptance {:.2}, {} epochs in {:.0}s (val loss {:.4}), ESS {:.1}%, ESS_rem(1%) {:.1}%, max |Δlog w| {:.1e}",
            data.acceptance_rate,
            report.log.len(),
            train_s,
            last.val_loss.unwrap_or(f64::NAN),
            100.0 * ess,
            100.0 * ess_rem,
            weight_gap
        ),
    }
}

fn rotate2(x: &[f64], angle: f64) -> Vec<f64> {
    let (s, c) = angle.sin_cos();
    x.chunks(2).flat_map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect()
}

fn rotate3(x: &[f64], a: f64, b: f64) -> Vec<f64> {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let r = [ca, -sa * cb, sa * sb, sa, ca * cb, -ca * sb, 0.0, sb, cb];
    x.chunks(3)
        .flat_map(|p| (0..3).map(move |i| (0..3).map(|j| r[3 * i + j] * p[j]).sum::<f64>()))
        .collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn equivariance(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut rot, mut trans) = (0.0f64, 0.0f64);
    for (i, d) in [2usize, 3, 2, 3, 2, 3].into_iter().enumerate() {
        let n = 6;
        let a = ArchConfig {
            message: MESSAGES[i % 3],
            ..arch(n, d, 3, 2, true, MessageKind::Plain)
        };
        let p = HompParams::random(a, seed + i as u64, 1.0).unwrap();
        let f = NetworkField::unlabeled(p);
        let x = positions(&mut rng, n * d);
        let b = f.eval(&x, &[0.35], None).unwrap().b;
        let (ang, ang2) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let (xr, br) = if d == 2 {
            (rotate2(&x, ang), rotate2(&b, ang))
        } else {
            (rotate3(&x, ang, ang2), rotate3(&b, ang, ang2))
        };
        rot = rot.max(max_diff(&f.eval(&xr, &[0.35], None).unwrap().b, &br));
        let shift: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let xt: Vec<f64> = x.iter().enumerate().map(|(j, v)| v + shift[j % d]).collect();
        trans = trans.max(max_diff(&f.eval(&xt, &[0.35], None).unwrap().b, &b));
    }
    let perm_gap = |unique: bool| {
        let n = 5;
        let a = ArchConfig {
            unique_embedding: unique,
            ..arch(n, 2, 3, 2, true, MessageKind::Plain)
        };
        let f = NetworkField::unlabeled(HompParams::random(a, seed, 1.0).unwrap());
        let x = positions(&mut ChaCha8Rng::seed_from_u64(seed + 9), 2 * n);
        let perm = [2usize, 0, 4, 1, 3];
        let xp: Vec<f64> = perm.iter().flat_map(|&i| x[2 * i..2 * i + 2].to_vec()).collect();
        let b = f.eval(&x, &[0.5], None).unwrap().b;
        let bp: Vec<f64> = perm.iter().flat_map(|&i| b[2 * i..2 * i + 2].to_vec()).collect();
        max_diff(&f.eval(&xp, &[0.5], None).unwrap().b, &bp)
    };
    let (off, on) = (perm_gap(false), perm_gap(true));
    Check::new(
        rot <= 1e-8 && trans <= 1e-10 && off <= 1e-10 && on > 1e-6,
        format!(
            "rotation {rot:.1e}, translation {trans:.1e}, permutation without unique embedding {off:.1e}, with {on:.1e}"
        ),
    )
}

pub fn connectivity() -> Check {
    let prof = connectivity_profile(&fully_connected(4), false, 2);
    let active: Vec<usize> = prof.iter().map(|s| s.active).collect();
    Check::new(active == [24, 0], format!("active line-graph edges per step {active:?}"))
}
