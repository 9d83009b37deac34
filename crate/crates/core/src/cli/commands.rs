use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Command, RunConfig};
use crate::bench::{fit_scaling, records_csv, run_sweep, speedup_report, BenchMode, BenchRecord};
use crate::boltzmann::{effective_speedup, ess_clipped, ess_kish, importance_weights, mcmc_sample, RunSummary};
use crate::error::{Error, Result};
use crate::flow::{sample_with_likelihood, NetworkField, PriorSpec, WeightedSamples};
use crate::graph::{connectivity_profile, init_backtracking, LineGraph};
use crate::io::{csv_row, Dataset};
use crate::network::{particle_graphs, HompParams, ModelKind};
use crate::train::train;

/// Timing and pass counts written next to a sample CSV.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub count: usize,
    pub steps: usize,
    pub divergence: String,
    pub rt_s: f64,
    pub rt_forward_s: f64,
    pub rt_backward_s: f64,
    pub reverse_passes: usize,
    pub field_evals: usize,
    pub max_div_jump: f64,
}

/// Contents of `metrics.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub ess: f64,
    pub ess_rem: f64,
    pub n_samples: usize,
    pub n_rejected: usize,
    pub rt_s: f64,
    pub rt_forward_s: f64,
    pub rt_backward_s: f64,
    pub bp_count: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub effsu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub effsu_rem: Option<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_hash: String,
    seed: u64,
    wallclock_s: f64,
    inputs: Value,
    artifacts: Vec<String>,
    details: Value,
    config: &'a RunConfig,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    quiet: bool,
    start: Instant,
}

impl Ctx<'_> {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn path(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.cfg.out.join(default))
    }

    fn manifest(&self, command: &str, inputs: Value, artifacts: &[&Path], details: Value) -> Result<()> {
        let m = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config_hash: self.cfg.hash(),
            seed: self.cfg.seed,
            wallclock_s: self.start.elapsed().as_secs_f64(),
            inputs,
            artifacts: artifacts.iter().map(|p| p.display().to_string()).collect(),
            details,
            config: self.cfg,
        };
        let path = self.cfg.out.join(format!("manifest_{command}.json"));
        fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")?;
        fs::write(self.cfg.out.join("config.json"), serde_json::to_string_pretty(self.cfg)? + "\n")?;
        Ok(())
    }
}

pub(super) fn execute(cmd: &Command, cfg: &RunConfig, quiet: bool) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    let ctx = Ctx {
        cfg,
        quiet,
        start: Instant::now(),
    };
    match cmd {
        Command::GenerateData { output } => generate(&ctx, &ctx.path(output, "data.csv")),
        Command::Train { data } => train_cmd(&ctx, &ctx.path(data, "data.csv")),
        Command::Sample { checkpoint } => sample(&ctx, &ctx.path(checkpoint, "best.json")),
        Command::Evaluate { samples, checkpoint } => {
            evaluate(&ctx, &ctx.path(samples, "samples.csv"), &ctx.path(checkpoint, "best.json"))
        }
        Command::Bench => bench(&ctx),
        Command::InspectGraph { data, index } => inspect(&ctx, data.as_deref(), *index),
    }
}

fn generate(ctx: &Ctx, output: &Path) -> Result<()> {
    let run = mcmc_sample(&ctx.cfg.system, &ctx.cfg.mcmc)?;
    if let Some(dir) = output.parent() {
        fs::create_dir_all(dir)?;
    }
    run.data.write(output)?;
    ctx.say(format!(
        "wrote {} samples to {} (acceptance {:.3})",
        run.data.len(),
        output.display(),
        run.acceptance_rate
    ));
    ctx.manifest(
        "generate-data",
        json!({}),
        &[output],
        json!({
            "samples": run.data.len(),
            "acceptance_rate": run.acceptance_rate,
            "proposals": run.proposals,
            "accepted": run.accepted,
        }),
    )
}

fn prior_for(cfg: &RunConfig, n: usize, d: usize) -> Result<PriorSpec> {
    PriorSpec::new(n, d, cfg.mean_free_prior())
}

fn train_cmd(ctx: &Ctx, data_path: &Path) -> Result<()> {
    let cfg = ctx.cfg;
    let data = Dataset::read(data_path)?;
    if data.n != cfg.arch.n_particles || data.d != cfg.arch.dim {
        return Err(Error::Data(format!(
            "{} holds {}×{} configurations, arch expects {}×{}",
            data_path.display(),
            data.n,
            data.d,
            cfg.arch.n_particles,
            cfg.arch.dim
        )));
    }
    let params = HompParams::init(cfg.arch.clone(), cfg.seed)?;
    ctx.say(format!(
        "training {} weights on {} samples for {} epochs",
        params.len(),
        data.len(),
        cfg.train.epochs
    ));
    let prior = prior_for(cfg, data.n, data.d)?;
    let report = train(&cfg.train, &data, params, &prior, &cfg.out)?;
    for e in &report.log {
        ctx.say(format!(
            "epoch {:>4}  train {:.6}  val {}  lr {:.2e}  {:.1}s",
            e.epoch,
            e.train_loss,
            e.val_loss.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into()),
            e.lr,
            e.wallclock_s
        ));
    }
    let last = report.log.last().expect("at least one epoch");
    ctx.manifest(
        "train",
        json!({ "data": data_path.display().to_string() }),
        &[&report.best, &report.last, &report.loss_csv],
        json!({
            "best_epoch": report.best_epoch,
            "final_train_loss": last.train_loss,
            "final_val_loss": last.val_loss,
            "weights": report.params.len(),
        }),
    )
}

/// One row per sample: coordinates, then `log_rho0, log_rho1, delta_logp`.
pub fn write_samples(path: &Path, ws: &WeightedSamples) -> Result<()> {
    let w = ws.n * ws.d;
    let mut out: Vec<String> = (0..w).map(|i| format!("x_{i}")).collect();
    out.extend(["log_rho0", "log_rho1", "delta_logp"].map(String::from));
    let mut text = out.join(",");
    text.push('\n');
    for i in 0..ws.len() {
        let vals = ws.sample(i).iter().copied().chain([ws.log_rho0[i], ws.log_rho1[i], ws.delta_logp[i]]);
        text.push_str(&csv_row(vals));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_samples(path: &Path, n: usize, d: usize) -> Result<WeightedSamples> {
    let text = fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Data("empty sample file".into()))?;
    let w = n * d;
    if header.split(',').count() != w + 3 {
        return Err(Error::Data(format!("sample header has {} columns, expected {}", header.split(',').count(), w + 3)));
    }
    let mut ws = WeightedSamples { n, d, ..WeightedSamples::default() };
    for (row, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|_| Error::Data(format!("row {}: bad number `{f}`", row + 1))))
            .collect::<Result<_>>()?;
        if vals.len() != w + 3 {
            return Err(Error::Data(format!("row {} has {} fields, expected {}", row + 1, vals.len(), w + 3)));
        }
        ws.x1.extend_from_slice(&vals[..w]);
        ws.log_rho0.push(vals[w]);
        ws.log_rho1.push(vals[w + 1]);
        ws.delta_logp.push(vals[w + 2]);
    }
    Ok(ws)
}

fn check_dims(cfg: &RunConfig, params: &HompParams) -> Result<()> {
    let c = params.config();
    if c.n_particles != cfg.system.n || c.dim != cfg.system.d {
        return Err(Error::Data(format!(
            "checkpoint is for {}×{}, system is {}×{}",
            c.n_particles, c.dim, cfg.system.n, cfg.system.d
        )));
    }
    Ok(())
}

fn sample(ctx: &Ctx, checkpoint: &Path) -> Result<()> {
    let cfg = ctx.cfg;
    let params = HompParams::load(checkpoint)?;
    check_dims(cfg, &params)?;
    let (n, d) = (params.config().n_particles, params.config().dim);
    let prior = prior_for(cfg, n, d)?;
    let s = &cfg.sample;
    let field = NetworkField::new(params, cfg.labels())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    ctx.say(format!("sampling {} configurations with {:?} divergence", s.count, s.divergence));
    let ws = sample_with_likelihood(&field, &prior, s.count, s.steps, s.divergence, s.batch, &mut rng)?;
    let csv = cfg.out.join("samples.csv");
    write_samples(&csv, &ws)?;
    let stats = SampleStats {
        count: ws.len(),
        steps: s.steps,
        divergence: serde_json::to_value(s.divergence)?.as_str().unwrap_or_default().to_string(),
        rt_s: ws.rt_s,
        rt_forward_s: ws.rt_forward_s,
        rt_backward_s: ws.rt_backward_s,
        reverse_passes: ws.reverse_passes,
        field_evals: ws.field_evals,
        max_div_jump: ws.max_div_jump,
    };
    let stats_path = csv.with_extension("json");
    fs::write(&stats_path, serde_json::to_string_pretty(&stats)? + "\n")?;
    ctx.say(format!("wrote {} in {:.2}s", csv.display(), ws.rt_s));
    ctx.manifest(
        "sample",
        json!({ "checkpoint": checkpoint.display().to_string() }),
        &[&csv, &stats_path],
        serde_json::to_value(&stats)?,
    )
}

fn evaluate(ctx: &Ctx, samples: &Path, checkpoint: &Path) -> Result<()> {
    let cfg = ctx.cfg;
    let params = HompParams::load(checkpoint)?;
    check_dims(cfg, &params)?;
    let mut ws = read_samples(samples, cfg.system.n, cfg.system.d)?;
    let stats_path = samples.with_extension("json");
    let stats: SampleStats = match fs::read_to_string(&stats_path) {
        Ok(t) => serde_json::from_str(&t)?,
        Err(_) => SampleStats::default(),
    };
    let iw = importance_weights(&mut ws, &cfg.system)?;
    let ess = ess_kish(&iw.log_w)?;
    let ess_rem = ess_clipped(&iw.log_w, cfg.eval.clip_pct)?;
    let mut metrics = Metrics {
        ess,
        ess_rem,
        n_samples: ws.len(),
        n_rejected: iw.n_rejected(),
        rt_s: stats.rt_s,
        rt_forward_s: stats.rt_forward_s,
        rt_backward_s: stats.rt_backward_s,
        bp_count: stats.reverse_passes,
        effsu: None,
        effsu_rem: None,
    };
    if let Some(base) = &cfg.eval.baseline_metrics {
        let text = fs::read_to_string(base).map_err(|e| Error::Data(format!("{}: {e}", base.display())))?;
        let b: Metrics = serde_json::from_str(&text)?;
        let run = |e: f64, m: &Metrics| RunSummary::new(e, m.n_samples, m.rt_s);
        metrics.effsu = Some(effective_speedup(&run(metrics.ess, &metrics), &run(b.ess, &b))?);
        metrics.effsu_rem = Some(effective_speedup(&run(metrics.ess_rem, &metrics), &run(b.ess_rem, &b))?);
    }
    let out = cfg.out.join("metrics.json");
    fs::write(&out, serde_json::to_string_pretty(&metrics)? + "\n")?;
    let weights = cfg.out.join("weights.csv");
    let mut text = String::from("index,log_w\n");
    for (i, w) in ws.log_w.iter().enumerate() {
        text.push_str(&format!("{i},{}\n", crate::io::g17(*w)));
    }
    fs::write(&weights, text)?;
    ctx.say(format!(
        "ESS {:.4}  ESS_rem {:.4}  rejected {}/{}",
        metrics.ess, metrics.ess_rem, metrics.n_rejected, metrics.n_samples
    ));
    ctx.manifest(
        "evaluate",
        json!({
            "samples": samples.display().to_string(),
            "checkpoint": checkpoint.display().to_string(),
        }),
        &[&out, &weights],
        serde_json::to_value(&metrics)?,
    )
}

fn fit_json(records: &[&BenchRecord], metric: impl Fn(&BenchRecord) -> f64) -> Value {
    let x: Vec<f64> = records.iter().map(|r| r.n as f64).collect();
    let y: Vec<f64> = records.iter().map(|r| metric(r)).collect();
    match fit_scaling(&x, &y) {
        Ok(f) => serde_json::to_value(f).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn bench(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg.bench;
    ctx.say(format!("benchmarking n = {:?} for {:?}", cfg.ns, cfg.modes));
    let records = run_sweep(cfg)?;
    for r in &records {
        ctx.say(format!(
            "{:<8} n={:<4} RT={:.3e}s fwd={:.3e}s div={:.3e}s passes={}",
            format!("{:?}", r.mode).to_lowercase(),
            r.n,
            r.rt_s,
            r.rt_forward_s,
            r.rt_divergence_s,
            r.reverse_passes
        ));
    }
    let csv = ctx.cfg.out.join("bench.csv");
    fs::write(&csv, records_csv(&records))?;
    let hollow: Vec<&BenchRecord> = records.iter().filter(|r| r.mode == BenchMode::Hollow).collect();
    let base: Vec<&BenchRecord> = records.iter().filter(|r| r.mode == BenchMode::Baseline).collect();
    let mut summary = json!({
        "hollow": {
            "line_edges": fit_json(&hollow, |r| r.line_edges as f64),
            "rt_s": fit_json(&hollow, |r| r.rt_s),
            "rt_divergence_s": fit_json(&hollow, |r| r.rt_divergence_s),
        },
        "baseline": {
            "edges": fit_json(&base, |r| r.edges as f64),
            "rt_s": fit_json(&base, |r| r.rt_s),
            "rt_divergence_s": fit_json(&base, |r| r.rt_divergence_s),
        },
    });
    let mut artifacts = vec![csv.clone()];
    if !hollow.is_empty() && !base.is_empty() {
        let h: Vec<BenchRecord> = hollow.iter().map(|r| (*r).clone()).collect();
        let b: Vec<BenchRecord> = base.iter().map(|r| (*r).clone()).collect();
        let rep = speedup_report(&h, &b)?;
        let sp = ctx.cfg.out.join("speedup.csv");
        fs::write(&sp, rep.to_csv())?;
        artifacts.push(sp);
        summary["speedup"] = serde_json::to_value(&rep)?;
        ctx.say(format!(
            "speed-up {:?} (monotone: {})",
            rep.rows.iter().map(|r| (r.n, (r.ratio * 100.0).round() / 100.0)).collect::<Vec<_>>(),
            rep.monotone
        ));
    }
    let sum_path = ctx.cfg.out.join("bench_summary.json");
    fs::write(&sum_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    artifacts.push(sum_path);
    let refs: Vec<&Path> = artifacts.iter().map(PathBuf::as_path).collect();
    ctx.manifest("bench", json!({}), &refs, summary)
}

fn inspect(ctx: &Ctx, data: Option<&Path>, index: usize) -> Result<()> {
    let cfg = ctx.cfg;
    let arch = &cfg.arch;
    let x = match data {
        Some(p) => {
            let ds = Dataset::read(p)?;
            if ds.n != arch.n_particles || ds.d != arch.dim {
                return Err(Error::Data("data dimensions differ from arch".into()));
            }
            if index >= ds.len() {
                return Err(Error::invalid(format!("index {index} beyond {} samples", ds.len())));
            }
            ds.sample(index).to_vec()
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            prior_for(cfg, arch.n_particles, arch.dim)?.sample(&mut rng, 1)
        }
    };
    let graphs = particle_graphs(arch, &x)?;
    let mut heads = Vec::new();
    for (h, g) in graphs.iter().enumerate() {
        let lg = LineGraph::new(g);
        let profile = if arch.model == ModelKind::Hollow {
            connectivity_profile(g, arch.pd, arch.steps)
        } else {
            Vec::new()
        };
        let b_bytes = init_backtracking(&lg, arch.pd).byte_size();
        ctx.say(format!(
            "head {h}: |E| = {}, |E^lg| = {}, active per step {:?}",
            g.edge_count(),
            lg.edge_count(),
            profile.iter().map(|s| s.active).collect::<Vec<_>>()
        ));
        heads.push(json!({
            "edges": g.edge_count(),
            "edge_list": g.edges(),
            "line_nodes": lg.node_count(),
            "line_edges": lg.edge_count(),
            "profile": profile,
            "backtrack_bytes_per_step": b_bytes,
        }));
    }
    let out = cfg.out.join("graph.json");
    let body = json!({ "n": arch.n_particles, "d": arch.dim, "positions": x, "heads": heads });
    fs::write(&out, serde_json::to_string_pretty(&body)? + "\n")?;
    ctx.manifest(
        "inspect-graph",
        json!({ "data": data.map(|p| p.display().to_string()), "index": index }),
        &[&out],
        json!({ "heads": graphs.len() }),
    )
}
