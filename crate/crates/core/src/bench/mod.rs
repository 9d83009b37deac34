//! Wallclock and reverse-pass measurements of one field evaluation plus its
//! divergence, log-log scaling fits and hollow/baseline speed-up tables.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{DivergenceMode, NetworkField, PriorSpec, VectorField};
use crate::io::g17;
use crate::network::{ArchConfig, GraphMode, HompParams, ModelKind, NetworkProgram};

/// Minimum wallclock of one timed repeat before it is trusted.
pub const MIN_REPEAT_S: f64 = 2e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMode {
    /// Line-graph network with probe divergence.
    Hollow,
    /// Fully connected message passing with one reverse pass per coordinate.
    Baseline,
}

impl std::str::FromStr for BenchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hollow" => Ok(BenchMode::Hollow),
            "baseline" => Ok(BenchMode::Baseline),
            other => Err(Error::invalid(format!("unknown bench mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub mode: BenchMode,
    pub n: usize,
    pub d: usize,
    /// `None` for the fully connected graph.
    pub k: Option<usize>,
    pub steps: usize,
    pub edges: usize,
    pub line_edges: usize,
    pub rt_s: f64,
    pub rt_forward_s: f64,
    pub rt_divergence_s: f64,
    pub reverse_passes: usize,
    pub samples: usize,
    /// Evaluations averaged inside each timed repeat.
    pub inner: usize,
    pub repeats: usize,
    pub seed: u64,
}

pub const CSV_HEADER: &str =
    "mode,n,d,k,steps,edges,line_edges,rt_s,rt_forward_s,rt_divergence_s,reverse_passes,samples,inner,repeats,seed";

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            match self.mode {
                BenchMode::Hollow => "hollow",
                BenchMode::Baseline => "baseline",
            },
            self.n,
            self.d,
            self.k.map(|k| k.to_string()).unwrap_or_else(|| "full".into()),
            self.steps,
            self.edges,
            self.line_edges,
            g17(self.rt_s),
            g17(self.rt_forward_s),
            g17(self.rt_divergence_s),
            self.reverse_passes,
            self.samples,
            self.inner,
            self.repeats,
            self.seed
        )
    }
}

pub fn records_csv(records: &[BenchRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Times one field evaluation plus divergence on `x` (one warm-up, then the
/// median of `repeats`). Hollow networks use probe divergence, baselines
/// brute force. When a single evaluation is below [`MIN_REPEAT_S`] each
/// repeat runs more evaluations and reports their mean.
pub fn measure_step(params: &HompParams, x: &[f64], t: &[f64], repeats: usize, seed: u64) -> Result<BenchRecord> {
    if repeats < 3 {
        return Err(Error::invalid(format!("need at least 3 repeats, got {repeats}")));
    }
    let c = params.config();
    let (mode, div) = match c.model {
        ModelKind::Hollow => (BenchMode::Hollow, DivergenceMode::Hollow),
        ModelKind::Baseline => (BenchMode::Baseline, DivergenceMode::Brute),
    };
    let field = NetworkField::unlabeled(params.clone());
    let probe = NetworkProgram::build(params, x, field.labels(), t)?;
    let (edges, line_edges) = (probe.edge_count() / t.len(), probe.line_edge_count() / t.len());
    drop(probe);

    let run = |inner: usize| -> Result<(f64, f64, f64, usize)> {
        let (mut f, mut g, mut passes) = (0.0, 0.0, 0);
        let start = Instant::now();
        for _ in 0..inner {
            let ev = field.eval(x, t, Some(div))?;
            f += ev.forward_s;
            g += ev.divergence_s;
            passes = ev.reverse_passes;
        }
        let n = inner as f64;
        Ok((start.elapsed().as_secs_f64() / n, f / n, g / n, passes))
    };

    let (warm, ..) = run(1)?;
    let mut inner = 1;
    while warm * (inner as f64) < MIN_REPEAT_S && inner < 1 << 16 {
        inner *= 2;
    }
    let mut total = Vec::with_capacity(repeats);
    let mut fwd = Vec::with_capacity(repeats);
    let mut grad = Vec::with_capacity(repeats);
    let mut passes = 0;
    for _ in 0..repeats {
        let (a, b, c, p) = run(inner)?;
        total.push(a);
        fwd.push(b);
        grad.push(c);
        passes = p;
    }
    Ok(BenchRecord {
        mode,
        n: c.n_particles,
        d: c.dim,
        k: match c.graph {
            GraphMode::Knn { k } => Some(k),
            _ => None,
        },
        steps: c.steps,
        edges,
        line_edges,
        rt_s: median(total),
        rt_forward_s: median(fwd),
        rt_divergence_s: median(grad),
        reverse_passes: passes,
        samples: t.len(),
        inner,
        repeats,
        seed,
    })
}

/// Least-squares fit of `log y = a + slope·log x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

pub fn fit_scaling(x: &[f64], y: &[f64]) -> Result<ScalingFit> {
    if x.len() != y.len() {
        return Err(Error::shape("sweep values and metrics differ in length"));
    }
    if x.len() < 4 {
        return Err(Error::invalid(format!("need at least 4 sweep points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("scaling fits need positive finite values"));
    }
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(0.0, f64::max);
    if hi < 4.0 * lo {
        return Err(Error::invalid("sweep must span at least a factor of 4"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = (sse / (m - 2.0) / sxx).sqrt();
    Ok(ScalingFit {
        slope,
        stderr,
        intercept,
        points: x.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub n: usize,
    pub d: usize,
    pub hollow_rt_s: f64,
    pub baseline_rt_s: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub rows: Vec<SpeedupRow>,
    /// Ratio strictly increasing in `n`.
    pub monotone: bool,
}

impl SpeedupReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,d,hollow_rt_s,baseline_rt_s,ratio\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.n,
                r.d,
                g17(r.hollow_rt_s),
                g17(r.baseline_rt_s),
                g17(r.ratio)
            );
        }
        s
    }
}

/// Per-`(n, d)` ratio of baseline to hollow step time.
pub fn speedup_report(hollow: &[BenchRecord], baseline: &[BenchRecord]) -> Result<SpeedupReport> {
    let mut rows = Vec::with_capacity(hollow.len());
    for h in hollow {
        let b = baseline
            .iter()
            .find(|b| b.n == h.n && b.d == h.d)
            .ok_or_else(|| Error::invalid(format!("no baseline record for n={}, d={}", h.n, h.d)))?;
        if !(h.rt_s > 0.0) {
            return Err(Error::invalid(format!("zero runtime for n={}", h.n)));
        }
        rows.push(SpeedupRow {
            n: h.n,
            d: h.d,
            hollow_rt_s: h.rt_s,
            baseline_rt_s: b.rt_s,
            ratio: b.rt_s / h.rt_s,
        });
    }
    rows.sort_by_key(|r| (r.d, r.n));
    let monotone = rows.windows(2).all(|w| w[0].d != w[1].d || w[1].ratio > w[0].ratio);
    Ok(SpeedupReport { rows, monotone })
}

/// A `(n)` sweep with both models at fixed `d`, `k` and depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub ns: Vec<usize>,
    pub d: usize,
    pub k: usize,
    pub steps: usize,
    pub n_hidden: usize,
    pub samples: usize,
    pub repeats: usize,
    pub modes: Vec<BenchMode>,
    /// Set from the run seed when loaded from a config file.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            ns: vec![8, 16, 32, 64],
            d: 2,
            k: 4,
            steps: 2,
            n_hidden: 16,
            samples: 1,
            repeats: 3,
            modes: vec![BenchMode::Hollow, BenchMode::Baseline],
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn arch(&self, mode: BenchMode, n: usize) -> ArchConfig {
        let base = ArchConfig {
            n_particles: n,
            dim: self.d,
            n_hidden: self.n_hidden,
            steps: self.steps,
            ..ArchConfig::default()
        };
        match mode {
            BenchMode::Hollow => ArchConfig {
                model: ModelKind::Hollow,
                graph: GraphMode::Knn { k: self.k },
                ..base
            },
            BenchMode::Baseline => ArchConfig {
                model: ModelKind::Baseline,
                graph: GraphMode::Full,
                ..base
            },
        }
    }
}

/// Measures every `(mode, n)` cell on mean-free prior draws.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    for &mode in &cfg.modes {
        for &n in &cfg.ns {
            let arch = cfg.arch(mode, n);
            arch.validate()?;
            let params = HompParams::init(arch, cfg.seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ n as u64);
            let x = PriorSpec::new(n, cfg.d, true)?.sample(&mut rng, cfg.samples);
            let t: Vec<f64> = (0..cfg.samples).map(|_| rng.gen()).collect();
            out.push(measure_step(&params, &x, &t, cfg.repeats, cfg.seed)?);
        }
    }
    Ok(out)
}
