use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DivergenceMode, PriorSpec, VectorField};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `t` from 0 to 1.
    Forward,
    /// `t` from 1 to 0.
    Reverse,
}

/// Outcome of integrating a batch along the flow.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowState {
    /// Final positions, batch back to back.
    pub x: Vec<f64>,
    /// `∫ −∇·b dt` along the direction of integration, per sample.
    pub delta_logp: Vec<f64>,
    /// Grid times, including both ends.
    pub times: Vec<f64>,
    /// Positions at every grid time when recorded.
    pub trajectory: Vec<Vec<f64>>,
    pub field_evals: usize,
    pub reverse_passes: usize,
    /// Largest change of a sample's divergence between consecutive field
    /// evaluations.
    pub max_div_jump: f64,
    pub forward_s: f64,
    pub divergence_s: f64,
}

/// Fixed-step classical RK4 on the state `(x, Δlogρ)`. With `mode` unset
/// only positions are integrated.
pub fn rk4_integrate(
    field: &dyn VectorField,
    x0: &[f64],
    steps: usize,
    direction: Direction,
    mode: Option<DivergenceMode>,
    record: bool,
) -> Result<FlowState> {
    if steps == 0 {
        return Err(Error::invalid("at least one integration step is required"));
    }
    let w = field.width();
    if w == 0 || x0.len() % w != 0 {
        return Err(Error::shape(format!("{} coordinates do not split into width {w}", x0.len())));
    }
    let batch = x0.len() / w;
    let (t0, dt) = match direction {
        Direction::Forward => (0.0, 1.0 / steps as f64),
        Direction::Reverse => (1.0, -1.0 / steps as f64),
    };
    let mut st = FlowState {
        x: x0.to_vec(),
        delta_logp: vec![0.0; batch],
        times: (0..=steps).map(|s| t0 + s as f64 * dt).collect(),
        ..FlowState::default()
    };
    if record {
        st.trajectory.push(st.x.clone());
    }
    let mut last_div: Option<Vec<f64>> = None;
    let mut stage = |st: &mut FlowState, x: &[f64], t: f64| -> Result<(Vec<f64>, Vec<f64>)> {
        let ev = field.eval(x, &vec![t; batch], mode)?;
        st.field_evals += 1;
        st.reverse_passes += ev.reverse_passes;
        st.forward_s += ev.forward_s;
        st.divergence_s += ev.divergence_s;
        if let Some(prev) = &last_div {
            for (a, b) in prev.iter().zip(&ev.div) {
                st.max_div_jump = st.max_div_jump.max((a - b).abs());
            }
        }
        if mode.is_some() {
            last_div = Some(ev.div.clone());
        }
        let dl = if mode.is_some() { ev.div.iter().map(|v| -v).collect() } else { vec![0.0; batch] };
        Ok((ev.b, dl))
    };
    let axpy = |x: &[f64], k: &[f64], h: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + h * b).collect() };
    for s in 0..steps {
        let t = st.times[s];
        let x = st.x.clone();
        let (k1, l1) = stage(&mut st, &x, t)?;
        let (k2, l2) = stage(&mut st, &axpy(&x, &k1, 0.5 * dt), t + 0.5 * dt)?;
        let (k3, l3) = stage(&mut st, &axpy(&x, &k2, 0.5 * dt), t + 0.5 * dt)?;
        let (k4, l4) = stage(&mut st, &axpy(&x, &k3, dt), t + dt)?;
        for i in 0..x.len() {
            st.x[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        for i in 0..batch {
            st.delta_logp[i] += dt / 6.0 * (l1[i] + 2.0 * l2[i] + 2.0 * l3[i] + l4[i]);
        }
        if st.x.iter().chain(&st.delta_logp).any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                step: s,
                reason: "state became non-finite".into(),
            });
        }
        if record {
            st.trajectory.push(st.x.clone());
        }
    }
    Ok(st)
}

/// Generated configurations with their model log-densities.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightedSamples {
    pub n: usize,
    pub d: usize,
    /// Prior draws, back to back.
    pub x0: Vec<f64>,
    /// Pushed-forward configurations, back to back.
    pub x1: Vec<f64>,
    pub log_rho0: Vec<f64>,
    pub log_rho1: Vec<f64>,
    /// `log ρ₁ − log ρ₀`.
    pub delta_logp: Vec<f64>,
    /// Unnormalized log importance weights; filled by
    /// [`importance_weights`](crate::boltzmann::importance_weights).
    pub log_w: Vec<f64>,
    pub reverse_passes: usize,
    pub field_evals: usize,
    pub max_div_jump: f64,
    pub rt_s: f64,
    pub rt_forward_s: f64,
    pub rt_backward_s: f64,
}

impl WeightedSamples {
    pub fn len(&self) -> usize {
        self.log_rho1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_rho1.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let w = self.n * self.d;
        &self.x1[i * w..(i + 1) * w]
    }
}

/// Draws `count` prior samples, pushes them through the flow in batches of
/// `batch` and records `log ρ₁ = log ρ₀ + ∫ −∇·b dt`.
pub fn sample_with_likelihood<R: Rng + ?Sized>(
    field: &dyn VectorField,
    prior: &PriorSpec,
    count: usize,
    steps: usize,
    mode: DivergenceMode,
    batch: usize,
    rng: &mut R,
) -> Result<WeightedSamples> {
    if prior.n != field.particles() || prior.d != field.dim() {
        return Err(Error::shape("prior and field disagree on n or d"));
    }
    let batch = batch.max(1);
    let start = std::time::Instant::now();
    let x0 = prior.sample(rng, count);
    let mut out = WeightedSamples {
        n: prior.n,
        d: prior.d,
        log_rho0: prior.log_density_batch(&x0),
        ..WeightedSamples::default()
    };
    let w = prior.width();
    for chunk in x0.chunks(batch * w) {
        let st = rk4_integrate(field, chunk, steps, Direction::Forward, Some(mode), false)?;
        out.x1.extend_from_slice(&st.x);
        out.delta_logp.extend_from_slice(&st.delta_logp);
        out.reverse_passes += st.reverse_passes;
        out.field_evals += st.field_evals;
        out.max_div_jump = out.max_div_jump.max(st.max_div_jump);
        out.rt_forward_s += st.forward_s;
        out.rt_backward_s += st.divergence_s;
    }
    out.log_rho1 = out.log_rho0.iter().zip(&out.delta_logp).map(|(a, b)| a + b).collect();
    out.x0 = x0;
    out.rt_s = start.elapsed().as_secs_f64();
    Ok(out)
}
