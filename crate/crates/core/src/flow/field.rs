use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{full_jacobian_fd, jacobian_diagonal, DetachGroup, ProbeVectorSet};
use crate::error::{Error, Result};
use crate::network::{HompParams, ModelKind, NetworkProgram};

/// How the divergence of the field is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceMode {
    /// `d` probe reverse passes through the detached program.
    Hollow,
    /// One reverse pass per particle coordinate.
    Brute,
    /// Trace of a central finite-difference Jacobian.
    FdOracle,
}

impl std::str::FromStr for DivergenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hollow" => Ok(DivergenceMode::Hollow),
            "brute" => Ok(DivergenceMode::Brute),
            "fd_oracle" | "fd-oracle" => Ok(DivergenceMode::FdOracle),
            other => Err(Error::invalid(format!("unknown divergence mode `{other}`"))),
        }
    }
}

/// Finite-difference step used by [`DivergenceMode::FdOracle`].
pub const FD_STEP: f64 = 1e-5;

/// Result of evaluating a field on a batch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldEval {
    pub b: Vec<f64>,
    /// Divergence per sample; empty when not requested.
    pub div: Vec<f64>,
    pub reverse_passes: usize,
    pub forward_s: f64,
    pub divergence_s: f64,
}

/// A time-dependent vector field on batches of `n × d` configurations.
pub trait VectorField {
    fn particles(&self) -> usize;
    fn dim(&self) -> usize;

    fn width(&self) -> usize {
        self.particles() * self.dim()
    }

    /// Evaluates `b(x, t)` for `t.len()` samples stored back to back in `x`,
    /// plus the divergence when `div` is set.
    fn eval(&self, x: &[f64], t: &[f64], div: Option<DivergenceMode>) -> Result<FieldEval>;
}

/// `b(x) = A x` per sample, with `A` acting on the flattened `n·d` vector.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearField {
    n: usize,
    d: usize,
    a: Vec<f64>,
}

impl LinearField {
    pub fn new(n: usize, d: usize, a: Vec<f64>) -> Result<Self> {
        let w = n * d;
        if a.len() != w * w {
            return Err(Error::shape(format!("matrix has {} entries, expected {}", a.len(), w * w)));
        }
        Ok(LinearField { n, d, a })
    }

    /// `b(x) = c·x`.
    pub fn scaled_identity(n: usize, d: usize, c: f64) -> Self {
        let w = n * d;
        let mut a = vec![0.0; w * w];
        for i in 0..w {
            a[i * w + i] = c;
        }
        LinearField { n, d, a }
    }

    /// The same `d×d` block applied to every particle.
    pub fn per_particle(n: usize, d: usize, block: &[f64]) -> Result<Self> {
        if block.len() != d * d {
            return Err(Error::shape("per-particle block must be d×d"));
        }
        let w = n * d;
        let mut a = vec![0.0; w * w];
        for p in 0..n {
            for r in 0..d {
                for c in 0..d {
                    a[(p * d + r) * w + p * d + c] = block[r * d + c];
                }
            }
        }
        Ok(LinearField { n, d, a })
    }

    fn trace(&self) -> f64 {
        let w = self.n * self.d;
        (0..w).map(|i| self.a[i * w + i]).sum()
    }
}

impl VectorField for LinearField {
    fn particles(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn eval(&self, x: &[f64], t: &[f64], div: Option<DivergenceMode>) -> Result<FieldEval> {
        let w = self.width();
        check_batch(x, t, w)?;
        let mut b = vec![0.0; x.len()];
        for (xs, bs) in x.chunks(w).zip(b.chunks_mut(w)) {
            for r in 0..w {
                bs[r] = (0..w).map(|c| self.a[r * w + c] * xs[c]).sum();
            }
        }
        Ok(FieldEval {
            b,
            div: if div.is_some() { vec![self.trace(); t.len()] } else { Vec::new() },
            ..FieldEval::default()
        })
    }
}

fn check_batch(x: &[f64], t: &[f64], width: usize) -> Result<()> {
    if x.len() != t.len() * width {
        return Err(Error::shape(format!(
            "{} coordinates for {} samples of width {width}",
            x.len(),
            t.len()
        )));
    }
    Ok(())
}

/// The network as a vector field. Graphs are rebuilt at every evaluation.
#[derive(Clone, Debug)]
pub struct NetworkField {
    params: HompParams,
    labels: Vec<usize>,
}

impl NetworkField {
    pub fn new(params: HompParams, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != params.config().n_particles {
            return Err(Error::shape("one label per particle is required"));
        }
        Ok(NetworkField { params, labels })
    }

    /// All labels zero.
    pub fn unlabeled(params: HompParams) -> Self {
        let n = params.config().n_particles;
        NetworkField {
            params,
            labels: vec![0; n],
        }
    }

    pub fn params(&self) -> &HompParams {
        &self.params
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

impl VectorField for NetworkField {
    fn particles(&self) -> usize {
        self.params.config().n_particles
    }

    fn dim(&self) -> usize {
        self.params.config().dim
    }

    fn eval(&self, x: &[f64], t: &[f64], div: Option<DivergenceMode>) -> Result<FieldEval> {
        check_batch(x, t, self.width())?;
        let start = Instant::now();
        let mut prog = NetworkProgram::build(&self.params, x, &self.labels, t)?;
        let forward_s = start.elapsed().as_secs_f64();
        let b = prog.output().to_vec();
        let Some(mode) = div else {
            return Ok(FieldEval {
                b,
                forward_s,
                ..FieldEval::default()
            });
        };
        let start = Instant::now();
        let (div, passes) = match mode {
            DivergenceMode::FdOracle => (fd_divergence(self, x, t)?, 0),
            _ => program_divergence(&mut prog, mode)?,
        };
        Ok(FieldEval {
            b,
            div,
            reverse_passes: passes,
            forward_s,
            divergence_s: start.elapsed().as_secs_f64(),
        })
    }
}

/// Per-sample divergence of an evaluated network program and the number of
/// reverse passes used. Samples share passes: their Jacobians are
/// independent, so one cotangent can probe the same coordinate of every
/// sample at once.
pub fn program_divergence(prog: &mut NetworkProgram, mode: DivergenceMode) -> Result<(Vec<f64>, usize)> {
    let (batch, n, d) = (prog.batch(), prog.n(), prog.d());
    let before = prog.program().counters().reverse_passes;
    let diag = match mode {
        DivergenceMode::Hollow => {
            if prog.kind() != ModelKind::Hollow {
                return Err(Error::Unsupported(
                    "hollow divergence requires a hollow network; use brute".into(),
                ));
            }
            prog.program_mut().set_detach(DetachGroup::Conditioner, true);
            let probes = ProbeVectorSet::new(batch * n, d)?;
            jacobian_diagonal(prog.program(), &probes)?
        }
        DivergenceMode::Brute => {
            prog.program_mut().set_detach(DetachGroup::Conditioner, false);
            let w = n * d;
            let mut diag = vec![0.0; batch * w];
            let mut e = vec![0.0; batch * w];
            for m in 0..w {
                for s in 0..batch {
                    e[s * w + m] = 1.0;
                }
                let g = prog.program().vjp(&e)?;
                for s in 0..batch {
                    diag[s * w + m] = g[s * w + m];
                    e[s * w + m] = 0.0;
                }
            }
            diag
        }
        DivergenceMode::FdOracle => {
            return Err(Error::invalid("finite differences need the field, not a recorded program"));
        }
    };
    prog.program_mut().set_detach(DetachGroup::Conditioner, true);
    let passes = prog.program().counters().reverse_passes - before;
    let div = diag.chunks(n * d).map(|c| c.iter().sum()).collect();
    Ok((div, passes))
}

/// Divergence from the trace of a central-difference Jacobian, with the
/// graph rebuilt at every perturbed point.
pub fn fd_divergence(field: &dyn VectorField, x: &[f64], t: &[f64]) -> Result<Vec<f64>> {
    let w = field.width();
    let mut out = Vec::with_capacity(t.len());
    for (xs, &ts) in x.chunks(w).zip(t) {
        let jac = full_jacobian_fd(|y| Ok(field.eval(y, &[ts], None)?.b), xs, FD_STEP)?;
        out.push(jac.trace());
    }
    Ok(out)
}
