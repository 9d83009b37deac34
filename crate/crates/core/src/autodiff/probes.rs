use super::program::AdjointProgram;
use crate::error::{Error, Result};

/// The `d` indicator vectors that select one coordinate axis across all
/// particles: `v_i` has a one at `i + d·k` for every particle `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeVectorSet {
    n: usize,
    d: usize,
}

impl ProbeVectorSet {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invalid("probe set needs n ≥ 1 and d ≥ 1"));
        }
        Ok(ProbeVectorSet { n, d })
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn width(&self) -> usize {
        self.n * self.d
    }

    /// Dense form of probe `axis` (0-based).
    pub fn vector(&self, axis: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.width()];
        for k in 0..self.n {
            v[axis + self.d * k] = 1.0;
        }
        v
    }

    pub fn vectors(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.d).map(|a| self.vector(a))
    }
}

/// Diagonal of the program's Jacobian (with its current stop-gradient
/// markers) from exactly `d` reverse passes.
///
/// Only exact when the effective Jacobian is block-diagonal with `d×d`
/// blocks; entry `a + d·k` is read from `v_aᵀJ` at the same position.
pub fn jacobian_diagonal(program: &AdjointProgram, probes: &ProbeVectorSet) -> Result<Vec<f64>> {
    let width = probes.width();
    if program.input_width() != width || program.output_width() != width {
        return Err(Error::InvalidProbes {
            n: probes.particles(),
            d: probes.dim(),
            width: program.output_width(),
        });
    }
    let d = probes.dim();
    let mut diag = vec![0.0; width];
    for (axis, v) in probes.vectors().enumerate() {
        let row = program.vjp(&v)?;
        for k in 0..probes.particles() {
            let idx = axis + d * k;
            diag[idx] = row[idx];
        }
    }
    Ok(diag)
}

/// Diagonal of the Jacobian from one reverse pass per output coordinate.
pub fn jacobian_diagonal_brute(program: &AdjointProgram) -> Result<Vec<f64>> {
    let width = program.output_width();
    if program.input_width() != width {
        return Err(Error::shape("brute diagonal needs a square Jacobian"));
    }
    let mut diag = vec![0.0; width];
    let mut e = vec![0.0; width];
    for m in 0..width {
        e[m] = 1.0;
        diag[m] = program.vjp(&e)?[m];
        e[m] = 0.0;
    }
    Ok(diag)
}

/// Full Jacobian (`rows = outputs`) from one reverse pass per output.
pub fn jacobian_reverse(program: &AdjointProgram) -> Result<super::DenseMatrix> {
    let rows = program.output_width();
    let cols = program.input_width();
    let mut out = super::DenseMatrix::zeros(rows, cols);
    let mut e = vec![0.0; rows];
    for m in 0..rows {
        e[m] = 1.0;
        let g = program.vjp(&e)?;
        out.row_mut(m).copy_from_slice(&g);
        e[m] = 0.0;
    }
    Ok(out)
}
