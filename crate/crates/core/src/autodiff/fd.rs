use crate::error::{Error, Result};

/// Row-major dense matrix used for Jacobians.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Largest `|entry|` over the `d×d` blocks selected by `pick(row_block, col_block)`.
    pub fn block_max(&self, d: usize, pick: impl Fn(usize, usize) -> bool) -> f64 {
        let mut m: f64 = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                if pick(r / d, c / d) {
                    m = m.max(self.get(r, c).abs());
                }
            }
        }
        m
    }
}

/// Central finite-difference Jacobian `J_ab ≈ (f_a(x+εe_b) − f_a(x−εe_b)) / 2ε`.
pub fn full_jacobian_fd<F>(f: F, x: &[f64], eps: f64) -> Result<DenseMatrix>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !(eps > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let mut probe = x.to_vec();
    let mut columns = Vec::with_capacity(x.len());
    let mut rows = None;
    for b in 0..x.len() {
        probe[b] = x[b] + eps;
        let plus = f(&probe)?;
        probe[b] = x[b] - eps;
        let minus = f(&probe)?;
        probe[b] = x[b];
        if plus.iter().chain(&minus).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("finite-difference evaluation".into()));
        }
        rows.get_or_insert(plus.len());
        columns.push(
            plus.iter()
                .zip(&minus)
                .map(|(p, m)| (p - m) / (2.0 * eps))
                .collect::<Vec<_>>(),
        );
    }
    let rows = rows.unwrap_or(0);
    let mut out = DenseMatrix::zeros(rows, x.len());
    for (b, col) in columns.iter().enumerate() {
        for (a, v) in col.iter().enumerate() {
            out.set(a, b, *v);
        }
    }
    Ok(out)
}
