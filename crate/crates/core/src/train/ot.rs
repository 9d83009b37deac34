use crate::error::{Error, Result};

/// Exact minimum-cost assignment for a square `n × n` cost matrix
/// (row-major). Returns `col[row]`.
pub fn hungarian(cost: &[f64], n: usize) -> Result<Vec<usize>> {
    if cost.len() != n * n {
        return Err(Error::shape(format!("{} costs for a {n}×{n} assignment", cost.len())));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("assignment cost".into()));
    }
    // Shortest augmenting paths with row/column potentials; index 0 is a
    // sentinel column.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0; n];
    for j in 1..=n {
        if owner[j] > 0 {
            col[owner[j] - 1] = j - 1;
        }
    }
    Ok(col)
}

/// Optimal pairing of two equally sized batches under squared Euclidean
/// cost.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    /// `batch1` index paired with each `batch0` sample.
    pub perm: Vec<usize>,
    pub cost: f64,
}

pub fn squared_cost(batch0: &[f64], batch1: &[f64], width: usize) -> Vec<f64> {
    let a: Vec<&[f64]> = batch0.chunks(width).collect();
    let b: Vec<&[f64]> = batch1.chunks(width).collect();
    let mut c = Vec::with_capacity(a.len() * b.len());
    for x in &a {
        for y in &b {
            c.push(x.iter().zip(*y).map(|(p, q)| (p - q) * (p - q)).sum());
        }
    }
    c
}

/// Minibatch optimal transport: the permutation minimizing
/// `Σ ‖x0_i − x1_π(i)‖²`.
pub fn minibatch_ot_coupling(batch0: &[f64], batch1: &[f64], width: usize) -> Result<Coupling> {
    if width == 0 || batch0.len() % width != 0 {
        return Err(Error::shape("batch length is not a multiple of the sample width"));
    }
    if batch0.len() != batch1.len() {
        return Err(Error::shape(format!(
            "batches of {} and {} values",
            batch0.len(),
            batch1.len()
        )));
    }
    let n = batch0.len() / width;
    let cost = squared_cost(batch0, batch1, width);
    let perm = hungarian(&cost, n)?;
    let total = perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok(Coupling { perm, cost: total })
}
