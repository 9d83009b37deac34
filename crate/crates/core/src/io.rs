//! Plain-text formats: `%.17g` number formatting, sample CSVs and the
//! training-data CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Formats like C's `printf("%.17g", v)`, which round-trips every f64.
pub fn g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    const P: i32 = 17;
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let x: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&x) {
        let fixed = format!("{:.*}", (P - 1 - x) as usize, v);
        strip_zeros(&fixed).to_string()
    } else {
        let m = strip_zeros(mantissa);
        format!("{m}e{}{:02}", if x < 0 { '-' } else { '+' }, x.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Joins values with commas using [`g17`].
pub fn csv_row(values: impl IntoIterator<Item = f64>) -> String {
    let mut out = String::new();
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&g17(v));
    }
    out
}

/// Configurations with per-sample particle labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub d: usize,
    /// Positions, samples back to back.
    pub x: Vec<f64>,
    /// Labels, samples back to back.
    pub z: Vec<usize>,
}

impl Dataset {
    pub fn new(n: usize, d: usize, x: Vec<f64>, z: Vec<usize>) -> Result<Self> {
        if n == 0 || d == 0 || x.len() % (n * d) != 0 || z.len() * d != x.len() {
            return Err(Error::Data(format!(
                "{} coordinates and {} labels do not describe {n}×{d} samples",
                x.len(),
                z.len()
            )));
        }
        Ok(Dataset { n, d, x, z })
    }

    pub fn len(&self) -> usize {
        self.x.len() / (self.n * self.d)
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let w = self.n * self.d;
        &self.x[i * w..(i + 1) * w]
    }

    pub fn labels(&self, i: usize) -> &[usize] {
        &self.z[i * self.n..(i + 1) * self.n]
    }

    /// The labels shared by every sample, if they agree.
    pub fn shared_labels(&self) -> Result<Vec<usize>> {
        if self.is_empty() {
            return Ok(vec![0; self.n]);
        }
        let first = self.labels(0).to_vec();
        if (1..self.len()).any(|i| self.labels(i) != first.as_slice()) {
            return Err(Error::Data("samples carry different particle labels".into()));
        }
        Ok(first)
    }

    /// `n,d` header, a value line, then one row per sample: positions then
    /// labels.
    pub fn to_csv(&self) -> String {
        let mut out = format!("n,d\n{},{}\n", self.n, self.d);
        for i in 0..self.len() {
            out.push_str(&csv_row(self.sample(i).iter().copied()));
            for z in self.labels(i) {
                let _ = write!(out, ",{z}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Data("empty data file".into()))?;
        if header.trim() != "n,d" {
            return Err(Error::Data(format!("expected header `n,d`, found `{header}`")));
        }
        let dims = lines.next().ok_or_else(|| Error::Data("missing n,d values".into()))?;
        let dims: Vec<usize> = dims
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::Data(format!("bad n,d line `{dims}`"))))
            .collect::<Result<_>>()?;
        let [n, d] = dims[..] else {
            return Err(Error::Data("n,d line needs two integers".into()));
        };
        let mut x = Vec::new();
        let mut z = Vec::new();
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != n * d + n {
                return Err(Error::Data(format!(
                    "row {} has {} fields, expected {}",
                    row + 1,
                    fields.len(),
                    n * d + n
                )));
            }
            for f in &fields[..n * d] {
                let v: f64 = f.parse().map_err(|_| Error::Data(format!("row {}: bad number `{f}`", row + 1)))?;
                if !v.is_finite() {
                    return Err(Error::Data(format!("row {}: non-finite coordinate", row + 1)));
                }
                x.push(v);
            }
            for f in &fields[n * d..] {
                z.push(f.parse().map_err(|_| Error::Data(format!("row {}: bad label `{f}`", row + 1)))?);
            }
        }
        Dataset::new(n, d, x, z)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Self::from_csv(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}
