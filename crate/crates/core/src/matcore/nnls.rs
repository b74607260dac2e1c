use crate::error::{Error, Result};

/// Dense row-major real matrix, only as much as the least-squares solvers need.
#[derive(Debug, Clone, PartialEq)]
pub struct RMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        RMatrix { rows, cols, data }
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        Self::from_fn(rows, columns.len(), |i, j| columns[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `M^T r`.
    pub fn tmul_vec(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &ri) in r.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(&self.data[i * self.cols..(i + 1) * self.cols]) {
                *o += a * ri;
            }
        }
        out
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Least squares restricted to `cols` by Householder QR. Columns whose
/// reduced diagonal collapses are left at zero.
fn restricted_lsq(m: &RMatrix, y: &[f64], cols: &[usize]) -> Vec<f64> {
    let rows = m.rows();
    let k = cols.len();
    let mut a: Vec<f64> = Vec::with_capacity(rows * k);
    for i in 0..rows {
        for &c in cols {
            a.push(m.get(i, c));
        }
    }
    let mut b = y.to_vec();
    let steps = k.min(rows);
    let mut diag = vec![0.0; k];
    let col_scale = cols.iter().map(|&c| (0..rows).map(|i| m.get(i, c).powi(2)).sum::<f64>().sqrt()).collect::<Vec<_>>();
    for j in 0..steps {
        let norm = (j..rows).map(|i| a[i * k + j].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            diag[j] = 0.0;
            continue;
        }
        let alpha = if a[j * k + j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..rows).map(|i| a[i * k + j]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            diag[j] = alpha;
            continue;
        }
        for c in j..k {
            let dot: f64 = (j..rows).map(|i| v[i - j] * a[i * k + c]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in j..rows {
                a[i * k + c] -= f * v[i - j];
            }
        }
        let dot: f64 = (j..rows).map(|i| v[i - j] * b[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in j..rows {
            b[i] -= f * v[i - j];
        }
        diag[j] = a[j * k + j];
    }
    let mut z = vec![0.0; k];
    for j in (0..steps).rev() {
        if diag[j].abs() <= 1e-13 * col_scale[j].max(f64::MIN_POSITIVE) {
            z[j] = 0.0;
            continue;
        }
        let s: f64 = (j + 1..steps).map(|c| a[j * k + c] * z[c]).sum();
        z[j] = (b[j] - s) / diag[j];
    }
    z
}

/// Unconstrained least squares `min ||M x - y||_2`; rank-deficient
/// directions are left at zero.
pub(crate) fn lstsq(m: &RMatrix, y: &[f64]) -> Vec<f64> {
    let cols: Vec<usize> = (0..m.cols()).collect();
    restricted_lsq(m, y, &cols)
}

/// Nonnegative least squares `min ||M x - y||_2, x >= 0` (Lawson–Hanson active set).
pub fn nnls(m: &RMatrix, y: &[f64]) -> Result<NnlsSolution> {
    assert_eq!(m.rows(), y.len(), "nnls: rhs length does not match rows");
    let n = m.cols();
    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let scale = m.max_abs().max(1.0) * y.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let grad_tol = 1e-12 * scale * (m.rows().max(1) as f64);
    let budget = 3 * n + 30;
    let mut iterations = 0;

    let residual = |x: &[f64]| -> Vec<f64> { m.mul_vec(x).iter().zip(y).map(|(a, b)| b - a).collect() };
    // Columns whose trial coefficient came out nonpositive; cleared whenever x moves.
    let mut blocked = vec![false; n];

    loop {
        let w = m.tmul_vec(&residual(&x));
        let candidate = (0..n)
            .filter(|&j| !passive[j] && !blocked[j] && w[j] > grad_tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(t) = candidate else { break };
        let mut cols: Vec<usize> = (0..n).filter(|&j| passive[j] || j == t).collect();
        let mut z = restricted_lsq(m, y, &cols);
        let pos_t = cols.iter().position(|&c| c == t).expect("t is in cols");
        if z[pos_t] <= 0.0 {
            blocked[t] = true;
            continue;
        }
        iterations += 1;
        if iterations > budget {
            return Err(Error::NoConvergence { what: "nnls", budget });
        }
        passive[t] = true;
        blocked.iter_mut().for_each(|b| *b = false);
        loop {
            if z.iter().all(|&v| v > 0.0) {
                for (&c, &v) in cols.iter().zip(&z) {
                    x[c] = v;
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (&c, &v) in cols.iter().zip(&z) {
                if v <= 0.0 {
                    alpha = alpha.min(x[c] / (x[c] - v));
                }
            }
            for (&c, &v) in cols.iter().zip(&z) {
                x[c] += alpha * (v - x[c]);
            }
            for &c in &cols {
                if x[c] <= 1e-15 * scale {
                    x[c] = 0.0;
                    passive[c] = false;
                }
            }
            cols = (0..n).filter(|&j| passive[j]).collect();
            if cols.is_empty() {
                break;
            }
            z = restricted_lsq(m, y, &cols);
        }
    }
    let r = residual(&x);
    let residual_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(NnlsSolution { x, residual_norm, iterations })
}
