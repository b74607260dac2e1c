use num_complex::Complex64;

use super::{herm_eig, CMatrix, ZERO};
use crate::error::{Error, Result};

/// Linear map `(b_1, .., b_m) -> C_l = sum_j a_{jl} b_j` from `m` Hermitian
/// blocks to a list of coefficient matrices, measured in the weighted norm
/// `sum_l w_l ||C_l||_F^2`.
#[derive(Debug, Clone)]
pub struct AtomOperator {
    patterns: Vec<Vec<Complex64>>,
    weights: Vec<f64>,
}

impl AtomOperator {
    pub fn new(patterns: Vec<Vec<Complex64>>, weights: Vec<f64>) -> Self {
        assert!(patterns.iter().all(|p| p.len() == weights.len()), "pattern length must match weights");
        assert!(weights.iter().all(|&w| w >= 0.0), "weights must be nonnegative");
        AtomOperator { patterns, weights }
    }

    /// Atoms `T_n(lambda_j) (x) b_j`. Coefficient `l` sits at index `l + n - 1`
    /// and carries weight `n - |l|`, so the weighted norm is the Frobenius
    /// norm of the assembled block matrix.
    pub fn toeplitz(n: usize, lambdas: &[Complex64]) -> Self {
        let patterns = lambdas.iter().map(|&lam| toeplitz_pattern(n, lam)).collect();
        AtomOperator { patterns, weights: toeplitz_weights(n) }
    }

    pub fn atoms(&self) -> usize {
        self.patterns.len()
    }

    pub fn coefficients(&self) -> usize {
        self.weights.len()
    }

    pub fn patterns(&self) -> &[Vec<Complex64>] {
        &self.patterns
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn apply(&self, blocks: &[CMatrix]) -> Vec<CMatrix> {
        assert_eq!(blocks.len(), self.atoms());
        let p = blocks.first().map_or(0, |b| b.rows());
        (0..self.coefficients())
            .map(|l| {
                let mut acc = CMatrix::zeros(p, p);
                for (pat, b) in self.patterns.iter().zip(blocks) {
                    acc.axpy(pat[l], b);
                }
                acc
            })
            .collect()
    }

    pub fn weighted_norm(&self, coeffs: &[CMatrix]) -> f64 {
        coeffs.iter().zip(&self.weights).map(|(c, w)| w * c.frobenius_norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn residual_norm(&self, blocks: &[CMatrix], target: &[CMatrix]) -> f64 {
        let fitted = self.apply(blocks);
        let diff: Vec<CMatrix> = target.iter().zip(&fitted).map(|(t, f)| t - f).collect();
        self.weighted_norm(&diff)
    }
}

pub(crate) fn toeplitz_pattern(n: usize, lambda: Complex64) -> Vec<Complex64> {
    let n = n as i32;
    (-n + 1..n).map(|l| lambda.powi(l)).collect()
}

pub(crate) fn toeplitz_weights(n: usize) -> Vec<f64> {
    let n = n as i32;
    (-n + 1..n).map(|l| (n - l.abs()) as f64).collect()
}

#[derive(Debug, Clone)]
pub struct PsdLsqOptions {
    pub max_iter: usize,
    /// Gradient-mapping tolerance relative to `max(1, ||target||)`.
    pub stationarity_tol: f64,
    /// Attempt an active-face Newton step every this many iterations.
    pub polish_every: usize,
    /// Return the best iterate instead of `NoConvergence` when the budget runs out.
    pub accept_unconverged: bool,
    pub record_history: bool,
}

impl Default for PsdLsqOptions {
    fn default() -> Self {
        PsdLsqOptions {
            max_iter: 20_000,
            stationarity_tol: 1e-9,
            polish_every: 50,
            accept_unconverged: false,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PsdLsqSolution {
    pub blocks: Vec<CMatrix>,
    /// Weighted residual norm `||A(b) - target||`.
    pub residual: f64,
    pub iterations: usize,
    /// Scaled gradient-mapping norm at the returned point.
    pub stationarity: f64,
    pub converged: bool,
    /// Objective after each iteration, when requested.
    pub history: Vec<f64>,
}

/// Nearest PSD matrix in Frobenius norm (eigenvalue clipping).
pub fn project_psd(b: &CMatrix) -> Result<CMatrix> {
    if b.rows() == 1 {
        return Ok(CMatrix::from_real(1, 1, &[b[(0, 0)].re.max(0.0)]));
    }
    let eig = herm_eig(b)?;
    if eig.min() >= 0.0 {
        return Ok(b.hermitian_part());
    }
    let n = b.rows();
    let mut out = CMatrix::zeros(n, n);
    for k in 0..n {
        let lam = eig.values[k];
        if lam <= 0.0 {
            continue;
        }
        let v = eig.vector(k);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += v[i] * v[j].conj() * lam;
            }
        }
    }
    Ok(out)
}

/// The problem reduced to `f(b) = sum_jk g_jk <b_j, b_k> - 2 sum_j <b_j, h_j> + c0`.
struct Quadratic {
    m: usize,
    p: usize,
    g: Vec<f64>,
    h: Vec<CMatrix>,
    c0: f64,
}

impl Quadratic {
    fn new(op: &AtomOperator, target: &[CMatrix]) -> Self {
        let m = op.atoms();
        let p = target.first().map_or(0, |t| t.rows());
        let mut g = vec![0.0; m * m];
        for j in 0..m {
            for k in j..m {
                let s: f64 = (0..op.coefficients())
                    .map(|l| op.weights[l] * (op.patterns[j][l].conj() * op.patterns[k][l]).re)
                    .sum();
                g[j * m + k] = s;
                g[k * m + j] = s;
            }
        }
        let h = (0..m)
            .map(|j| {
                let mut acc = CMatrix::zeros(p, p);
                for l in 0..op.coefficients() {
                    acc.axpy(op.patterns[j][l].conj() * op.weights[l], &target[l]);
                }
                acc.hermitian_part()
            })
            .collect();
        let c0 = target.iter().zip(&op.weights).map(|(t, w)| w * t.frobenius_norm().powi(2)).sum();
        Quadratic { m, p, g, h, c0 }
    }

    /// `G b`, blockwise.
    fn gmul(&self, b: &[CMatrix]) -> Vec<CMatrix> {
        (0..self.m)
            .map(|j| {
                let mut acc = CMatrix::zeros(self.p, self.p);
                for k in 0..self.m {
                    let g = self.g[j * self.m + k];
                    if g != 0.0 {
                        acc.axpy(Complex64::new(g, 0.0), &b[k]);
                    }
                }
                acc
            })
            .collect()
    }

    fn value_from(&self, b: &[CMatrix], gb: &[CMatrix]) -> f64 {
        let s: f64 = (0..self.m).map(|j| b[j].real_inner(&gb[j]) - 2.0 * b[j].real_inner(&self.h[j])).sum();
        s + self.c0
    }

    fn value(&self, b: &[CMatrix]) -> f64 {
        self.value_from(b, &self.gmul(b))
    }

    /// Half the gradient: `G b - h`.
    fn half_gradient_from(&self, gb: &[CMatrix]) -> Vec<CMatrix> {
        gb.iter().zip(&self.h).map(|(x, h)| x - h).collect()
    }

    /// Largest eigenvalue of `g` by power iteration.
    fn lambda_max(&self) -> f64 {
        let m = self.m;
        if m == 0 {
            return 0.0;
        }
        let mut v: Vec<f64> = (0..m).map(|i| 1.0 + 0.01 * i as f64).collect();
        let mut est = 0.0;
        for _ in 0..500 {
            let w: Vec<f64> = (0..m).map(|j| (0..m).map(|k| self.g[j * m + k] * v[k]).sum()).collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let next = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = w.iter().map(|x| x / norm).collect();
            if (next - est).abs() <= 1e-12 * next {
                est = next;
                break;
            }
            est = next;
        }
        est
    }
}

fn step(q: &Quadratic, y: &[CMatrix], gy: &[CMatrix], inv_l: f64) -> Result<Vec<CMatrix>> {
    let hg = q.half_gradient_from(gy);
    y.iter()
        .zip(&hg)
        .map(|(b, g)| {
            let mut t = b.clone();
            t.axpy(Complex64::new(-inv_l, 0.0), g);
            project_psd(&t)
        })
        .collect()
}

/// `L ||x - P(x - grad/L)||` with `L` the gradient Lipschitz constant.
fn stationarity(q: &Quadratic, x: &[CMatrix], l: f64) -> Result<f64> {
    if l == 0.0 {
        return Ok(0.0);
    }
    let gx = q.gmul(x);
    let z = step(q, x, &gx, 1.0 / l)?;
    let s: f64 = x.iter().zip(&z).map(|(a, b)| (a - b).frobenius_norm().powi(2)).sum();
    Ok(2.0 * l * s.sqrt())
}

/// Newton step on the current active faces: each block is restricted to the
/// span of its positive eigenvectors and the quadratic is minimized exactly.
fn polish(q: &Quadratic, x: &[CMatrix]) -> Result<Option<Vec<CMatrix>>> {
    let p = q.p;
    let mut frames: Vec<CMatrix> = Vec::with_capacity(q.m);
    let top = x.iter().map(|b| b.max_abs()).fold(0.0, f64::max).max(1e-300);
    for b in x {
        let eig = herm_eig(b)?;
        let keep: Vec<usize> = (0..p).filter(|&k| eig.values[k] > 1e-10 * top).collect();
        frames.push(CMatrix::from_fn(p, keep.len(), |i, j| eig.vectors[(i, keep[j])]));
    }
    // Orthonormal real basis of Hermitian r x r matrices, mapped through each frame.
    let mut basis: Vec<(usize, CMatrix)> = Vec::new();
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    for (j, v) in frames.iter().enumerate() {
        let r = v.cols();
        for a in 0..r {
            for b in a..r {
                let mut variants = Vec::new();
                if a == b {
                    let mut e = CMatrix::zeros(r, r);
                    e[(a, a)] = Complex64::new(1.0, 0.0);
                    variants.push(e);
                } else {
                    let mut e = CMatrix::zeros(r, r);
                    e[(a, b)] = Complex64::new(s2, 0.0);
                    e[(b, a)] = Complex64::new(s2, 0.0);
                    variants.push(e);
                    let mut e = CMatrix::zeros(r, r);
                    e[(a, b)] = Complex64::new(0.0, s2);
                    e[(b, a)] = Complex64::new(0.0, -s2);
                    variants.push(e);
                }
                for e in variants {
                    basis.push((j, &(v * &e) * &v.adjoint()));
                }
            }
        }
    }
    let dim = basis.len();
    if dim == 0 {
        return Ok(None);
    }
    let mut h = vec![0.0; dim * dim];
    let mut rhs = vec![0.0; dim];
    for a in 0..dim {
        let (ja, ba) = &basis[a];
        rhs[a] = ba.real_inner(&q.h[*ja]);
        for b in a..dim {
            let (jb, bb) = &basis[b];
            let g = q.g[ja * q.m + jb];
            let v = if g == 0.0 { 0.0 } else { g * ba.real_inner(bb) };
            h[a * dim + b] = v;
            h[b * dim + a] = v;
        }
    }
    let s = semidefinite_solve(dim, &mut h, &rhs);
    let mut out = vec![CMatrix::zeros(p, p); q.m];
    for ((j, b), coef) in basis.iter().zip(&s) {
        out[*j].axpy(Complex64::new(*coef, 0.0), b);
    }
    Ok(Some(out))
}

/// Solves `H s = rhs` for symmetric PSD `H` by Cholesky, zeroing directions
/// whose pivot collapses.
fn semidefinite_solve(n: usize, h: &mut [f64], rhs: &[f64]) -> Vec<f64> {
    let maxdiag = (0..n).map(|i| h[i * n + i]).fold(0.0, f64::max);
    let mut alive = vec![true; n];
    for k in 0..n {
        let mut d = h[k * n + k];
        for j in 0..k {
            if alive[j] {
                d -= h[k * n + j] * h[k * n + j];
            }
        }
        if d <= 1e-14 * maxdiag {
            alive[k] = false;
            continue;
        }
        let d = d.sqrt();
        h[k * n + k] = d;
        for i in k + 1..n {
            let mut s = h[i * n + k];
            for j in 0..k {
                if alive[j] {
                    s -= h[i * n + j] * h[k * n + j];
                }
            }
            h[i * n + k] = s / d;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        if !alive[i] {
            continue;
        }
        let mut s = rhs[i];
        for j in 0..i {
            if alive[j] {
                s -= h[i * n + j] * y[j];
            }
        }
        y[i] = s / h[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        if !alive[i] {
            continue;
        }
        let mut s = y[i];
        for j in i + 1..n {
            if alive[j] {
                s -= h[j * n + i] * x[j];
            }
        }
        x[i] = s / h[i * n + i];
    }
    x
}

/// PSD-constrained least squares `min ||A(b) - target||` over PSD blocks.
///
/// Projected gradient with step `1/L` and monotone momentum; every
/// `polish_every` iterations the current active faces are solved exactly and
/// the result is kept when it is feasible and lowers the objective.
pub fn psd_lsq(
    op: &AtomOperator,
    target: &[CMatrix],
    warm_start: Option<&[CMatrix]>,
    opts: &PsdLsqOptions,
) -> Result<PsdLsqSolution> {
    if target.len() != op.coefficients() {
        return Err(Error::DimensionMismatch(format!(
            "operator has {} coefficients, target has {}",
            op.coefficients(),
            target.len()
        )));
    }
    let p = target.first().map_or(0, |t| t.rows());
    let q = Quadratic::new(op, target);
    let m = q.m;
    let scale = q.c0.sqrt().max(1.0);
    let tol = opts.stationarity_tol * scale;
    let lip = 2.0 * q.lambda_max() * 1.01;
    let inv_l = if lip > 0.0 { 2.0 / lip } else { 0.0 };

    let mut x: Vec<CMatrix> = match warm_start {
        Some(w) if w.len() == m => w.iter().map(project_psd).collect::<Result<_>>()?,
        _ => vec![CMatrix::zeros(p, p); m],
    };
    let mut fx = q.value(&x);
    let mut history = Vec::new();
    if m == 0 || lip == 0.0 {
        let residual = op.residual_norm(&x, target);
        return Ok(PsdLsqSolution { blocks: x, residual, iterations: 0, stationarity: 0.0, converged: true, history });
    }

    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;
    let mut last_stat = f64::INFINITY;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        if it % opts.polish_every.max(1) == 0 {
            if let Some(cand) = polish(&q, &x)? {
                let cand: Vec<CMatrix> = cand.iter().map(project_psd).collect::<Result<_>>()?;
                let fc = q.value(&cand);
                if fc <= fx {
                    x = cand;
                    fx = fc;
                    y = x.clone();
                    t = 1.0;
                }
            }
            last_stat = stationarity(&q, &x, lip)?;
            if last_stat <= tol {
                converged = true;
                if opts.record_history {
                    history.push(fx);
                }
                break;
            }
        }
        let gy = q.gmul(&y);
        let z = step(&q, &y, &gy, inv_l)?;
        let fz = q.value(&z);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let (x_next, f_next, restart) = if fz <= fx { (z.clone(), fz, false) } else { (x.clone(), fx, true) };
        if restart {
            y = x_next.clone();
            t = 1.0;
        } else {
            y = (0..m)
                .map(|j| {
                    let mut v = x_next[j].clone();
                    v.axpy(Complex64::new(t / t_next, 0.0), &(&z[j] - &x_next[j]));
                    v.axpy(Complex64::new((t - 1.0) / t_next, 0.0), &(&x_next[j] - &x[j]));
                    v
                })
                .collect();
            t = t_next;
        }
        x = x_next;
        fx = f_next;
        if opts.record_history {
            history.push(fx);
        }
    }
    if !converged {
        last_stat = stationarity(&q, &x, lip)?;
        converged = last_stat <= tol;
    }
    if !converged && !opts.accept_unconverged {
        return Err(Error::NoConvergence { what: "psd_lsq", budget: opts.max_iter });
    }
    let residual = op.residual_norm(&x, target);
    Ok(PsdLsqSolution { blocks: x, residual, iterations, stationarity: last_stat, converged, history })
}

#[allow(dead_code)]
fn zero_blocks(m: usize, p: usize) -> Vec<CMatrix> {
    vec![CMatrix::from_fn(p, p, |_, _| ZERO); m]
}
