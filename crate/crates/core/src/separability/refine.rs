//! Levenberg–Marquardt refinement of an atomic decomposition over the angles
//! and factors `c_j` of the blocks `b_j = c_j c_j^*`, so iterates stay PSD.

use num_complex::Complex64;

use crate::error::Result;
use crate::matcore::{herm_eig, CMatrix};

/// Parameter count above which the dense normal equations get too costly.
pub(crate) const MAX_PARAMS: usize = 480;

struct Problem<'a> {
    target: &'a [CMatrix],
    n: usize,
    p: usize,
    m: usize,
}

impl Problem<'_> {
    fn params(&self) -> usize {
        self.m * (1 + 2 * self.p * self.p)
    }

    fn rows(&self) -> usize {
        (2 * self.n - 1) * self.p * self.p * 2
    }

    fn unpack(&self, x: &[f64]) -> (Vec<Complex64>, Vec<CMatrix>) {
        let p2 = self.p * self.p;
        let lambdas = x[..self.m].iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
        let factors = (0..self.m)
            .map(|j| {
                let off = self.m + 2 * p2 * j;
                CMatrix::from_fn(self.p, self.p, |c, d| {
                    let k = off + 2 * (c * self.p + d);
                    Complex64::new(x[k], x[k + 1])
                })
            })
            .collect();
        (lambdas, factors)
    }

    /// Weighted residual `sqrt(n - |l|) (tau_l - sum_j lambda_j^l b_j)` as reals.
    fn residual(&self, lambdas: &[Complex64], blocks: &[CMatrix]) -> Vec<f64> {
        let (n, p) = (self.n, self.p);
        let mut r = Vec::with_capacity(self.rows());
        for (idx, tau) in self.target.iter().enumerate() {
            let l = idx as isize - n as isize + 1;
            let w = ((n as isize - l.abs()) as f64).sqrt();
            let mut acc = tau.clone();
            for (lam, b) in lambdas.iter().zip(blocks) {
                acc.axpy(-lam.powi(l as i32), b);
            }
            for a in 0..p {
                for b in 0..p {
                    r.push(w * acc[(a, b)].re);
                    r.push(w * acc[(a, b)].im);
                }
            }
        }
        r
    }

    /// Row-major Jacobian of `residual` with respect to the packed parameters.
    fn jacobian(&self, lambdas: &[Complex64], factors: &[CMatrix], blocks: &[CMatrix]) -> Vec<f64> {
        let (n, p, m) = (self.n, self.p, self.m);
        let k = self.params();
        let p2 = p * p;
        let mut jac = vec![0.0; self.rows() * k];
        for idx in 0..2 * n - 1 {
            let l = idx as isize - n as isize + 1;
            let w = ((n as isize - l.abs()) as f64).sqrt();
            for j in 0..m {
                let z = lambdas[j].powi(l as i32) * w;
                let c = &factors[j];
                for a in 0..p {
                    for b in 0..p {
                        let row = ((idx * p + a) * p + b) * 2;
                        let d = -Complex64::new(0.0, l as f64) * z * blocks[j][(a, b)];
                        jac[row * k + j] = d.re;
                        jac[(row + 1) * k + j] = d.im;
                        // d b(a,b) = delta_ac conj(c(b,d')) + c(a,d') delta_bc for the real
                        // part of c(c,d'), times i and -i for the imaginary part.
                        for dd in 0..p {
                            let base = m + 2 * p2 * j;
                            let u = c[(b, dd)].conj();
                            let v = c[(a, dd)];
                            let ka = base + 2 * (a * p + dd);
                            let kb = base + 2 * (b * p + dd);
                            let du = -z * u;
                            let dv = -z * v;
                            jac[row * k + ka] += du.re;
                            jac[(row + 1) * k + ka] += du.im;
                            jac[row * k + kb] += dv.re;
                            jac[(row + 1) * k + kb] += dv.im;
                            let diu = du * Complex64::i();
                            let div = -dv * Complex64::i();
                            jac[row * k + ka + 1] += diu.re;
                            jac[(row + 1) * k + ka + 1] += diu.im;
                            jac[row * k + kb + 1] += div.re;
                            jac[(row + 1) * k + kb + 1] += div.im;
                        }
                    }
                }
            }
        }
        jac
    }
}

fn gram(factors: &[CMatrix]) -> Vec<CMatrix> {
    factors.iter().map(|c| c * &c.adjoint()).collect()
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solves the SPD system `a x = b` in place by Cholesky; `None` if `a` is not
/// numerically positive definite.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], k: usize) -> Option<()> {
    for j in 0..k {
        let mut d = a[j * k + j];
        for t in 0..j {
            d -= a[j * k + t] * a[j * k + t];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        a[j * k + j] = d;
        for i in j + 1..k {
            let mut s = a[i * k + j];
            for t in 0..j {
                s -= a[i * k + t] * a[j * k + t];
            }
            a[i * k + j] = s / d;
        }
    }
    for i in 0..k {
        let mut s = b[i];
        for t in 0..i {
            s -= a[i * k + t] * b[t];
        }
        b[i] = s / a[i * k + i];
    }
    for i in (0..k).rev() {
        let mut s = b[i];
        for t in i + 1..k {
            s -= a[t * k + i] * b[t];
        }
        b[i] = s / a[i * k + i];
    }
    Some(())
}

/// Refines `(lambdas, blocks)` against `target` until the residual is below
/// `goal` or stops decreasing. Returns the refined pair and its residual
/// when it improves on the input.
pub(crate) fn levenberg_marquardt(
    target: &[CMatrix],
    n: usize,
    lambdas: &[Complex64],
    blocks: &[CMatrix],
    goal: f64,
    max_iter: usize,
) -> Result<Option<(Vec<Complex64>, Vec<CMatrix>, f64)>> {
    let m = lambdas.len();
    if m == 0 {
        return Ok(None);
    }
    let p = blocks[0].rows();
    let prob = Problem { target, n, p, m };
    let k = prob.params();
    if k > MAX_PARAMS {
        return Ok(None);
    }

    let mut x = vec![0.0; k];
    for (j, (lam, b)) in lambdas.iter().zip(blocks).enumerate() {
        x[j] = lam.arg();
        let eig = herm_eig(&b.hermitian_part())?;
        let off = m + 2 * p * p * j;
        for c in 0..p {
            for d in 0..p {
                let v = eig.vectors[(c, d)] * eig.values[d].max(0.0).sqrt();
                x[off + 2 * (c * p + d)] = v.re;
                x[off + 2 * (c * p + d) + 1] = v.im;
            }
        }
    }

    let (mut lam, mut fac) = prob.unpack(&x);
    let mut blk = gram(&fac);
    let mut r = prob.residual(&lam, &blk);
    let start = norm(&r);
    let mut f = start;
    let mut mu = 1e-3;
    let rows = prob.rows();

    for _ in 0..max_iter {
        if f <= goal {
            break;
        }
        let jac = prob.jacobian(&lam, &fac, &blk);
        let mut jtj = vec![0.0; k * k];
        let mut jtr = vec![0.0; k];
        for row in 0..rows {
            let jr = &jac[row * k..(row + 1) * k];
            for a in 0..k {
                if jr[a] == 0.0 {
                    continue;
                }
                jtr[a] -= jr[a] * r[row];
                for b in 0..=a {
                    jtj[a * k + b] += jr[a] * jr[b];
                }
            }
        }
        let diag_max = (0..k).map(|a| jtj[a * k + a]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut accepted = false;
        while mu < 1e12 {
            let mut sys = jtj.clone();
            for a in 0..k {
                sys[a * k + a] += mu * (jtj[a * k + a] + 1e-12 * diag_max);
            }
            let mut step = jtr.clone();
            if cholesky_solve(&mut sys, &mut step, k).is_none() {
                mu *= 10.0;
                continue;
            }
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            let (tl, tf) = prob.unpack(&trial);
            let tb = gram(&tf);
            let tr = prob.residual(&tl, &tb);
            let tfv = norm(&tr);
            if tfv < f {
                let gain = f - tfv;
                x = trial;
                (lam, fac, blk, r) = (tl, tf, tb, tr);
                f = tfv;
                mu = (mu * 0.3).max(1e-12);
                accepted = gain > 1e-9 * f;
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            break;
        }
    }

    if f < start {
        let lambdas = lam.iter().map(|l| l / l.norm()).collect();
        Ok(Some((lambdas, blk, f)))
    } else {
        Ok(None)
    }
}
