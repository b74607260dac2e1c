use std::f64::consts::TAU;

use num_complex::Complex64;

use super::{merge_atoms, Atom, AtomicDecomposition};
use crate::error::{Error, Result};
use crate::matcore::{herm_eig, lstsq, nnls, CMatrix, RMatrix, DEFAULT_RANK_TOL};
use crate::positivity::{check_toeplitz_psd, Verdict, DEFAULT_TOL};
use crate::toeplitz::BlockToeplitz;

const SCAN_GRID: usize = 8192;

/// The scalar order unit as `sum_k (1/n) T_n(omega^k)`, `omega = e^{2 pi i / n}`.
pub fn decompose_identity(n: usize) -> AtomicDecomposition {
    let atoms = (0..n)
        .map(|k| Atom {
            lambda: Complex64::from_polar(1.0, TAU * k as f64 / n as f64),
            b: CMatrix::from_real(1, 1, &[1.0 / n as f64]),
        })
        .collect();
    let mut dec = AtomicDecomposition { n, p: 1, atoms, residual: 0.0 };
    dec.residual = dec.residual_against(&BlockToeplitz::order_unit(n, 1));
    dec
}

/// Real/imaginary moment rows for `tau_l`, `l = 0..n-1`, weighted so the
/// Euclidean norm equals the Frobenius norm of the assembled Hermitian matrix.
fn moment_system(n: usize, lambdas: &[Complex64], target: &[Complex64]) -> (RMatrix, Vec<f64>) {
    let rows = 2 * n;
    let w = |l: usize| if l == 0 { (n as f64).sqrt() } else { (2.0 * (n - l) as f64).sqrt() };
    let m = RMatrix::from_fn(rows, lambdas.len(), |r, j| {
        let l = r / 2;
        let z = lambdas[j].powi(l as i32) * w(l);
        if r % 2 == 0 {
            z.re
        } else {
            z.im
        }
    });
    let y = (0..rows)
        .map(|r| {
            let l = r / 2;
            let z = target[l] * w(l);
            if r % 2 == 0 {
                z.re
            } else {
                z.im
            }
        })
        .collect();
    (m, y)
}

/// `g(theta) = sum_c |gamma(e^{i theta})^* v_c|^2` over the columns of `basis`
/// and its first derivative.
fn music(basis: &[Vec<Complex64>], theta: f64) -> (f64, f64, f64) {
    let mut g = 0.0;
    let mut dg = 0.0;
    let mut curv = 0.0;
    let step = Complex64::from_polar(1.0, -theta);
    for v in basis {
        let mut s = Complex64::new(0.0, 0.0);
        let mut ds = Complex64::new(0.0, 0.0);
        let mut zk = Complex64::new(1.0, 0.0);
        for (k, vk) in v.iter().enumerate() {
            let t = zk * vk;
            s += t;
            ds += t * Complex64::new(0.0, -(k as f64));
            zk *= step;
        }
        g += s.norm_sqr();
        dg += 2.0 * (s.conj() * ds).re;
        curv += 2.0 * ds.norm_sqr();
    }
    (g, dg, curv)
}

/// Zeros of `g` on the circle: local minima of a dense scan, refined by
/// bisection on `g'` and Gauss-Newton.
fn circle_roots(basis: &[Vec<Complex64>], max_roots: usize) -> Vec<f64> {
    let h = TAU / SCAN_GRID as f64;
    let vals: Vec<f64> = (0..SCAN_GRID).map(|k| music(basis, k as f64 * h).0).collect();
    let top = vals.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut minima: Vec<(f64, usize)> = (0..SCAN_GRID)
        .filter(|&k| {
            let prev = vals[(k + SCAN_GRID - 1) % SCAN_GRID];
            let next = vals[(k + 1) % SCAN_GRID];
            vals[k] <= prev && vals[k] < next
        })
        .map(|k| (vals[k], k))
        .collect();
    minima.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut roots = Vec::new();
    for &(_, k) in minima.iter().take(max_roots) {
        let theta = refine_root(basis, (k as f64 - 1.0) * h, (k as f64 + 1.0) * h);
        let value = music(basis, theta).0;
        if value <= 1e-4 * top {
            roots.push(theta.rem_euclid(TAU));
        }
    }
    roots
}

fn refine_root(basis: &[Vec<Complex64>], mut lo: f64, mut hi: f64) -> f64 {
    let dlo = music(basis, lo).1;
    let dhi = music(basis, hi).1;
    let mut theta = if dlo < 0.0 && dhi > 0.0 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if music(basis, mid).1 < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..4 {
        let (_, dg, curv) = music(basis, theta);
        if curv <= 0.0 {
            break;
        }
        let next = theta - dg / curv;
        if (next - theta).abs() > 0.5 * (hi - lo).max(1e-9) + 1e-9 {
            break;
        }
        theta = next;
    }
    theta
}

struct Fit {
    lambdas: Vec<Complex64>,
    weights: Vec<f64>,
    residual: f64,
}

fn fit_weights(n: usize, lambdas: Vec<Complex64>, target: &[Complex64]) -> Result<Fit> {
    let (m, y) = moment_system(n, &lambdas, target);
    let sol = nnls(&m, &y)?;
    Ok(Fit { lambdas, weights: sol.x, residual: sol.residual_norm })
}

/// Joint Gauss-Newton on angles and weights; kept only if it helps.
fn polish(n: usize, fit: Fit, target: &[Complex64]) -> Fit {
    let mut best = fit;
    for _ in 0..20 {
        let m = best.lambdas.len();
        if m == 0 {
            break;
        }
        let (a, y) = moment_system(n, &best.lambdas, target);
        let r: Vec<f64> = a.mul_vec(&best.weights).iter().zip(&y).map(|(p, q)| q - p).collect();
        // Columns: d/d weight_j, then d/d theta_j = weight_j * i l lambda_j^l.
        let w = |l: usize| if l == 0 { (n as f64).sqrt() } else { (2.0 * (n - l) as f64).sqrt() };
        let jac = RMatrix::from_fn(2 * n, 2 * m, |row, col| {
            let l = row / 2;
            let j = col % m;
            let base = best.lambdas[j].powi(l as i32) * w(l);
            let z = if col < m { base } else { base * Complex64::new(0.0, l as f64) * best.weights[j] };
            if row % 2 == 0 {
                z.re
            } else {
                z.im
            }
        });
        let step = lstsq(&jac, &r);
        let lambdas: Vec<Complex64> =
            (0..m).map(|j| best.lambdas[j] * Complex64::from_polar(1.0, step[m + j])).collect();
        let weights: Vec<f64> = (0..m).map(|j| (best.weights[j] + step[j]).max(0.0)).collect();
        let (a2, y2) = moment_system(n, &lambdas, target);
        let res = a2.mul_vec(&weights).iter().zip(&y2).map(|(p, q)| (q - p).powi(2)).sum::<f64>().sqrt();
        if res < best.residual {
            let improved = res < 0.5 * best.residual;
            best = Fit { lambdas, weights, residual: res };
            if !improved {
                break;
            }
        } else {
            break;
        }
    }
    best
}

/// Decomposes the singular part `T - d I` from its kernel. `basis_cols`
/// selects how many kernel vectors enter the root scan.
fn singular_atoms(n: usize, kernel: &[Vec<Complex64>], use_all: bool, target: &[Complex64]) -> Result<Fit> {
    let basis: Vec<Vec<Complex64>> = if use_all { kernel.to_vec() } else { kernel[..1].to_vec() };
    let roots = circle_roots(&basis, n.saturating_sub(1).max(1) * if use_all { 2 } else { 1 });
    let lambdas: Vec<Complex64> = roots.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
    let fit = fit_weights(n, lambdas, target)?;
    let fit = polish(n, fit, target);
    // Discard atoms NNLS switched off.
    let keep: Vec<usize> = (0..fit.weights.len()).filter(|&j| fit.weights[j] > 0.0).collect();
    Ok(Fit {
        lambdas: keep.iter().map(|&j| fit.lambdas[j]).collect(),
        weights: keep.iter().map(|&j| fit.weights[j]).collect(),
        residual: fit.residual,
    })
}

/// Carathéodory-Fejér decomposition of a PSD scalar Toeplitz matrix.
///
/// The smallest eigenvalue `d` is split off as `d` times the identity
/// decomposition; the remaining singular matrix is decomposed from the
/// unit-circle zeros of its kernel.
pub fn caratheodory_scalar(t: &BlockToeplitz, tol: f64) -> Result<AtomicDecomposition> {
    if t.p() != 1 {
        return Err(Error::DimensionMismatch(format!("scalar decomposition needs p = 1, got {}", t.p())));
    }
    let cert = check_toeplitz_psd(t, DEFAULT_TOL)?;
    if cert.verdict == Verdict::NotPositive {
        return Err(Error::NotPositive { margin: cert.margin });
    }
    let n = t.n();
    let scale = t.max_abs().max(1.0);
    let eig = herm_eig(&t.assemble())?;
    let d = eig.min().max(0.0);
    let shifted: Vec<Complex64> =
        (0..n).map(|l| t.coeff(l as isize)[(0, 0)] - if l == 0 { Complex64::new(d, 0.0) } else { Complex64::new(0.0, 0.0) }).collect();
    let shifted_size = shifted.iter().map(|z| z.norm()).fold(0.0, f64::max);

    let mut atoms: Vec<Atom> = Vec::new();
    if shifted_size > tol * scale {
        let thr = d + DEFAULT_RANK_TOL * scale;
        let kernel: Vec<Vec<Complex64>> = (0..n).filter(|&k| eig.values[k] <= thr).map(|k| eig.vector(k)).collect();
        let mut fit = singular_atoms(n, &kernel, false, &shifted)?;
        if fit.residual > tol * scale && kernel.len() > 1 {
            let alt = singular_atoms(n, &kernel, true, &shifted)?;
            if alt.residual < fit.residual {
                fit = alt;
            }
        }
        atoms.extend(fit.lambdas.iter().zip(&fit.weights).map(|(&lambda, &w)| Atom { lambda, b: CMatrix::from_real(1, 1, &[w]) }));
    }
    if d > 0.0 {
        atoms.extend(decompose_identity(n).atoms.into_iter().map(|a| Atom { lambda: a.lambda, b: a.b.scale_real(d) }));
    }
    let mut atoms = merge_atoms(atoms);
    atoms.retain(|a| a.b[(0, 0)].re > 1e-12 * scale);
    atoms.sort_by(|a, b| a.lambda.arg().rem_euclid(TAU).total_cmp(&b.lambda.arg().rem_euclid(TAU)));
    let mut dec = AtomicDecomposition { n, p: 1, atoms, residual: 0.0 };
    dec.residual = dec.residual_against(t);
    if dec.residual > tol * scale {
        // Last resort: refit all weights (and angles) against the full target.
        let full: Vec<Complex64> = (0..n).map(|l| t.coeff(l as isize)[(0, 0)]).collect();
        let fit = polish(n, fit_weights(n, dec.atoms.iter().map(|a| a.lambda).collect(), &full)?, &full);
        let candidate = AtomicDecomposition {
            n,
            p: 1,
            atoms: fit
                .lambdas
                .iter()
                .zip(&fit.weights)
                .filter(|(_, &w)| w > 1e-12 * scale)
                .map(|(&lambda, &w)| Atom { lambda, b: CMatrix::from_real(1, 1, &[w]) })
                .collect(),
            residual: 0.0,
        };
        let r = candidate.residual_against(t);
        if r < dec.residual {
            dec = AtomicDecomposition { residual: r, ..candidate };
        }
    }
    if dec.residual > tol * scale {
        return Err(Error::DecompositionFailed { residual: dec.residual });
    }
    Ok(dec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toeplitz::universal_toeplitz;

    fn unit(t: f64) -> Complex64 {
        Complex64::from_polar(1.0, t)
    }

    #[test]
    fn identity_decompositions() {
        let d = decompose_identity(1);
        assert_eq!(d.atoms.len(), 1);
        assert!((d.atoms[0].lambda - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let d = decompose_identity(4);
        let expect = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, -1.0)];
        for (a, e) in d.atoms.iter().zip(expect) {
            assert!((a.lambda - e).norm() < 1e-15);
            assert!((a.b[(0, 0)].re - 0.25).abs() < 1e-15);
        }
        for n in 1..=12 {
            assert!(decompose_identity(n).residual <= 1e-13);
        }
    }

    #[test]
    fn pure_input_gives_single_atom() {
        let lam = unit(2.1);
        let dec = caratheodory_scalar(&universal_toeplitz(5, lam).unwrap(), 1e-9).unwrap();
        assert_eq!(dec.atoms.len(), 1);
        assert!((dec.atoms[0].lambda - lam).norm() < 1e-10);
        assert!((dec.atoms[0].b[(0, 0)].re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identity_input() {
        let dec = caratheodory_scalar(&BlockToeplitz::order_unit(2, 1), 1e-9).unwrap();
        assert_eq!(dec.atoms.len(), 2);
        assert!((dec.atoms[0].lambda - unit(0.0)).norm() < 1e-12);
        assert!((dec.atoms[1].lambda - unit(std::f64::consts::PI)).norm() < 1e-12);
        assert!(dec.atoms.iter().all(|a| (a.b[(0, 0)].re - 0.5).abs() < 1e-12));
    }

    #[test]
    fn three_atoms_recovered() {
        let truth = [(0.4, 1.3), (2.0, 0.7), (4.5, 2.2)];
        let mut t = BlockToeplitz::zeros(5, 1);
        for &(th, a) in &truth {
            t.axpy(a, &universal_toeplitz(5, unit(th)).unwrap());
        }
        let dec = caratheodory_scalar(&t, 1e-9).unwrap();
        assert_eq!(dec.atoms.len(), 3);
        for (a, &(th, w)) in dec.atoms.iter().zip(&truth) {
            assert!((a.lambda.arg().rem_euclid(TAU) - th).abs() < 1e-8);
            assert!((a.b[(0, 0)].re - w).abs() < 1e-8);
        }
    }

    #[test]
    fn full_rank_input() {
        let mut t = BlockToeplitz::order_unit(6, 1).scale(0.3);
        for &(th, a) in &[(1.0, 1.0), (3.0, 0.5)] {
            t.axpy(a, &universal_toeplitz(6, unit(th)).unwrap());
        }
        let dec = caratheodory_scalar(&t, 1e-9).unwrap();
        assert!(dec.residual <= 1e-9);
        assert!(dec.atoms.len() <= 12);
        dec.check_atoms(1e-10).unwrap();
    }

    #[test]
    fn indefinite_input_rejected() {
        let t = BlockToeplitz::new(2, 1, vec![CMatrix::from_real(1, 1, &[2.0]), CMatrix::identity(1), CMatrix::from_real(1, 1, &[2.0])]).unwrap();
        assert!(matches!(caratheodory_scalar(&t, 1e-9), Err(Error::NotPositive { .. })));
    }
}
