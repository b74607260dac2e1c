//! Entanglement witnesses for positive trigonometric polynomials and a
//! one-sided search for separable forms `F = sum_j f_j b_j`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{herm_eig, herm_eigvals, psd_lsq, AtomOperator, CMatrix, PsdLsqOptions, ONE, ZERO};
use crate::positivity::{check_trigpoly_psd, default_grid, Verdict, DEFAULT_TOL};
use crate::toeplitz::TrigMatrixPoly;

/// Ranges closer than this principal angle count as equal.
pub const RANGE_ANGLE_TOL: f64 = 1e-6;
pub const DEFAULT_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntanglementVerdict {
    Entangled,
    SeparableFound,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableTerm {
    /// Scalar nonnegative polynomial.
    pub f: TrigMatrixPoly,
    pub b: CMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evidence {
    /// Every sample has rank at most one, and two samples have different ranges.
    RankOneRanges {
        samples: usize,
        max_rank: usize,
        z1: Complex64,
        z2: Complex64,
        v1: Vec<Complex64>,
        v2: Vec<Complex64>,
        principal_angle: f64,
    },
    Decomposition {
        terms: Vec<SeparableTerm>,
        grid: usize,
        relative_residual: f64,
    },
    /// The witness found no varying rank-one ranges.
    RankScan {
        samples: usize,
        max_rank: usize,
        rank_one_samples: usize,
    },
    /// The search ran out of budget or stalled.
    SearchBudget {
        grid: usize,
        dictionary_size: usize,
        rounds: usize,
        relative_residual: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementCertificate {
    pub verdict: EntanglementVerdict,
    pub evidence: Evidence,
}

/// `F(z) = w^* T_n(z^{-1}) w`, coefficients `c_l = w^* r_{-l} w`.
pub fn dual_pure_element(w: &CMatrix) -> Result<TrigMatrixPoly> {
    if w.max_abs() == 0.0 {
        return Err(Error::ZeroInput);
    }
    let (n, p) = (w.rows(), w.cols());
    TrigMatrixPoly::from_fn(n, p, |l| {
        // (w^* r_m w)_{ab} = sum_{k - j = m} conj(w_ka) w_jb with m = -l.
        CMatrix::from_fn(p, p, |a, b| {
            let mut s = ZERO;
            for j in 0..n as isize {
                let k = j - l;
                if (0..n as isize).contains(&k) {
                    s += w[(k as usize, a)].conj() * w[(j as usize, b)];
                }
            }
            s
        })
    })
}

/// The universal matrix as a polynomial over `M_n`: `F(z) = T_n(z)`.
pub fn universal_trigpoly(n: usize) -> TrigMatrixPoly {
    TrigMatrixPoly::from_fn(n, n, |l| CMatrix::from_fn(n, n, |k, j| if k as isize - j as isize == l { ONE } else { ZERO }))
        .expect("valid shape")
}

fn require_positive(f: &TrigMatrixPoly) -> Result<()> {
    if f.max_abs() == 0.0 {
        return Err(Error::ZeroInput);
    }
    let cert = check_trigpoly_psd(f, default_grid(f.n(), f.p()), DEFAULT_TOL)?;
    if cert.verdict == Verdict::NotPositive {
        return Err(Error::NotPositive { margin: cert.margin });
    }
    Ok(())
}

fn sample_angle(k: usize, samples: usize) -> f64 {
    // Offset keeps samples away from the roots of unity.
    TAU * (k as f64 + 0.5 / std::f64::consts::SQRT_2) / samples as f64
}

struct RankScan {
    max_rank: usize,
    /// Rank-one samples: angle and top eigenvector.
    rank_one: Vec<(f64, Vec<Complex64>)>,
}

fn scan_ranks(f: &TrigMatrixPoly, samples: usize) -> Result<RankScan> {
    let evals: Vec<(f64, crate::matcore::HermEig)> =
        (0..samples).map(|k| sample_angle(k, samples)).map(|t| herm_eig(&f.eval_angle(t).hermitian_part()).map(|e| (t, e))).collect::<Result<_>>()?;
    let scale = evals.iter().map(|(_, e)| e.max()).fold(0.0, f64::max);
    let thr = crate::matcore::DEFAULT_RANK_TOL * scale.max(f.max_abs());
    let mut max_rank = 0;
    let mut rank_one = Vec::new();
    for (t, e) in evals {
        let rank = e.values.iter().filter(|&&v| v > thr).count();
        max_rank = max_rank.max(rank);
        if rank == 1 {
            rank_one.push((t, e.vector(f.p() - 1)));
        }
    }
    Ok(RankScan { max_rank, rank_one })
}

/// Principal angle between the lines spanned by unit vectors.
pub fn principal_angle(a: &[Complex64], b: &[Complex64]) -> f64 {
    let dot: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let c = (dot.norm() / (na * nb)).min(1.0);
    // acos loses precision near 1; use the sine of the angle there.
    let s = (1.0 - c * c).max(0.0).sqrt();
    s.atan2(c)
}

/// Witness of entanglement: if `F` has rank at most one everywhere and its
/// rank-one ranges move, no decomposition `sum f_j b_j` with PSD `b_j` exists.
pub fn rank_one_range_witness(f: &TrigMatrixPoly, samples: usize) -> Result<EntanglementCertificate> {
    require_positive(f)?;
    let samples = samples.max(2);
    let scan = scan_ranks(f, samples)?;
    if scan.max_rank == 1 && scan.rank_one.len() >= 2 {
        let (t1, v1) = &scan.rank_one[0];
        let (idx, angle) = scan
            .rank_one
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, (_, v))| (i, principal_angle(v1, v)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("at least two samples");
        if angle >= RANGE_ANGLE_TOL {
            let (t2, v2) = &scan.rank_one[idx];
            return Ok(EntanglementCertificate {
                verdict: EntanglementVerdict::Entangled,
                evidence: Evidence::RankOneRanges {
                    samples,
                    max_rank: 1,
                    z1: Complex64::from_polar(1.0, *t1),
                    z2: Complex64::from_polar(1.0, *t2),
                    v1: v1.clone(),
                    v2: v2.clone(),
                    principal_angle: angle,
                },
            });
        }
    }
    Ok(EntanglementCertificate {
        verdict: EntanglementVerdict::Undecided,
        evidence: Evidence::RankScan { samples, max_rank: scan.max_rank, rank_one_samples: scan.rank_one.len() },
    })
}

/// Re-checks the rank-one evidence against `F`.
pub fn verify_rank_one_evidence(f: &TrigMatrixPoly, cert: &EntanglementCertificate) -> bool {
    let Evidence::RankOneRanges { z1, z2, v1, v2, principal_angle: _, .. } = &cert.evidence else {
        return false;
    };
    let check = |z: &Complex64, v: &[Complex64]| -> bool {
        let Ok(m) = f.eval(*z) else { return false };
        let Ok(ev) = herm_eigvals(&m.hermitian_part()) else { return false };
        let top = ev[ev.len() - 1];
        let rank = ev.iter().filter(|&&x| x > crate::matcore::DEFAULT_RANK_TOL * top.max(1.0)).count();
        // v must be the range: F v = top v.
        let fv = m.mul_vec(v);
        let defect = fv.iter().zip(v).map(|(a, b)| (a - b * top).norm_sqr()).sum::<f64>().sqrt();
        rank == 1 && defect <= 1e-8 * top.max(1.0)
    };
    check(z1, v1) && check(z2, v2) && principal_angle(v1, v2) >= RANGE_ANGLE_TOL
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Relative residual on the grid that counts as a decomposition.
    pub tol: f64,
    /// Angles per root in the dictionary of `|g|^2` factors.
    pub root_angles: usize,
    pub max_rounds: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { tol: 1e-6, root_angles: 32, max_rounds: 40 }
    }
}

/// Ascending coefficients (`l = -n+1 ..= n-1`) of `|g|^2` on the circle,
/// `g(z) = prod (z - zeta_i)`, normalized to constant term one.
fn abs_square_coeffs(n: usize, roots: &[Complex64]) -> Vec<Complex64> {
    let mut g = vec![ONE];
    for &r in roots {
        let mut next = vec![ZERO; g.len() + 1];
        for (i, &c) in g.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * r;
        }
        g = next;
    }
    // |g(z)|^2 = sum_l z^l sum_k g_{k+l} conj(g_k).
    let d = g.len() as isize - 1;
    let mut out = vec![ZERO; 2 * n - 1];
    for l in -d..=d {
        let mut s = ZERO;
        for k in 0..=d {
            let j = k + l;
            if (0..=d).contains(&j) {
                s += g[j as usize] * g[k as usize].conj();
            }
        }
        out[(l + n as isize - 1) as usize] = s;
    }
    let c0 = out[n - 1].re;
    out.iter().map(|c| c / c0).collect()
}

fn dictionary(n: usize, angles: usize) -> Vec<Vec<Complex64>> {
    let degree = (n - 1).min(2);
    let mut roots: Vec<Complex64> = Vec::new();
    for r in [1.0, 0.7, 0.4] {
        for k in 0..angles {
            roots.push(Complex64::from_polar(r, TAU * k as f64 / angles as f64));
        }
    }
    let mut out = vec![abs_square_coeffs(n, &[])];
    if degree >= 1 {
        for &r in &roots {
            out.push(abs_square_coeffs(n, &[r]));
        }
    }
    if degree >= 2 {
        for i in 0..roots.len() {
            for j in i..roots.len() {
                out.push(abs_square_coeffs(n, &[roots[i], roots[j]]));
            }
        }
    }
    out
}

fn coeff_norm(c: &[CMatrix]) -> f64 {
    c.iter().map(|m| m.frobenius_norm().powi(2)).sum::<f64>().sqrt()
}

/// Greedy search for `F = sum_j f_j b_j` with `f_j = |g_j|^2` from a fixed
/// dictionary and PSD `b_j`. Coefficient residuals equal grid RMS residuals
/// by Parseval, so the blocks are fitted on coefficients and the final
/// residual is re-measured on the `grid` samples.
pub fn separability_search_dual(f: &TrigMatrixPoly, grid: usize, opts: &SearchOptions) -> Result<EntanglementCertificate> {
    require_positive(f)?;
    let (n, p) = (f.n(), f.p());
    let target: Vec<CMatrix> = f.coeffs().to_vec();
    let norm = coeff_norm(&target);
    let dict = dictionary(n, opts.root_angles);
    let dict_norms: Vec<f64> = dict.iter().map(|d| d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
    let weights = vec![1.0; 2 * n - 1];
    let inner = PsdLsqOptions { accept_unconverged: true, max_iter: 4000, stationarity_tol: 0.1 * opts.tol, ..Default::default() };
    // Rounds without a 0.1% drop in the residual before the search gives up.
    const PATIENCE: usize = 5;
    let mut trail: Vec<f64> = Vec::new();

    let mut chosen: Vec<usize> = Vec::new();
    let mut blocks: Vec<CMatrix> = Vec::new();
    let mut residual = norm;
    let mut rounds = 0;
    while rounds < opts.max_rounds && residual > opts.tol * norm {
        rounds += 1;
        let fitted = if chosen.is_empty() {
            vec![CMatrix::zeros(p, p); 2 * n - 1]
        } else {
            AtomOperator::new(chosen.iter().map(|&i| dict[i].clone()).collect(), weights.clone()).apply(&blocks)
        };
        let rho: Vec<CMatrix> = target.iter().zip(&fitted).map(|(t, x)| t - x).collect();
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (i, d) in dict.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let mut g = CMatrix::zeros(p, p);
            for (c, r) in d.iter().zip(&rho) {
                g.axpy(c.conj(), r);
            }
            let s = herm_eigvals(&g.hermitian_part())?[p - 1] / dict_norms[i];
            if s > best.0 {
                best = (s, i);
            }
        }
        if best.0 <= 1e-14 * norm || best.1 == usize::MAX {
            break;
        }
        chosen.push(best.1);
        blocks.push(CMatrix::zeros(p, p));
        let op = AtomOperator::new(chosen.iter().map(|&i| dict[i].clone()).collect(), weights.clone());
        let sol = psd_lsq(&op, &target, Some(&blocks), &inner)?;
        blocks = sol.blocks;
        residual = sol.residual;
        trail.push(residual);
        if trail.len() > PATIENCE && trail[trail.len() - 1 - PATIENCE] - residual < 1e-3 * residual {
            break;
        }
    }

    let terms: Vec<SeparableTerm> = chosen
        .iter()
        .zip(&blocks)
        .filter(|(_, b)| b.frobenius_norm() > 1e-12 * norm.max(1.0))
        .map(|(&i, b)| SeparableTerm { f: TrigMatrixPoly::scalar(&dict[i]).expect("valid length"), b: b.clone() })
        .collect();
    let relative_residual = grid_residual(f, &terms, grid.max(2 * n)) / grid_rms(f, grid.max(2 * n)).max(f64::MIN_POSITIVE);
    if relative_residual <= opts.tol {
        Ok(EntanglementCertificate {
            verdict: EntanglementVerdict::SeparableFound,
            evidence: Evidence::Decomposition { terms, grid, relative_residual },
        })
    } else {
        Ok(EntanglementCertificate {
            verdict: EntanglementVerdict::Undecided,
            evidence: Evidence::SearchBudget { grid, dictionary_size: dict.len(), rounds, relative_residual },
        })
    }
}

/// RMS over a `k`-point grid of `||F - sum f_j b_j||_F`.
pub fn grid_residual(f: &TrigMatrixPoly, terms: &[SeparableTerm], k: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..k {
        let t = TAU * i as f64 / k as f64;
        let mut m = f.eval_angle(t);
        for term in terms {
            let s = term.f.eval_angle(t)[(0, 0)];
            m.axpy(-s, &term.b);
        }
        acc += m.frobenius_norm().powi(2);
    }
    (acc / k as f64).sqrt()
}

fn grid_rms(f: &TrigMatrixPoly, k: usize) -> f64 {
    grid_residual(f, &[], k)
}
