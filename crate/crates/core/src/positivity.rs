//! Positivity certificates for block-Toeplitz matrices (PSD assembled
//! matrix) and matrix-valued trigonometric polynomials (PSD on the circle).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{herm_eig, herm_eigvals, CMatrix};
use crate::toeplitz::{spectral_norm_bound, BlockToeplitz, TrigMatrixPoly, HERMITIAN_TOL};

pub const DEFAULT_TOL: f64 = 1e-9;
/// Largest grid the trig-poly certifier escalates to.
pub const MAX_GRID: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    StrictlyPositive,
    Positive,
    NotPositive,
}

impl Verdict {
    pub fn is_positive(self) -> bool {
        !matches!(self, Verdict::NotPositive)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    /// Unit eigenvector of the assembled matrix for its smallest eigenvalue.
    Eigenvector { vector: Vec<Complex64> },
    /// Unit eigenvector of `F(e^{i theta})` for its smallest eigenvalue.
    SampledEigenvector { theta: f64, vector: Vec<Complex64> },
    /// Grid parameters behind a certified lower bound on `min_theta lambda_min`.
    Sampling {
        grid: usize,
        /// First-order constant `2 (n-1) sum_l ||c_l||_2`.
        lipschitz: f64,
        /// Second-order constant `sum_l l^2 ||c_l||_2`.
        curvature: f64,
        /// Each sample covers `theta_k +- half_spacing`.
        half_spacing: f64,
        lower_bound: f64,
        argmin_theta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityCertificate {
    pub verdict: Verdict,
    /// Smallest eigenvalue found.
    pub margin: f64,
    pub tol: f64,
    /// Tolerances are applied as `tol * scale`.
    pub scale: f64,
    pub witness: Witness,
}

/// Smallest eigenvalue, with closed forms for sizes one and two.
pub(crate) fn lambda_min(a: &CMatrix) -> Result<f64> {
    match a.rows() {
        1 => Ok(a[(0, 0)].re),
        2 => {
            let (x, y) = (a[(0, 0)].re, a[(1, 1)].re);
            let b = (a[(0, 1)] + a[(1, 0)].conj()) * 0.5;
            let mid = 0.5 * (x + y);
            let half = 0.5 * (x - y);
            Ok(mid - (half * half + b.norm_sqr()).sqrt())
        }
        _ => Ok(herm_eigvals(a)?[0]),
    }
}

pub fn check_toeplitz_psd(t: &BlockToeplitz, tol: f64) -> Result<PositivityCertificate> {
    if !t.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::NotHermitian { defect: t.hermitian_defect() });
    }
    let a = t.assemble();
    let scale = a.max_abs().max(1.0);
    let eig = herm_eig(&a)?;
    let margin = eig.min();
    let verdict = if margin >= tol * scale {
        Verdict::StrictlyPositive
    } else if margin >= -tol * scale {
        Verdict::Positive
    } else {
        Verdict::NotPositive
    };
    Ok(PositivityCertificate { verdict, margin, tol, scale, witness: Witness::Eigenvector { vector: eig.vector(0) } })
}

/// Result of a single grid pass.
#[derive(Debug, Clone, PartialEq)]
pub enum GridOutcome {
    Decided(PositivityCertificate),
    Inconclusive { grid: usize, min_sample: f64, lower_bound: f64, suggested_grid: usize },
}

pub fn default_grid(n: usize, p: usize) -> usize {
    256.max(8 * n * p)
}

struct Bounds {
    scale: f64,
    lipschitz: f64,
    curvature: f64,
}

fn bounds(f: &TrigMatrixPoly) -> Bounds {
    let n = f.n() as isize;
    let lipschitz = 2.0 * (n - 1) as f64 * f.coeff_norm_sum();
    let curvature = (-n + 1..n).map(|l| (l * l) as f64 * spectral_norm_bound(f.coeff(l))).sum();
    Bounds { scale: f.max_abs().max(1.0), lipschitz, curvature }
}

/// One pass on the uniform `k`-point grid.
///
/// Each sample `theta_k` covers `theta_k +- pi/k`. A point is bounded below
/// by `lambda_k - L pi/k`, or by the smaller of `lambda_min(F_k +- d F'_k)`
/// minus `d^2 M / 2` (concavity of `lambda_min` along the tangent pencil
/// plus the Taylor remainder). The certificate uses the better of the two.
pub fn check_trigpoly_psd_at(f: &TrigMatrixPoly, k: usize, tol: f64) -> Result<GridOutcome> {
    if !f.is_hermitian_valued(HERMITIAN_TOL) {
        return Err(Error::NotHermitianValued { defect: f.hermitian_defect() });
    }
    let k = k.max(8 * f.n() * f.p()).max(1);
    let b = bounds(f);
    let thr = tol * b.scale;
    let h = 2.0 * PI / k as f64;
    let delta = 0.5 * h;

    let first_order = b.lipschitz * delta;
    let second_order = 0.5 * delta * delta * b.curvature;
    // Per sample: the eigenvalue, and the better of the Lipschitz and
    // tangent-pencil bounds with the slack it consumed. The pencil is only
    // evaluated where the Lipschitz bound is not enough.
    let points: Vec<(f64, (f64, f64))> = (0..k)
        .into_par_iter()
        .with_min_len(1024)
        .map(|i| -> Result<(f64, (f64, f64))> {
            let (fk, dk) = f.eval_with_derivative(i as f64 * h);
            let s = lambda_min(&fk)?;
            let lip = s - first_order;
            if lip >= thr || s < -thr {
                return Ok((s, (lip, first_order)));
            }
            let dk = dk.scale_real(delta);
            let plus = lambda_min(&(&fk + &dk))?;
            let minus = lambda_min(&(&fk - &dk))?;
            let taylor = s.min(plus).min(minus) - second_order;
            Ok((s, if taylor > lip { (taylor, s - taylor) } else { (lip, first_order) }))
        })
        .collect::<Result<_>>()?;
    let (arg, min_sample) = points
        .iter()
        .map(|p| p.0)
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("grid is nonempty");

    if min_sample < -thr {
        let theta = arg as f64 * h;
        let eig = herm_eig(&f.eval_angle(theta).hermitian_part())?;
        return Ok(GridOutcome::Decided(PositivityCertificate {
            verdict: Verdict::NotPositive,
            margin: eig.min(),
            tol,
            scale: b.scale,
            witness: Witness::SampledEigenvector { theta, vector: eig.vector(0) },
        }));
    }

    let point_bounds: Vec<(f64, f64)> = points.iter().map(|p| p.1).collect();
    let samples: Vec<f64> = points.iter().map(|p| p.0).collect();
    let (worst, &(lower_bound, slack)) = point_bounds
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)))
        .expect("grid is nonempty");

    let verdict = if lower_bound >= thr {
        Some(Verdict::StrictlyPositive)
    } else if lower_bound >= -thr {
        Some(Verdict::Positive)
    } else {
        None
    };
    match verdict {
        Some(verdict) => Ok(GridOutcome::Decided(PositivityCertificate {
            verdict,
            margin: min_sample,
            tol,
            scale: b.scale,
            witness: Witness::Sampling {
                grid: k,
                lipschitz: b.lipschitz,
                curvature: b.curvature,
                half_spacing: delta,
                lower_bound,
                argmin_theta: arg as f64 * h,
            },
        })),
        None => {
            // The error term shrinks at least linearly in the spacing and
            // quadratically once the tangent bound takes over.
            let available = (samples[worst] + thr).max(thr * 1e-3);
            let ratio = slack / available;
            let factor = if slack < first_order { ratio.sqrt() } else { ratio };
            let want = (k as f64 * factor * 1.25).min(MAX_GRID as f64 * 2.0) as usize;
            let suggested_grid = want.max(2 * k).next_power_of_two();
            Ok(GridOutcome::Inconclusive { grid: k, min_sample, lower_bound, suggested_grid })
        }
    }
}

/// Certifies `F >= 0` on the circle, escalating the grid from `k` until the
/// cap `MAX_GRID`.
pub fn check_trigpoly_psd(f: &TrigMatrixPoly, k: usize, tol: f64) -> Result<PositivityCertificate> {
    let mut k = k.max(8 * f.n() * f.p());
    loop {
        match check_trigpoly_psd_at(f, k, tol)? {
            GridOutcome::Decided(cert) => return Ok(cert),
            GridOutcome::Inconclusive { grid, suggested_grid, lower_bound, .. } => {
                log::debug!("grid {grid} inconclusive (lower bound {lower_bound:.3e})");
                if grid >= MAX_GRID {
                    return Err(Error::GridExhausted { grid });
                }
                k = suggested_grid.min(MAX_GRID);
            }
        }
    }
}
