//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

use std::f64::consts::TAU;
use std::time::Instant;

use rand::Rng;
use tsep_core::cp_duality::{is_cp_dual_map, is_cp_toeplitz_map, toeplitz_cp_probe, MatrixMap};
use tsep_core::entanglement::{
    rank_one_range_witness, separability_search_dual, universal_trigpoly, verify_rank_one_evidence, EntanglementVerdict, SearchOptions,
};
use tsep_core::generate::{gen_atoms, gen_density, gen_pure, gen_toeplitz_product, random_hermitian_toeplitz, random_hermitian_trigpoly, random_unit, rng_from_seed};
use tsep_core::matcore::herm_eigvals;
use tsep_core::positivity::{check_trigpoly_psd, default_grid, DEFAULT_TOL};
use tsep_core::separability::{caratheodory_scalar, decompose_block, decompose_toeplitz_toeplitz, purity_check, GreedyOptions, Grid2dOptions, Purity};
use tsep_core::toeplitz::{duality_pair, hat_of_toeplitz, hat_of_trigpoly, universal_toeplitz};
use tsep_core::{naimark_from_atoms, verify_factorization, AtomicDecomposition, BlockToeplitz, CMatrix, Complex64, Error, TrigMatrixPoly};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Decompositions collected by criteria 1 and 2 for the round trip.
type Pool = Vec<(BlockToeplitz, AtomicDecomposition)>;

fn criterion_1(pool: &mut Pool) -> Outcome {
    let shapes = [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (3, 3), (4, 1), (4, 2), (4, 3)];
    let opts = GreedyOptions { tol: 1e-6, max_atoms: 60, max_rounds: 200, ..Default::default() };
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let mut most_atoms = 0;
    for i in 0..50 {
        let (n, p) = shapes[i % shapes.len()];
        let t = gen_density(n, p, &mut rng_from_seed(1000 + i as u64));
        let norm = t.frobenius_norm();
        match decompose_block(&t, &opts) {
            Ok(dec) => {
                let recheck = dec.residual_against(&t);
                let atoms_ok = dec.check_atoms(1e-9).is_ok();
                worst = worst.max(recheck / norm);
                most_atoms = most_atoms.max(dec.atoms.len());
                if recheck > 1e-6 * norm || dec.atoms.len() > 60 || !atoms_ok || (recheck - dec.residual).abs() > 1e-12 * norm.max(1.0) {
                    failures.push(format!("#{i} (n={n},p={p}) rel {:.2e}", recheck / norm));
                }
                pool.push((t, dec));
            }
            Err(e) => failures.push(format!("#{i} (n={n},p={p}) {e}")),
        }
    }
    outcome(
        failures.is_empty(),
        format!("worst relative residual {worst:.2e}, max atoms {most_atoms}; failures: {}", list(&failures)),
    )
}

/// Angles with pairwise circular gap at least `gap`.
fn spaced_angles<R: Rng>(m: usize, gap: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let mut a: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..TAU)).collect();
        a.sort_by(f64::total_cmp);
        let ok = (0..m).all(|i| {
            let next = if i + 1 < m { a[i + 1] } else { a[0] + TAU };
            m == 1 || next - a[i] >= gap
        });
        if ok {
            return a;
        }
    }
}

fn scalar_instance(n: usize, angles: &[f64], weights: &[f64], shift: f64) -> BlockToeplitz {
    let mut t = BlockToeplitz::order_unit(n, 1).scale(shift);
    for (&a, &w) in angles.iter().zip(weights) {
        t.axpy(w, &universal_toeplitz(n, Complex64::from_polar(1.0, a)).unwrap());
    }
    t
}

fn circ(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn criterion_2(pool: &mut Pool) -> Outcome {
    let mut rng = rng_from_seed(2002);
    let mut failures = Vec::new();
    let (mut worst_angle, mut worst_weight, mut worst_full) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..100 {
        let n = rng.random_range(2..=8);
        let m = rng.random_range(1..n);
        let angles = spaced_angles(m, 0.1, &mut rng);
        let weights: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..2.0)).collect();
        let t = scalar_instance(n, &angles, &weights, 0.0);
        match caratheodory_scalar(&t, 1e-10) {
            Ok(dec) if dec.atoms.len() == m => {
                for (a, w) in angles.iter().zip(&weights) {
                    let found = dec.atoms.iter().min_by(|x, y| circ(x.lambda.arg(), *a).total_cmp(&circ(y.lambda.arg(), *a))).unwrap();
                    let ea = circ(found.lambda.arg(), *a);
                    let ew = (found.b[(0, 0)].re - w).abs();
                    worst_angle = worst_angle.max(ea);
                    worst_weight = worst_weight.max(ew);
                    if ea > 1e-8 || ew > 1e-8 {
                        failures.push(format!("atomic #{i} (n={n}, m={m}) angle {ea:.1e} weight {ew:.1e}"));
                        break;
                    }
                }
                pool.push((t, dec));
            }
            Ok(dec) => failures.push(format!("atomic #{i}: {} atoms instead of {m}", dec.atoms.len())),
            Err(e) => failures.push(format!("atomic #{i}: {e}")),
        }
    }
    for i in 0..100 {
        let n = rng.random_range(2..=8);
        let m = rng.random_range(1..n);
        let angles = spaced_angles(m, 0.1, &mut rng);
        let weights: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..2.0)).collect();
        let d = rng.random_range(0.05..1.0);
        let t = scalar_instance(n, &angles, &weights, d);
        match caratheodory_scalar(&t, 1e-10) {
            Ok(dec) => {
                let r = dec.residual_against(&t);
                worst_full = worst_full.max(r);
                if r > 1e-9 || dec.check_atoms(1e-12).is_err() {
                    failures.push(format!("full-rank #{i} (n={n}) residual {r:.1e}"));
                }
                pool.push((t, dec));
            }
            Err(e) => failures.push(format!("full-rank #{i}: {e}")),
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "angle error {worst_angle:.1e}, weight error {worst_weight:.1e}, full-rank residual {worst_full:.1e}; failures: {}",
            list(&failures)
        ),
    )
}

fn criterion_3(pool: &Pool) -> Outcome {
    let mut failures = Vec::new();
    let (mut worst, mut worst_coeff) = (f64::NEG_INFINITY, 0.0f64);
    for (i, (t, dec)) in pool.iter().enumerate() {
        // The residual is measured against the target; the coefficient
        // identity against the element the atoms describe.
        let result = naimark_from_atoms(dec)
            .and_then(|fac| Ok((verify_factorization(t, &fac)?, verify_factorization(&dec.reconstruct(), &fac)?)));
        match result {
            Ok((check, own)) => {
                worst = worst.max(check.residual - dec.residual);
                worst_coeff = worst_coeff.max(own.coefficient_defect);
                if check.residual > dec.residual + 1e-9 || own.coefficient_defect > 1e-9 {
                    failures.push(format!("#{i}: residual {:.2e} vs {:.2e}, coefficient defect {:.1e}", check.residual, dec.residual, own.coefficient_defect));
                }
            }
            Err(e) => failures.push(format!("#{i}: {e}")),
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} decompositions, worst excess {worst:.1e}, coefficient defect {worst_coeff:.1e}; failures: {}",
            pool.len(),
            list(&failures)
        ),
    )
}

/// Dense-sample minimum eigenvalue of `F` on `k` points.
fn sampled_min(f: &TrigMatrixPoly, k: usize) -> f64 {
    (0..k).map(|i| herm_eigvals(&f.eval_angle(TAU * i as f64 / k as f64).hermitian_part()).unwrap()[0]).fold(f64::INFINITY, f64::min)
}

fn criterion_4() -> Outcome {
    let mut rng = rng_from_seed(4004);
    let mut failures = Vec::new();
    let (mut pos_t, mut pos_f) = (0, 0);
    for i in 0..200 {
        let n = rng.random_range(1..=4);
        let p = rng.random_range(1..=4);
        let mut t = random_hermitian_toeplitz(n, p, &mut rng);
        if i % 2 == 0 {
            // Shift to either side of the cone boundary.
            let min = herm_eigvals(&t.assemble()).unwrap()[0];
            let s: f64 = rng.random_range(0.01..0.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            t.axpy(s - min, &BlockToeplitz::order_unit(n, p));
        }
        let scale = t.max_abs().max(1.0);
        let direct = herm_eigvals(&t.assemble()).unwrap()[0] >= -DEFAULT_TOL * scale;
        match is_cp_dual_map(&hat_of_toeplitz(&t), DEFAULT_TOL) {
            Ok(cert) => {
                pos_t += direct as usize;
                if cert.verdict.is_positive() != direct {
                    failures.push(format!("toeplitz #{i}"));
                }
            }
            Err(e) => failures.push(format!("toeplitz #{i}: {e}")),
        }
    }
    for i in 0..200 {
        let n = rng.random_range(1..=4);
        let p = rng.random_range(1..=4);
        let mut f = random_hermitian_trigpoly(n, p, &mut rng);
        if i % 2 == 0 {
            let min = sampled_min(&f, 4096);
            let s: f64 = rng.random_range(0.01..0.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            f.axpy(s - min, &TrigMatrixPoly::order_unit(n, p));
        }
        let scale = f.max_abs().max(1.0);
        let direct = sampled_min(&f, 1 << 14) >= -DEFAULT_TOL * scale;
        match is_cp_toeplitz_map(&hat_of_trigpoly(&f), default_grid(n, p), DEFAULT_TOL) {
            Ok(cert) => {
                pos_f += direct as usize;
                if cert.verdict.is_positive() != direct {
                    failures.push(format!("trigpoly #{i}"));
                }
            }
            Err(e) => failures.push(format!("trigpoly #{i}: {e}")),
        }
    }
    let mut worst_pair = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=4);
        let lam = random_unit(&mut rng);
        let f = random_hermitian_trigpoly(n, 1, &mut rng);
        let got = duality_pair(&universal_toeplitz(n, lam).unwrap(), &f).unwrap();
        let want = f.eval(lam.inv()).unwrap()[(0, 0)];
        worst_pair = worst_pair.max((got - want).norm());
    }
    if worst_pair > 1e-12 {
        failures.push(format!("pairing error {worst_pair:.1e}"));
    }
    outcome(
        failures.is_empty(),
        format!("{pos_t}/200 and {pos_f}/200 positive, pairing error {worst_pair:.1e}; disagreements: {}", list(&failures)),
    )
}

fn criterion_5() -> Outcome {
    let mut failures = Vec::new();
    for n in 2..=6 {
        let f = universal_trigpoly(n);
        match rank_one_range_witness(&f, 64) {
            Ok(cert) if cert.verdict == EntanglementVerdict::Entangled && verify_rank_one_evidence(&f, &cert) => {}
            Ok(cert) => failures.push(format!("n={n}: witness verdict {:?}", cert.verdict)),
            Err(e) => failures.push(format!("n={n}: {e}")),
        }
        for (angles, rounds) in [(8, 10), (16, 20), (32, 40)] {
            let opts = SearchOptions { tol: 1e-6, root_angles: angles, max_rounds: rounds };
            match separability_search_dual(&f, 256, &opts) {
                Ok(cert) if cert.verdict == EntanglementVerdict::SeparableFound => {
                    failures.push(format!("n={n}: search found a decomposition at budget ({angles}, {rounds})"))
                }
                Ok(_) => {}
                Err(e) => failures.push(format!("n={n}: {e}")),
            }
        }
    }
    outcome(failures.is_empty(), format!("n = 2..6; failures: {}", list(&failures)))
}

fn criterion_6() -> Outcome {
    let mut rng = rng_from_seed(6006);
    let mut failures = Vec::new();
    let (mut worst_lambda, mut worst_hat) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let n = rng.random_range(2..=6);
        let p = rng.random_range(1..=4);
        let (t, truth) = gen_pure(n, p, &mut rng);
        match purity_check(&t, 1e-9) {
            Ok(Purity::Pure { lambda, .. }) => {
                worst_lambda = worst_lambda.max((lambda - truth.lambda).norm());
                if (lambda - truth.lambda).norm() > 1e-9 {
                    failures.push(format!("pure #{i}: lambda error {:.1e}", (lambda - truth.lambda).norm()));
                }
            }
            Ok(other) => failures.push(format!("pure #{i}: {other:?}")),
            Err(e) => failures.push(format!("pure #{i}: {e}")),
        }
        let hat = hat_of_toeplitz(&t);
        for k in -(n as isize) + 1..n as isize {
            let want = truth.q.scale(truth.lambda.powi(k as i32) * truth.alpha);
            worst_hat = worst_hat.max((hat.value(k) - &want).max_abs());
        }
    }
    if worst_hat > 1e-10 {
        failures.push(format!("hat map error {worst_hat:.1e}"));
    }
    for i in 0..100 {
        let n = rng.random_range(2..=6);
        let p = rng.random_range(1..=4);
        let (t, _) = gen_atoms(n, p, 2, &mut rng);
        match purity_check(&t, 1e-9) {
            Ok(Purity::NotPure { .. }) => {}
            Ok(other) => failures.push(format!("two-atom #{i}: {other:?}")),
            Err(e) => failures.push(format!("two-atom #{i}: {e}")),
        }
    }
    outcome(
        failures.is_empty(),
        format!("lambda error {worst_lambda:.1e}, hat map error {worst_hat:.1e}; failures: {}", list(&failures)),
    )
}

fn criterion_7() -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    for p in [2, 3] {
        match toeplitz_cp_probe(&MatrixMap::transpose(p), 5, 200, tsep_core::DEFAULT_PROBE_SEED) {
            Ok(r) => {
                checked += r.inputs_checked;
                if !r.violations.is_empty() {
                    failures.push(format!("transpose on M_{p}: {} violations", r.violations.len()));
                }
            }
            Err(e) => failures.push(format!("transpose on M_{p}: {e}")),
        }
    }
    // psi(x) = tr(x) E11 - x / 2 is not positive.
    let psi = MatrixMap::from_linear(2, 2, |x| {
        let mut out = x.scale_real(-0.5);
        out[(0, 0)] += x.trace();
        out
    })
    .unwrap();
    let mut negative = 0;
    match toeplitz_cp_probe(&psi, 5, 200, tsep_core::DEFAULT_PROBE_SEED) {
        Ok(r) => {
            for v in &r.violations {
                let image = tsep_core::apply_map_blockwise(&psi, &v.input).unwrap().assemble();
                let w = &v.witness;
                let form: Complex64 = image.quadratic_form(w);
                let norm2: f64 = w.iter().map(|z| z.norm_sqr()).sum();
                if form.re / norm2 < -1e-9 && (form.re / norm2 - v.min_eigenvalue).abs() <= 1e-8 * image.max_abs().max(1.0) {
                    negative += 1;
                } else {
                    failures.push(format!("unverifiable witness at n={}, trial {}", v.n, v.trial));
                }
            }
            if r.violations.is_empty() {
                failures.push("non-positive map produced no violations".into());
            }
        }
        Err(e) => failures.push(format!("non-positive map: {e}")),
    }
    outcome(
        failures.is_empty(),
        format!("{checked} transpose images PSD, {negative} verified violations of the non-positive map; failures: {}", list(&failures)),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = rng_from_seed(8008);
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let opts = Grid2dOptions { tol: 1e-7, ..Default::default() };
    for i in 0..25 {
        let (x, _) = gen_toeplitz_product(5, 1e-2, &mut rng);
        match decompose_toeplitz_toeplitz(&x, &opts) {
            Ok(dec) => {
                let r = (dec.reconstruct().sub(&x)).frobenius_norm();
                worst = worst.max(r);
                if r > 1e-7 || dec.atoms.iter().any(|a| a.weight < 0.0) {
                    failures.push(format!("#{i}: residual {r:.1e}"));
                }
            }
            Err(Error::BudgetExhausted { best }) => failures.push(format!("#{i}: budget exhausted at {:.1e}", best.residual)),
            Err(e) => failures.push(format!("#{i}: {e}")),
        }
    }
    outcome(failures.is_empty(), format!("worst residual {worst:.1e}; failures: {}", list(&failures)))
}

/// Closed-form smallest eigenvalue of a Hermitian matrix of size at most 3.
fn min_eig_small(a: &CMatrix) -> f64 {
    match a.rows() {
        1 => a[(0, 0)].re,
        2 => {
            let (x, y) = (a[(0, 0)].re, a[(1, 1)].re);
            0.5 * (x + y) - (0.25 * (x - y).powi(2) + a[(0, 1)].norm_sqr()).sqrt()
        }
        _ => {
            let (a11, a22, a33) = (a[(0, 0)].re, a[(1, 1)].re, a[(2, 2)].re);
            let (b12, b13, b23) = (a[(0, 1)], a[(0, 2)], a[(1, 2)]);
            let q = (a11 + a22 + a33) / 3.0;
            let p1 = b12.norm_sqr() + b13.norm_sqr() + b23.norm_sqr();
            let p2 = (a11 - q).powi(2) + (a22 - q).powi(2) + (a33 - q).powi(2) + 2.0 * p1;
            let pp = (p2 / 6.0).sqrt();
            if pp == 0.0 {
                return q;
            }
            let (c11, c22, c33) = ((a11 - q) / pp, (a22 - q) / pp, (a33 - q) / pp);
            let (d12, d13, d23) = (b12 / pp, b13 / pp, b23 / pp);
            let det = c11 * (c22 * c33 - d23.norm_sqr()) - c22 * d13.norm_sqr() - c33 * d12.norm_sqr()
                + 2.0 * (d12 * d23 * d13.conj()).re;
            let r = (det / 2.0).clamp(-1.0, 1.0);
            let phi = r.acos() / 3.0;
            q + 2.0 * pp * (phi + 2.0 * std::f64::consts::PI / 3.0).cos()
        }
    }
}

fn criterion_9() -> Outcome {
    let mut rng = rng_from_seed(9009);
    let k = 1usize << 20;
    let mut failures = Vec::new();
    let (mut positive, mut negative, mut inconclusive) = (0, 0, 0);
    for i in 0..100 {
        let n = rng.random_range(1..=6);
        let p = rng.random_range(1..=3);
        let mut f = random_hermitian_trigpoly(n, p, &mut rng);
        if i % 4 != 0 {
            // Place the minimum at a random signed distance from zero.
            let min = sampled_min(&f, 8192);
            let mag = 10f64.powf(rng.random_range(-4.0..-0.5));
            let s = if rng.random_bool(0.5) { mag } else { -mag };
            f.axpy(s - min, &TrigMatrixPoly::order_unit(n, p));
        }
        let brute = (0..k).map(|j| min_eig_small(&f.eval_angle(TAU * j as f64 / k as f64))).fold(f64::INFINITY, f64::min);
        match check_trigpoly_psd(&f, default_grid(n, p), DEFAULT_TOL) {
            Ok(cert) => {
                let pos = cert.verdict.is_positive();
                if pos {
                    positive += 1;
                } else {
                    negative += 1;
                }
                if (pos && brute < -1e-8) || (!pos && brute > 1e-8) {
                    failures.push(format!("#{i}: {:?} with brute-force minimum {brute:.3e}", cert.verdict));
                }
            }
            Err(Error::GridExhausted { .. }) => inconclusive += 1,
            Err(e) => failures.push(format!("#{i}: {e}")),
        }
    }
    outcome(
        failures.is_empty(),
        format!("{positive} positive, {negative} not positive, {inconclusive} grid-exhausted; failures: {}", list(&failures)),
    )
}

fn list(items: &[String]) -> String {
    if items.is_empty() {
        return "none".into();
    }
    let shown: Vec<&str> = items.iter().take(5).map(String::as_str).collect();
    let more = if items.len() > 5 { format!(" (+{} more)", items.len() - 5) } else { String::new() };
    format!("{}{more}", shown.join("; "))
}

fn main() {
    let mut pool: Pool = Vec::new();
    let mut all_pass = true;
    let mut report = |id: usize, name: &str, limit: Option<f64>, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let in_time = limit.is_none_or(|l| secs <= l);
        let pass = out.pass && in_time;
        all_pass &= pass;
        let budget = limit.map(|l| format!(" (limit {l:.0} s)")).unwrap_or_default();
        println!("criterion {id} [{name}]: {} in {secs:.1} s{budget}: {}", if pass { "PASS" } else { "FAIL" }, out.detail);
    };
    report(1, "block separability by greedy pursuit", Some(60.0), &mut || criterion_1(&mut pool));
    report(2, "scalar Caratheodory exactness", None, &mut || criterion_2(&mut pool));
    report(3, "dilation round trip", None, &mut || criterion_3(&pool));
    report(4, "duality equivalence and pairing", None, &mut criterion_4);
    report(5, "entanglement of the universal polynomial", None, &mut criterion_5);
    report(6, "pure-element structure", None, &mut criterion_6);
    report(7, "Toeplitz complete positivity probe", None, &mut criterion_7);
    report(8, "Toeplitz tensor Toeplitz decompositions", Some(120.0), &mut criterion_8);
    report(9, "certified trigonometric positivity", None, &mut criterion_9);
    if !all_pass {
        std::process::exit(1);
    }
}
