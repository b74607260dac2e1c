use std::path::{Path, PathBuf};

use anyhow::anyhow;
use serde::Serialize;
use serde_json::{json, Value};
use tsep_core::entanglement::SearchOptions;
use tsep_core::generate::{self, rng_from_seed, PRNG_NAME};
use tsep_core::positivity::{default_grid, DEFAULT_TOL};
use tsep_core::separability::is_toeplitz_tensor;
use tsep_core::{
    caratheodory_scalar, check_toeplitz_psd, check_trigpoly_psd, decompose_block, decompose_shift, decompose_toeplitz_toeplitz, duality_pair,
    naimark_from_atoms, rank_one_range_witness, separability_search_dual, toeplitz_cp_probe, universal_toeplitz,
    universal_trigpoly, verify_factorization, AtomicDecomposition, BlockToeplitz, CMatrix, Complex64, EntanglementVerdict,
    Error, GreedyOptions, Grid2dOptions, MatrixMap, TrigMatrixPoly,
};

use crate::args::{
    BuiltinMap, CheckArgs, Command, CpProbeArgs, DecomposeArgs, Engine, GenArgs, Kind, Mode, PairArgs, WitnessArgs,
};
use crate::io::{self, Failure, RunMeta};

/// Result JSON, exit code and manifest fields of a finished command.
pub struct Run {
    pub result: Value,
    pub code: u8,
    pub meta: RunMeta,
    /// Printed to stderr after the result is written.
    pub message: Option<String>,
}

impl Run {
    fn new(result: impl Serialize, code: u8, meta: RunMeta) -> Self {
        Run { result: serde_json::to_value(result).expect("result types serialize"), code, meta, message: None }
    }
}

type Outcome = std::result::Result<Run, Failure>;

/// Negative verdicts from the library exit with 1, everything else with 2.
fn core_failure(e: Error) -> Failure {
    let code = match e {
        Error::NotPositive { .. } | Error::NotPsd { .. } => 1,
        _ => 2,
    };
    Failure::new(code, e)
}

pub fn run(command: &Command, out: Option<&Path>) -> Outcome {
    match command {
        Command::Check(a) => check(a),
        Command::Decompose(a) => decompose(a),
        Command::Factorize(a) => factorize(a),
        Command::Witness(a) => witness(a),
        Command::Gen(a) => gen(a, out),
        Command::Pair(a) => pair(a),
        Command::CpProbe(a) => cp_probe(a),
    }
}

fn load<T: serde::de::DeserializeOwned>(path: &Path, meta: &mut RunMeta) -> Result<T, Failure> {
    let (text, digest) = io::read_input(path)?;
    meta.inputs.push(digest);
    Ok(io::parse_json(path, &text)?)
}

fn sniff_kind(path: &Path) -> Result<Kind, Failure> {
    let (text, _) = io::read_input(path)?;
    let value: Value = io::parse_json(path, &text)?;
    match value.get("kind").and_then(Value::as_str) {
        Some("toeplitz") | None => Ok(Kind::Toeplitz),
        Some("trigpoly") => Ok(Kind::Trigpoly),
        Some(other) => Err(anyhow!("unknown kind {other:?} in {}; pass --kind", path.display()).into()),
    }
}

fn check(a: &CheckArgs) -> Outcome {
    let kind = match a.kind {
        Some(k) => k,
        None => sniff_kind(&a.path)?,
    };
    let mut meta = RunMeta::default().tol("positivity", a.tol);
    let cert = match kind {
        Kind::Toeplitz => {
            let t: BlockToeplitz = load(&a.path, &mut meta)?;
            if a.grid.is_some() {
                log::warn!("--grid only applies to trigonometric polynomials");
            }
            check_toeplitz_psd(&t, a.tol).map_err(core_failure)?
        }
        Kind::Trigpoly => {
            let f: TrigMatrixPoly = load(&a.path, &mut meta)?;
            let grid = a.grid.unwrap_or_else(|| default_grid(f.n(), f.p()));
            check_trigpoly_psd(&f, grid, a.tol).map_err(core_failure)?
        }
    };
    let code = if cert.verdict.is_positive() { 0 } else { 1 };
    Ok(Run::new(&cert, code, meta))
}

struct Decomposed {
    target: BlockToeplitz,
    dec: AtomicDecomposition,
    engine: Engine,
    /// The iteration budget ran out; `dec` is the best found.
    exhausted: bool,
    meta: RunMeta,
}

fn resolve_engine(t: &BlockToeplitz, requested: Engine) -> Engine {
    match requested {
        Engine::Auto if t.p() == 1 => Engine::Caratheodory,
        Engine::Auto if is_toeplitz_tensor(t, 1e-12) => Engine::Grid2d,
        Engine::Auto => Engine::Greedy,
        e => e,
    }
}

fn run_engine(t: &BlockToeplitz, engine: Engine, tol: f64, max_atoms: usize) -> tsep_core::Result<AtomicDecomposition> {
    match engine {
        Engine::Caratheodory => caratheodory_scalar(t, tol),
        Engine::Grid2d => Ok(decompose_toeplitz_toeplitz(t, &Grid2dOptions { tol, ..Default::default() })?.to_atomic(t)),
        Engine::Greedy | Engine::Auto => decompose_block(t, &GreedyOptions { tol, max_atoms, ..Default::default() }),
        Engine::Shift => {
            let dec = decompose_shift(t)?;
            if dec.residual > tol * t.frobenius_norm() || dec.atoms.len() > max_atoms {
                return Err(Error::BudgetExhausted { best: Box::new(dec) });
            }
            Ok(dec)
        }
    }
}

fn decompose_input(a: &DecomposeArgs) -> Result<Decomposed, Failure> {
    let mut meta = RunMeta::default().tol("positivity", DEFAULT_TOL);
    let target: BlockToeplitz = load(&a.path, &mut meta)?;
    let cert = check_toeplitz_psd(&target, DEFAULT_TOL).map_err(core_failure)?;
    if !cert.verdict.is_positive() {
        return Err(Failure::new(1, Error::NotPositive { margin: cert.margin }));
    }
    let mut engine = resolve_engine(&target, a.engine);
    let mut tol = a.tol.unwrap_or_else(|| engine.default_tol());
    let mut result = run_engine(&target, engine, tol, a.max_atoms);
    if a.engine == Engine::Auto && engine == Engine::Grid2d && matches!(result, Err(Error::NotStrictlyPositive { .. })) {
        log::info!("input is not strictly positive; falling back to the greedy engine");
        engine = Engine::Greedy;
        tol = a.tol.unwrap_or_else(|| engine.default_tol());
        result = run_engine(&target, engine, tol, a.max_atoms);
    }
    let (dec, exhausted) = match result {
        Ok(dec) => (dec, false),
        Err(Error::BudgetExhausted { best }) => (*best, true),
        Err(e) => return Err(core_failure(e)),
    };
    meta = meta.tol("decomposition", tol);
    meta.engine = Some(engine.name().into());
    meta.residual = Some(dec.residual);
    Ok(Decomposed { target, dec, engine, exhausted, meta })
}

fn exhausted_message(d: &Decomposed) -> Option<String> {
    d.exhausted.then(|| format!("budget exhausted: best decomposition has residual {:.3e}", d.dec.residual))
}

fn decompose(a: &DecomposeArgs) -> Outcome {
    let d = decompose_input(a)?;
    let mut run = Run::new(&d.dec, if d.exhausted { 3 } else { 0 }, RunMeta::default());
    run.message = exhausted_message(&d);
    run.meta = d.meta;
    Ok(run)
}

fn factorize(a: &DecomposeArgs) -> Outcome {
    let d = decompose_input(a)?;
    let fac = naimark_from_atoms(&d.dec).map_err(core_failure)?;
    let check = verify_factorization(&d.target, &fac).map_err(core_failure)?;
    let result = json!({
        "engine": d.engine.name(),
        "decomposition_residual": d.dec.residual,
        "factorization": fac,
        "check": check,
    });
    let mut run = Run::new(result, if d.exhausted { 3 } else { 0 }, RunMeta::default());
    run.message = exhausted_message(&d);
    run.meta = d.meta;
    run.meta.residual = Some(check.residual);
    Ok(run)
}

fn witness(a: &WitnessArgs) -> Outcome {
    let mut meta = RunMeta::default().tol("search", a.tol);
    let f: TrigMatrixPoly = load(&a.path, &mut meta)?;
    let mut cert = rank_one_range_witness(&f, a.samples).map_err(core_failure)?;
    if cert.verdict == EntanglementVerdict::Undecided && a.search_budget > 0 {
        let opts = SearchOptions { tol: a.tol, root_angles: a.root_angles, max_rounds: a.search_budget };
        cert = separability_search_dual(&f, a.search_grid, &opts).map_err(core_failure)?;
    }
    Ok(Run::new(&cert, 0, meta))
}

fn sidecar_path(a: &GenArgs, out: Option<&Path>) -> Option<PathBuf> {
    a.truth.clone().or_else(|| out.map(|o| o.with_extension("truth.json")))
}

fn gen(a: &GenArgs, out: Option<&Path>) -> Outcome {
    generate::validate(a.n, a.p).map_err(core_failure)?;
    let mut rng = rng_from_seed(a.seed);
    let mut meta = RunMeta { seed: Some(a.seed), prng: Some(PRNG_NAME.into()), ..Default::default() };
    let result = match a.mode {
        Mode::Atoms => {
            if a.atoms == 0 {
                return Err(Failure::new(2, Error::BadParams("--atoms must be positive".into())));
            }
            let (t, truth) = generate::gen_atoms(a.n, a.p, a.atoms, &mut rng);
            match sidecar_path(a, out) {
                Some(path) => io::write_atomic(&path, &io::to_json_bytes(&truth))?,
                None => log::warn!("no --out or --truth given; ground-truth atoms are not written"),
            }
            serde_json::to_value(t)
        }
        Mode::Density => serde_json::to_value(generate::gen_density(a.n, a.p, &mut rng)),
        Mode::Pure => serde_json::to_value(generate::gen_pure(a.n, a.p, &mut rng).0),
        Mode::Dualpure => serde_json::to_value(generate::gen_dualpure(a.n, a.p, &mut rng)),
        Mode::Universal => {
            meta.seed = None;
            meta.prng = None;
            let id = CMatrix::identity(a.p);
            if a.trigpoly {
                // Already n x n valued.
                if a.p != 1 {
                    return Err(Failure::new(2, Error::BadParams("--trigpoly takes no --p".into())));
                }
                serde_json::to_value(universal_trigpoly(a.n))
            } else {
                let t = universal_toeplitz(a.n, Complex64::from_polar(1.0, a.theta)).map_err(core_failure)?;
                serde_json::to_value(t.tensor(&id))
            }
        }
    }
    .expect("instances serialize");
    Ok(Run { result, code: 0, meta, message: None })
}

fn pair(a: &PairArgs) -> Outcome {
    let mut meta = RunMeta::default();
    let t: BlockToeplitz = load(&a.toeplitz, &mut meta)?;
    let f: TrigMatrixPoly = load(&a.trigpoly, &mut meta)?;
    let value = duality_pair(&t, &f).map_err(core_failure)?;
    Ok(Run::new(json!({ "value": value }), 0, meta))
}

fn cp_probe(a: &CpProbeArgs) -> Outcome {
    let mut meta = RunMeta::default();
    let psi = match (&a.map, a.builtin) {
        (Some(path), _) => load::<MatrixMap>(path, &mut meta)?,
        (None, Some(b)) => {
            let p = a.dim.unwrap_or(0);
            if p == 0 {
                return Err(Failure::new(2, Error::BadParams("--dim must be positive".into())));
            }
            match b {
                BuiltinMap::Identity => MatrixMap::identity(p),
                BuiltinMap::Transpose => MatrixMap::transpose(p),
                BuiltinMap::Depolarizing => MatrixMap::depolarizing(p),
            }
        }
        (None, None) => unreachable!("clap requires a map or --builtin"),
    };
    let report = toeplitz_cp_probe(&psi, a.nmax, a.trials, a.seed).map_err(core_failure)?;
    meta.seed = Some(report.seed);
    meta.prng = Some(report.prng.clone());
    meta = meta.tol("psd", report.tol);
    let code = if report.violations.is_empty() { 0 } else { 1 };
    Ok(Run::new(&report, code, meta))
}
