//! Command implementations behind the `isospec` binary.
//!
//! Each `cmd_*` function prints diagnostics to standard error and returns the
//! process exit code: 0 when everything passed, 1 for usage, I/O or schema
//! errors, 2 for a verification failure (or a diverged continuation).

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::continuation::{conjugation_family, generate_isospectral_family, IsospectralFamily};
use crate::error::{Error, Result};
use crate::io::{jmap_to_json, load_jmap, point_from_json};
use crate::jmap::{is_generic, non_equivalence_certificate, spectral_deviation, trace_invariant, JMap};
use crate::orbit::{
    angle_from_gram, area_from_gram, dual_lattice, flat_torus_spectrum, orbit_angle, orbit_gram,
    stratum_area, stratum_gram, OrbitGram, OrbitStratum,
};
use crate::su_algebra::DEFAULT_RANK_TOL;
use crate::verify::{canonical_json, verify_pair};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_FAILED: u8 = 2;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default cutoff for orbit-torus spectra.
pub const DEFAULT_CUTOFF: f64 = 50.0;

/// Values from the command line; each one set here overrides the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub mu_range: Option<i64>,
    pub out: Option<String>,
    pub n: Option<usize>,
    pub p: Option<u32>,
    pub q: Option<u32>,
}

/// Config file (if any), then flags, then `SOURCE_DATE_EPOCH` for an unset
/// timestamp.
pub fn effective_config(ov: &Overrides) -> Result<RunConfig> {
    let mut cfg = match &ov.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(s) = ov.samples {
        cfg.samples = s;
    }
    if let Some(r) = ov.mu_range {
        cfg.mu_range = r;
    }
    if let Some(o) = &ov.out {
        cfg.output_path = Some(o.clone());
    }
    if ov.n.is_some() {
        cfg.n = ov.n;
    }
    if let Some(p) = ov.p {
        cfg.p = p;
    }
    if let Some(q) = ov.q {
        cfg.q = q;
    }
    if cfg.timestamp.is_none() {
        cfg.timestamp = std::env::var("SOURCE_DATE_EPOCH").ok();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report_error(e: &Error) -> u8 {
    eprintln!("error: {e}");
    EXIT_ERROR
}

/// Writes to `path`, or to standard output when there is none.
fn emit(path: Option<&str>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn member_file_name(index: usize) -> String {
    format!("member_{index:03}.json")
}

/// Pairwise verdicts for a family, `i < j`.
pub fn family_pairs(members: &[JMap], tol: f64) -> Result<Vec<Value>> {
    let mut pairs = Vec::new();
    for i in 0..members.len() {
        for k in i + 1..members.len() {
            let dev = spectral_deviation(&members[i], &members[k])?;
            let cert = non_equivalence_certificate(&members[i], &members[k])?;
            pairs.push(json!({
                "i": i,
                "j": k,
                "isospectral": dev <= tol,
                "spectral_deviation": dev,
                "certificate": cert,
            }));
        }
    }
    Ok(pairs)
}

fn write_family(
    cfg: &RunConfig,
    dir: &Path,
    family: &IsospectralFamily,
    status: &str,
    steps: usize,
    step_size: f64,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::with_capacity(family.members.len());
    for (i, member) in family.members.iter().enumerate() {
        let name = member_file_name(i);
        std::fs::write(dir.join(&name), jmap_to_json(member))?;
        names.push(name);
    }
    let pairs = family_pairs(&family.members, cfg.tolerances.isospectral)?;
    let manifest = json!({
        "m": family.members[0].m(),
        "seed": cfg.seed,
        "steps": steps,
        "step_size": step_size,
        "status": status,
        "trivial": family.trivial,
        "restarts": family.restarts,
        "members": names,
        "pairs": pairs,
        "all_isospectral": pairs.iter().all(|p| p["isospectral"] == json!(true)),
        "isospectral_tolerance": cfg.tolerances.isospectral,
        "tool_version": TOOL_VERSION,
        "timestamp": cfg.timestamp,
    });
    std::fs::write(dir.join("manifest.json"), canonical_json(&manifest))?;
    Ok(())
}

/// Traces a family and writes `member_NNN.json` files plus `manifest.json`
/// into `cfg.output_path` (default `family`).
pub fn cmd_generate(cfg: &RunConfig, m: usize, steps: usize, step_size: f64) -> u8 {
    if m < 3 {
        eprintln!("error: m must be ≥ 3 (got {m})");
        return EXIT_ERROR;
    }
    let dir = PathBuf::from(cfg.output_path.as_deref().unwrap_or("family"));
    let (family, status, code) = match generate_isospectral_family(cfg.seed, m, steps, step_size) {
        Ok(f) => (f, "ok", EXIT_OK),
        Err(Error::ContinuationDiverged { residual, iterations }) => {
            eprintln!(
                "warning: continuation diverged (residual {residual:e} after {iterations} iterations); \
                 writing a trivial conjugation family"
            );
            match conjugation_family(cfg.seed, m, steps, step_size) {
                Ok(f) => (f, "diverged", EXIT_FAILED),
                Err(e) => return report_error(&e),
            }
        }
        Err(e) => return report_error(&e),
    };
    if family.trivial && status == "ok" {
        log::warn!("no nontrivial direction found; the family is a conjugation orbit");
    }
    match write_family(cfg, &dir, &family, status, steps, step_size) {
        Ok(()) => code,
        Err(e) => report_error(&e),
    }
}

fn load_pair(a: &Path, b: &Path) -> Result<(JMap, JMap)> {
    let ja = load_jmap(a).map_err(|e| with_path(e, a))?;
    let jb = load_jmap(b).map_err(|e| with_path(e, b))?;
    Ok((ja, jb))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io(msg) => Error::Io(format!("{}: {msg}", path.display())),
        Error::SchemaError { field, message } => Error::SchemaError {
            field,
            message: format!("{message} (in {})", path.display()),
        },
        other => other,
    }
}

/// Runs every hypothesis check on a pair of j-map files.
pub fn cmd_verify(cfg: &RunConfig, a: &Path, b: &Path) -> u8 {
    let result = load_pair(a, b).and_then(|(ja, jb)| verify_pair(&ja, &jb, cfg));
    let report = match result {
        Ok(r) => r,
        Err(e) => return report_error(&e),
    };
    if let Err(e) = emit(cfg.output_path.as_deref(), &report.to_canonical_json()) {
        return report_error(&e);
    }
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        EXIT_OK
    } else {
        let shown = failed.len().min(5);
        let more = if failed.len() > shown { ", ..." } else { "" };
        eprintln!("{} check(s) failed: {}{more}", failed.len(), failed[..shown].join(", "));
        EXIT_FAILED
    }
}

/// Genericity and the non-equivalence certificate for a pair of files.
pub fn cmd_certify(cfg: &RunConfig, a: &Path, b: &Path) -> u8 {
    let run = || -> Result<Value> {
        let (ja, jb) = load_pair(a, b)?;
        Ok(json!({
            "generic": {"left": is_generic(&ja, DEFAULT_RANK_TOL), "right": is_generic(&jb, DEFAULT_RANK_TOL)},
            "trace_invariant": {"left": trace_invariant(&ja)?, "right": trace_invariant(&jb)?},
            "spectral_deviation": spectral_deviation(&ja, &jb)?,
            "certificate": non_equivalence_certificate(&ja, &jb)?,
            "tool_version": TOOL_VERSION,
        }))
    };
    match run().and_then(|v| emit(cfg.output_path.as_deref(), &canonical_json(&v))) {
        Ok(()) => EXIT_OK,
        Err(e) => report_error(&e),
    }
}

#[derive(Debug, Clone)]
pub enum OrbitTarget {
    Stratum { a: f64, b: f64 },
    Point(PathBuf),
}

/// Eigenvalues grouped with multiplicities; values closer than `1e-9`
/// relative are merged.
fn grouped_spectrum(values: &[f64]) -> Vec<Value> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        match out.last_mut() {
            Some((w, k)) if (v - *w).abs() <= 1e-9 * w.abs().max(1.0) => *k += 1,
            _ => out.push((v, 1)),
        }
    }
    out.into_iter()
        .map(|(v, k)| json!({"eigenvalue": v, "multiplicity": k}))
        .collect()
}

pub fn orbit_summary(cfg: &RunConfig, target: &OrbitTarget, cutoff: f64) -> Result<Value> {
    let (params, stratum, gram): (_, OrbitStratum, OrbitGram) = match target {
        OrbitTarget::Stratum { a, b } => {
            let params = cfg.params_for(None)?;
            let s = OrbitStratum::new(*a, *b)?;
            (params, s, stratum_gram(&params, &s))
        }
        OrbitTarget::Point(path) => {
            let x = point_from_json(&std::fs::read_to_string(path)?)?;
            let params = cfg.params_for(Some(x.n() - 1))?;
            if params.n != x.n() {
                return Err(Error::DimensionMismatch {
                    expected: params.n,
                    found: x.n(),
                });
            }
            let s = OrbitStratum::of_point(&x)?;
            (params, s, orbit_gram(&params, &x)?)
        }
    };
    let area = area_from_gram(&params, &gram);
    let area_identity = stratum_area(&params, &stratum);
    let angle = if stratum.a() == stratum.b() {
        json!({
            "closed_form": orbit_angle(&params, stratum.a())?,
            "from_gram": angle_from_gram(&gram),
        })
    } else {
        Value::Null
    };
    let lattice = dual_lattice(&params);
    let spectrum = flat_torus_spectrum(&gram, &lattice, cutoff)?;
    Ok(json!({
        "params": params,
        "stratum": stratum,
        "gram": gram,
        "area": area,
        "area_identity": area_identity,
        "angle": angle,
        "lattice": lattice,
        "cutoff": cutoff,
        "spectrum": grouped_spectrum(&spectrum),
        "tool_version": TOOL_VERSION,
    }))
}

/// Gram matrix, area, angle, lattice and flat-torus spectrum of one orbit.
pub fn cmd_orbit(cfg: &RunConfig, target: &OrbitTarget, cutoff: f64) -> u8 {
    match orbit_summary(cfg, target, cutoff).and_then(|v| emit(cfg.output_path.as_deref(), &canonical_json(&v))) {
        Ok(()) => EXIT_OK,
        Err(e) => report_error(&e),
    }
}
