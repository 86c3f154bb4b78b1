//! The `qhg` command-line driver: JSON report on stdout, summary on stderr.

use crate::characters::{holonomy_from_parameters, SurfaceGluing, SurfaceMesh, TransversePath};
use crate::error::{QhgError, Result};
use crate::fig8;
use crate::latsolve::{self, Certificate};
use crate::mesh::{Gluing, Mesh, NormalPath, Report};
use crate::moves;
use crate::specialfn::Level;
use crate::statesum::{normalization_exponent, trace_tensor, PhaseWitness};
use crate::tetra::{ModuliTriple, Sign};
use crate::CNum;
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

/// Complex numbers on the wire.
pub type Pair = [f64; 2];

pub fn pair(z: CNum) -> Pair {
    [z.re, z.im]
}

pub fn unpair(p: Pair) -> CNum {
    CNum::new(p[0], p[1])
}

/// A mesh document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshFile {
    pub n_tets: usize,
    /// [tet_a, face_a, tet_b, face_b, images of face_a's sorted vertices]
    pub gluings: Vec<(usize, usize, usize, usize, [usize; 3])>,
    pub orientations: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moduli: Option<Vec<Pair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flattenings: Option<Vec<[i64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charges: Option<Vec<[i64; 3]>>,
    /// edge-class representatives [tet, a, b]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian_edges: Option<Vec<[usize; 3]>>,
}

impl MeshFile {
    pub fn to_mesh(&self) -> Result<Mesh> {
        if self.orientations.len() != self.n_tets {
            return Err(QhgError::Parse(format!("{} orientations for {} tets", self.orientations.len(), self.n_tets)));
        }
        let signs = self.orientations.iter().map(|&s| Sign::from_i64(s)).collect::<Result<Vec<_>>>()?;
        let gluings = self
            .gluings
            .iter()
            .map(|&(tet_a, face_a, tet_b, face_b, perm)| Gluing { tet_a, face_a, tet_b, face_b, perm })
            .collect();
        let mut m = Mesh::new(signs, gluings)?;
        if let Some(w) = &self.moduli {
            m = m.with_moduli(w.iter().map(|&p| ModuliTriple::from_w0(unpair(p))).collect::<Result<Vec<_>>>()?)?;
        }
        if let Some(f) = &self.flattenings {
            m = m.with_flattening(f.clone())?;
        }
        if let Some(c) = &self.charges {
            m = m.with_charge(c.clone())?;
        }
        if let Some(h) = &self.hamiltonian_edges {
            let reps: Vec<(usize, usize, usize)> = h.iter().map(|r| (r[0], r[1], r[2])).collect();
            m = m.with_hamiltonian(&reps)?;
        }
        Ok(m)
    }

    pub fn from_mesh(m: &Mesh) -> MeshFile {
        MeshFile {
            n_tets: m.n_tets(),
            gluings: m.gluings.iter().map(|g| (g.tet_a, g.face_a, g.tet_b, g.face_b, g.perm)).collect(),
            orientations: m.signs.iter().map(|s| s.as_i64()).collect(),
            moduli: m.moduli.as_ref().map(|w| w.iter().map(|t| pair(t.w0())).collect()),
            flattenings: m.flattening.clone(),
            charges: m.charge.clone(),
            hamiltonian_edges: if m.ham.is_empty() {
                None
            } else {
                Some(m.ham.iter().map(|&e| {
                    let (t, a, b) = m.edges()[e].rep();
                    [t, a, b]
                }).collect())
            },
        }
    }
}

/// Path constraints for `flatten` and `charge`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConstraint {
    /// [tet, vertex, enter face, exit face] per step
    pub steps: Vec<[usize; 4]>,
    /// flattening weight [re, im] or integer charge weight
    pub target: Value,
}

/// A surface document for `holonomy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFile {
    pub orientations: Vec<i64>,
    /// [tri_a, edge_a, tri_b, edge_b], edges named by the opposite vertex
    pub gluings: Vec<[usize; 4]>,
    pub genus: usize,
    pub punctures: usize,
    /// one (−)-parameter per gluing
    pub parameters: Vec<Pair>,
}

#[derive(Parser, Debug)]
#[command(name = "qhg", version, about = "Quantum hyperbolic state sums on ideal triangulations")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Check edge relations, flattening and charge conditions of a mesh file.
    Validate {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Solve for a global flattening (optional path constraints file).
    Flatten {
        file: PathBuf,
        #[arg(long)]
        paths: Option<PathBuf>,
    },
    /// Solve for a global charge (Hamiltonian edges from the file; optional path weights).
    Charge {
        file: PathBuf,
        #[arg(long)]
        paths: Option<PathBuf>,
    },
    /// Contract the state sum of a decorated mesh.
    Contract {
        file: PathBuf,
        #[arg(long = "N", default_value_t = 3)]
        n: usize,
        /// print at most this many tensor entries
        #[arg(long, default_value_t = 4096)]
        max_entries: usize,
    },
    /// Seeded random 2-3 transits compared under =_N.
    Pentagon {
        #[arg(long = "N", default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// The figure-eight knot complement.
    Fig8 {
        #[arg(long = "N", default_value_t = 3)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Fig8Mode::Complete)]
        mode: Fig8Mode,
        /// filling slope for --mode dehn
        #[arg(num_args = 0..=2)]
        pq: Vec<i64>,
        /// w2 for --mode deformed, as "re,im"
        #[arg(long)]
        w2: Option<String>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// print the decorated complete-structure mesh file instead
        #[arg(long)]
        emit_mesh: bool,
    },
    /// Holonomy of a transverse loop from (−)-parameters on a surface.
    Holonomy {
        file: PathBuf,
        /// "start:e1,e2,..." with edges named by the opposite vertex
        #[arg(long = "loop")]
        loop_spec: String,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fig8Mode {
    Complete,
    Deformed,
    Dehn,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| QhgError::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| QhgError::Parse(format!("{}: {e}", path.display())))
}

fn read_mesh(path: &Path) -> Result<Mesh> {
    read_json::<MeshFile>(path)?.to_mesh()
}

fn report_json(r: &Report) -> Value {
    json!({
        "kind": r.kind,
        "tol": r.tol,
        "checked": r.checked,
        "max_residual": r.max_residual,
        "violations": r.violations,
    })
}

fn witness_json(w: &PhaseWitness) -> Value {
    json!({ "equal": w.equal, "scalar": pair(w.scalar), "phase_index": w.phase_index, "sign": w.sign })
}

fn certificate_json(c: &Certificate) -> Value {
    serde_json::to_value(c).unwrap_or(Value::Null)
}

/// Outcome of a command: JSON for stdout and a one-line summary.
pub struct Output {
    pub json: Value,
    pub summary: String,
    pub ok: bool,
}

fn cmd_validate(file: &Path, tol: f64) -> Result<Output> {
    let m = read_mesh(file)?;
    let mut out = json!({
        "n_tets": m.n_tets(),
        "edges": m.edges().len(),
        "interior_edges": m.interior_edges().count(),
        "vertices": m.classify_vertices(),
    });
    let mut ok = true;
    let mut parts = Vec::new();
    if m.moduli.is_some() {
        let r = m.validate_i(tol)?;
        ok &= r.ok();
        parts.push(format!("I: {} violations", r.violations.len()));
        out["i_triangulation"] = report_json(&r);
        if m.flattening.is_some() {
            let r = m.validate_flattened(tol)?;
            ok &= r.ok();
            parts.push(format!("flattening: {} violations", r.violations.len()));
            out["flattening"] = report_json(&r);
        }
    }
    if m.charge.is_some() {
        let r = m.validate_charged()?;
        ok &= r.ok();
        parts.push(format!("charge: {} violations", r.violations.len()));
        out["charge"] = report_json(&r);
    }
    out["ok"] = json!(ok);
    Ok(Output { json: out, summary: format!("validate {}: {}", file.display(), parts.join(", ")), ok })
}

fn read_paths(path: &Option<PathBuf>) -> Result<Vec<(NormalPath, Value)>> {
    let Some(p) = path else { return Ok(Vec::new()) };
    let list: Vec<PathConstraint> = read_json(p)?;
    Ok(list
        .into_iter()
        .map(|c| {
            let steps: Vec<(usize, usize, usize, usize)> = c.steps.iter().map(|s| (s[0], s[1], s[2], s[3])).collect();
            (NormalPath::from_tuples(&steps), c.target)
        })
        .collect())
}

fn cmd_flatten(file: &Path, paths: &Option<PathBuf>) -> Result<Output> {
    let m = read_mesh(file)?;
    let mut cons = Vec::new();
    for (p, t) in read_paths(paths)? {
        let t: Pair = serde_json::from_value(t).map_err(|e| QhgError::Parse(format!("flattening target: {e}")))?;
        cons.push((p, unpair(t)));
    }
    let json = match latsolve::solve_flattening(&m, &cons)? {
        Ok(f) => {
            let dec = m.clone().with_flattening(f.values.clone())?;
            let r = dec.validate_flattened(1e-9)?;
            let gens = latsolve::lattice_generators(&m)?;
            json!({ "feasible": true, "flattening": f.values, "check": report_json(&r), "lattice_generators": gens.len() })
        }
        Err(c) => json!({ "feasible": false, "certificate": certificate_json(&c) }),
    };
    let ok = json["feasible"] == json!(true);
    Ok(Output { summary: format!("flatten {}: {}", file.display(), if ok { "solved" } else { "infeasible" }), json, ok })
}

fn cmd_charge(file: &Path, paths: &Option<PathBuf>) -> Result<Output> {
    let m = read_mesh(file)?;
    let mut cons = Vec::new();
    for (p, t) in read_paths(paths)? {
        let t: i64 = serde_json::from_value(t).map_err(|e| QhgError::Parse(format!("charge target: {e}")))?;
        cons.push((p, t));
    }
    let ham: BTreeSet<usize> = m.ham.clone();
    let json = match latsolve::solve_charge_weighted(&m, &ham, &cons)? {
        Ok(c) => {
            let dec = m.clone().with_charge(c.values.clone())?;
            let r = dec.validate_charged()?;
            json!({ "feasible": true, "charge": c.values, "check": report_json(&r) })
        }
        Err(c) => json!({ "feasible": false, "certificate": certificate_json(&c) }),
    };
    let ok = json["feasible"] == json!(true);
    Ok(Output { summary: format!("charge {}: {}", file.display(), if ok { "solved" } else { "infeasible" }), json, ok })
}

fn cmd_contract(file: &Path, n: usize, max_entries: usize) -> Result<Output> {
    let m = read_mesh(file)?;
    let level = Level::new(n)?;
    let t = trace_tensor(&m, &level)?;
    let mut out = json!({
        "N": n,
        "labels": t.labels,
        "dim": t.dim,
        "entries": t.data.len(),
        "max_abs": t.max_abs(),
        "normalization_exponent": normalization_exponent(&m),
    });
    if t.data.len() <= max_entries {
        out["data"] = json!(t.data.iter().map(|&z| pair(z)).collect::<Vec<_>>());
    }
    let summary = if t.labels.is_empty() {
        format!("contract N={n}: scalar {}", t.data[0])
    } else {
        format!("contract N={n}: rank {} tensor, max |entry| {:.6e}", t.labels.len(), t.max_abs())
    };
    Ok(Output { json: out, summary, ok: true })
}

fn cmd_pentagon(n: usize, samples: usize, seed: u64, tol: f64) -> Result<Output> {
    let level = Level::new(n)?;
    let b = moves::pentagon_batch(&level, samples, seed, tol)?;
    let passed = b.passed();
    let failed = b.samples.len() - passed;
    let json = json!({
        "N": n,
        "seed": seed,
        "samples": b.samples.len(),
        "passed": passed,
        "failed": failed,
        "witnesses": b.samples.iter().map(|s| json!({
            "x": pair(s.x), "y": pair(s.y), "c_lower": s.c_lower, "c_upper": s.c_upper,
            "witness": witness_json(&s.witness),
        })).collect::<Vec<_>>(),
    });
    Ok(Output { json, summary: format!("pentagon N={n}: {passed}/{} passed", b.samples.len()), ok: failed == 0 })
}

fn parse_pair(s: &str) -> Result<CNum> {
    let parts: Vec<&str> = s.split(',').collect();
    let bad = || QhgError::Parse(format!("expected \"re,im\", got {s:?}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let re: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let im: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    Ok(CNum::new(re, im))
}

fn egcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a.signum() * a, a.signum(), 0)
    } else {
        let (g, x, y) = egcd(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

/// (r, s) with p·s − q·r = 1.
pub fn complete_slope(p: i64, q: i64) -> Result<(i64, i64)> {
    // p·s + q·(−r) = 1
    let (g, s, mr) = egcd(p, q);
    if g != 1 {
        return Err(QhgError::Domain(format!("({p}, {q}) is not a primitive slope")));
    }
    Ok((-mr, s))
}

pub fn complete_fig8_mesh() -> Result<Mesh> {
    let (f, c) = fig8::solver_decorations()?;
    fig8::build_fig8_mesh(&fig8::Fig8Point::complete(), &f, &c)
}

fn cmd_fig8(n: usize, mode: Fig8Mode, pq: &[i64], w2: &Option<String>, tol: f64, emit_mesh: bool) -> Result<Output> {
    if emit_mesh {
        let mf = MeshFile::from_mesh(&complete_fig8_mesh()?);
        return Ok(Output { json: serde_json::to_value(mf).map_err(|e| QhgError::Parse(e.to_string()))?, summary: "fig8 mesh".into(), ok: true });
    }
    let level = Level::new(n)?;
    match mode {
        Fig8Mode::Complete => {
            let c = fig8::crosscheck(&level, tol)?;
            let json = json!({
                "N": n,
                "mode": "complete",
                "closed_form": pair(c.closed_form),
                "state_sum": pair(c.state_sum),
                "eq_mod_n": c.witness.equal,
                "phase_index": c.witness.phase_index,
                "witness": witness_json(&c.witness),
            });
            Ok(Output { summary: format!("fig8 N={n} complete: eq_mod_n = {}", c.witness.equal), ok: c.witness.equal, json })
        }
        Fig8Mode::Deformed => {
            let w2 = match w2 {
                Some(s) => parse_pair(s)?,
                None => CNum::from_polar(1.05, std::f64::consts::PI / 3.0 + 0.03),
            };
            let p = fig8::Fig8Point::geometric(w2)?;
            let m = fig8::build_mesh(&p)?;
            let f = latsolve::solve_flattening(&m, &[])?.map_err(|c| QhgError::Infeasible(format!("{c:?}")))?;
            let c = latsolve::solve_charge(&m, &BTreeSet::new())?.map_err(|c| QhgError::Infeasible(format!("{c:?}")))?;
            let (f, c) = ([f.values[0], f.values[1]], [c.values[0], c.values[1]]);
            let mesh = fig8::build_fig8_mesh(&p, &f, &c)?;
            let cf = fig8::closed_form(&level, &p, &f, &c)?;
            let (ss, w) = fig8::crosscheck_mesh(&level, &mesh, cf, tol)?;
            let (lm, ll) = p.log_dilations()?;
            let json = json!({
                "N": n,
                "mode": "deformed",
                "w2": pair(w2),
                "z0": pair(p.z0),
                "edge_relation_residual": (p.edge_relation() - CNum::new(1.0, 0.0)).norm(),
                "log_dilations": [pair(lm), pair(ll)],
                "flattening": f,
                "charge": c,
                "closed_form": pair(cf),
                "state_sum": pair(ss),
                "eq_mod_n": w.equal,
                "phase_index": w.phase_index,
                "witness": witness_json(&w),
            });
            Ok(Output { summary: format!("fig8 N={n} deformed at w2={w2}: eq_mod_n = {}", w.equal), ok: w.equal, json })
        }
        Fig8Mode::Dehn => {
            if pq.len() != 2 {
                return Err(QhgError::Parse("--mode dehn needs the slope: p q".into()));
            }
            let (p, q) = (pq[0], pq[1]);
            let (r, s) = complete_slope(p, q)?;
            let point = fig8::solve_dehn_point(p, q)?;
            let (lm, ll) = point.log_dilations()?;
            let v = fig8::dehn_filled_value(&level, (p, q, r, s), &point)?;
            let residual = (lm * p as f64 + ll * q as f64 - CNum::new(0.0, 2.0 * std::f64::consts::PI)).norm();
            let json = json!({
                "N": n,
                "mode": "dehn",
                "pqrs": [p, q, r, s],
                "w2": pair(point.w2),
                "filling_residual": residual,
                "value": pair(v),
            });
            Ok(Output { summary: format!("fig8 N={n} dehn ({p},{q}): value {v}"), ok: true, json })
        }
    }
}

fn parse_loop(spec: &str) -> Result<TransversePath> {
    let bad = || QhgError::Parse(format!("loop must be \"start:e1,e2,...\", got {spec:?}"));
    let (start, rest) = spec.split_once(':').ok_or_else(bad)?;
    let start: usize = start.trim().parse().map_err(|_| bad())?;
    let crossings = rest.split(',').map(|x| x.trim().parse::<usize>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
    Ok(TransversePath { start, crossings })
}

fn cmd_holonomy(file: &Path, loop_spec: &str) -> Result<Output> {
    let sf: SurfaceFile = read_json(file)?;
    let signs = sf.orientations.iter().map(|&s| Sign::from_i64(s)).collect::<Result<Vec<_>>>()?;
    let gluings = sf.gluings.iter().map(|g| SurfaceGluing { tri_a: g[0], edge_a: g[1], tri_b: g[2], edge_b: g[3] }).collect();
    let s = SurfaceMesh::new(signs, gluings, sf.genus, sf.punctures)?;
    let params: Vec<CNum> = sf.parameters.iter().map(|&p| unpair(p)).collect();
    let path = parse_loop(loop_spec)?;
    let h = holonomy_from_parameters(&s, &params, &path)?;
    let json = json!({
        "matrix": [[pair(h.a), pair(h.b)], [pair(h.c), pair(h.d)]],
        "trace": pair(h.trace()),
        "tr2": pair(h.tr2()),
    });
    Ok(Output { summary: format!("holonomy {loop_spec}: tr² = {}", h.tr2()), json, ok: true })
}

pub fn execute(cli: &Cli) -> Result<Output> {
    match &cli.cmd {
        Cmd::Validate { file, tol } => cmd_validate(file, *tol),
        Cmd::Flatten { file, paths } => cmd_flatten(file, paths),
        Cmd::Charge { file, paths } => cmd_charge(file, paths),
        Cmd::Contract { file, n, max_entries } => cmd_contract(file, *n, *max_entries),
        Cmd::Pentagon { n, samples, seed, tol } => cmd_pentagon(*n, *samples, *seed, *tol),
        Cmd::Fig8 { n, mode, pq, w2, tol, emit_mesh } => cmd_fig8(*n, *mode, pq, w2, *tol, *emit_mesh),
        Cmd::Holonomy { file, loop_spec } => cmd_holonomy(file, loop_spec),
    }
}

fn error_kind(e: &QhgError) -> &'static str {
    match e {
        QhgError::Domain(_) => "domain",
        QhgError::Singular(_) => "singular",
        QhgError::InvalidMesh(_) => "invalid_mesh",
        QhgError::InvalidPath(_) => "invalid_path",
        QhgError::NotIdealizable { .. } => "not_idealizable",
        QhgError::Undecorated(_) => "undecorated",
        QhgError::Infeasible(_) => "infeasible",
        QhgError::NoConvergence(_) => "no_convergence",
        QhgError::Parse(_) => "parse",
    }
}

// A closed pipe on stdout is not an error worth a panic.
fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

/// Runs the CLI; returns the process exit code (0 ok, 1 failed check, 2 error).
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(out) => {
            emit(&serde_json::to_string_pretty(&out.json).unwrap_or_default());
            eprintln!("{}", out.summary);
            if out.ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            emit(&json!({ "error": { "kind": error_kind(&e), "message": e.to_string() } }).to_string());
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_file_round_trip() {
        let m = complete_fig8_mesh().unwrap();
        let mf = MeshFile::from_mesh(&m);
        let text = serde_json::to_string(&mf).unwrap();
        let back: MeshFile = serde_json::from_str(&text).unwrap();
        let m2 = back.to_mesh().unwrap();
        assert_eq!(m.gluings, m2.gluings);
        assert_eq!(m.flattening, m2.flattening);
        for (a, b) in m.moduli.unwrap().iter().zip(m2.moduli.unwrap()) {
            assert!((a.w0() - b.w0()).norm() < 1e-15);
        }
    }

    #[test]
    fn slope_completion() {
        for (p, q) in [(1, 0), (5, 1), (-3, 2), (0, 1), (7, -4)] {
            let (r, s) = complete_slope(p, q).unwrap();
            assert_eq!(p * s - q * r, 1, "({p},{q})");
        }
        assert!(complete_slope(4, 2).is_err());
    }

    #[test]
    fn loop_parsing() {
        assert_eq!(parse_loop("0:1,2").unwrap(), TransversePath { start: 0, crossings: vec![1, 2] });
        assert!(parse_loop("0-1").is_err());
    }

    #[test]
    fn fig8_complete_output() {
        let cli = Cli::parse_from(["qhg", "fig8", "--N", "3", "--mode", "complete"]);
        let out = execute(&cli).unwrap();
        assert!(out.ok);
        assert_eq!(out.json["eq_mod_n"], json!(true));
        assert!(out.json["closed_form"].is_array() && out.json["phase_index"].is_i64());
    }

    #[test]
    fn pentagon_output() {
        let cli = Cli::parse_from(["qhg", "pentagon", "--N", "3", "--samples", "5", "--seed", "7"]);
        let out = execute(&cli).unwrap();
        assert_eq!(out.json["passed"], json!(5));
        assert_eq!(out.json["failed"], json!(0));
    }
}
