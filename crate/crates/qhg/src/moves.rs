//! 2↔3 and bubble transits, and the pentagon check.
//!
//! The 2↔3 fragment lives on five global vertices 0..4 with central edge [1,3] on the
//! 3-tet side. The 2-tet side is (0,1,2,4) and (0,2,3,4), glued along [024]; the
//! 3-tet side is (1,2,3,4), (0,1,3,4), (0,1,2,3). All tetrahedra are positive.
//! Decorations on the new side are found by the integer solver under the transit
//! constraints: equal W, L, C totals on every common edge, and W = 1, L = 0, C = 2 on
//! the central edge.

use crate::error::{QhgError, Result};
use crate::latsolve::{integer_kernel, integral_target, Certificate, Constraint, IntSystem, TARGET_TOL};
use crate::mesh::{face_vertices, Gluing, Mesh};
use crate::specialfn::Level;
use crate::statesum::{eq_mod_n_tensors, trace_tensor, PhaseWitness, Tensor};
use crate::tetra::{edge_index, FlatChargedTet, ModuliTriple, Sign};
use crate::CNum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Vertices of the lower and upper tetrahedra of the 2-tet side.
pub const LOWER: [usize; 4] = [0, 1, 2, 4];
pub const UPPER: [usize; 4] = [0, 2, 3, 4];
/// Vertices of the 3-tet side, around the central edge.
pub const THREE_SIDE: [[usize; 4]; 3] = [[1, 2, 3, 4], [0, 1, 3, 4], [0, 1, 2, 3]];
pub const CENTRAL: (usize, usize) = (1, 3);

/// Samples with a modulus this close to 0 or 1 are rejected by the batch sampler.
pub const DEGENERACY_GUARD: f64 = 1e-4;

fn one() -> CNum {
    CNum::new(1.0, 0.0)
}

fn degenerate(z: CNum, eps: f64) -> bool {
    !z.re.is_finite() || !z.im.is_finite() || z.norm() < eps || (z - one()).norm() < eps
}

/// (x1, x2, x3) = (y/x, y(1−x)/(x(1−y)), (1−x)/(1−y)).
pub fn two_three_moduli(x: CNum, y: CNum) -> Result<(CNum, CNum, CNum)> {
    if degenerate(x, 1e-14) || degenerate(y, 1e-14) {
        return Err(QhgError::Domain(format!("degenerate input x={x}, y={y}")));
    }
    let x1 = y / x;
    let x2 = y * (one() - x) / (x * (one() - y));
    let x3 = (one() - x) / (one() - y);
    for (name, z) in [("x1", x1), ("x2", x2), ("x3", x3)] {
        if degenerate(z, 1e-12) {
            return Err(QhgError::Domain(format!("degenerate {name} = {z}")));
        }
    }
    Ok((x1, x2, x3))
}

/// Inverse of [`two_three_moduli`]: (x, y) from (x1, x3).
pub fn three_two_moduli(x1: CNum, x3: CNum) -> Result<(CNum, CNum)> {
    let den = one() - x1 * x3;
    if den.norm() < 1e-14 {
        return Err(QhgError::Domain("degenerate 3-tet moduli".into()));
    }
    let x = (one() - x3) / den;
    Ok((x, x1 * x))
}

/// Branched w0 of each 3-side tetrahedron, in [`THREE_SIDE`] order.
fn three_side_w0(x1: CNum, x2: CNum, x3: CNum) -> [CNum; 3] {
    [x1 / (x1 - one()), one() - x3, one() / (one() - x2)]
}

/// Tetrahedra on global vertex labels with the mesh they span.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub verts: Vec<[usize; 4]>,
    pub mesh: Mesh,
}

impl Fragment {
    pub fn new(verts: Vec<[usize; 4]>, moduli: Vec<ModuliTriple>) -> Result<Fragment> {
        let labeled: Vec<([usize; 4], Sign)> = verts.iter().map(|&v| (v, Sign::Pos)).collect();
        let mesh = Mesh::from_labeled(&labeled)?.with_moduli(moduli)?;
        Ok(Fragment { verts, mesh })
    }

    /// Edge class joining global vertices a and b, if present.
    pub fn edge(&self, a: usize, b: usize) -> Option<usize> {
        for (t, v) in self.verts.iter().enumerate() {
            let ia = v.iter().position(|&x| x == a);
            let ib = v.iter().position(|&x| x == b);
            if let (Some(ia), Some(ib)) = (ia, ib) {
                return self.mesh.edge_class_of(t, ia, ib).ok();
            }
        }
        None
    }

    /// All global vertex pairs spanned by some tetrahedron.
    pub fn edge_labels(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for v in &self.verts {
            for i in 0..4 {
                for j in i + 1..4 {
                    out.push((v[i], v[j]));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Trace tensor with indices relabeled by the global vertex triple of each boundary face.
    pub fn boundary_tensor(&self, level: &Level) -> Result<Tensor> {
        let mut t = trace_tensor(&self.mesh, level)?;
        let classes = self.mesh.face_classes();
        for l in t.labels.iter_mut() {
            let (tet, f) = classes[*l][0];
            let g = face_vertices(f).map(|v| self.verts[tet][v]);
            *l = face_key(g);
        }
        Ok(t)
    }
}

fn face_key(v: [usize; 3]) -> usize {
    (v[0] * 64 + v[1]) * 64 + v[2]
}

/// The 2-tet side: `lower` on [`LOWER`] with w0 = x, `upper` on [`UPPER`] with w0 = y/(y−1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bipyramid {
    pub lower: FlatChargedTet,
    pub upper: FlatChargedTet,
}

impl Bipyramid {
    /// Flattening (0, 0, forced) on both tets and the given charges.
    pub fn from_xy(x: CNum, y: CNum, c_lower: [i64; 3], c_upper: [i64; 3]) -> Result<Bipyramid> {
        let lo = ModuliTriple::from_w0(x)?;
        let up = ModuliTriple::from_w0(y / (y - one()))?;
        Ok(Bipyramid {
            lower: FlatChargedTet::new(Sign::Pos, lo, [0, 0, lo.forced_flattening_sum()], c_lower)?,
            upper: FlatChargedTet::new(Sign::Pos, up, [0, 0, up.forced_flattening_sum()], c_upper)?,
        })
    }

    /// (x, y) read back from the moduli.
    pub fn xy(&self) -> (CNum, CNum) {
        let w = self.upper.moduli.w0();
        (self.lower.moduli.w0(), w / (w - one()))
    }

    pub fn fragment(&self) -> Result<Fragment> {
        let frag = Fragment::new(vec![LOWER, UPPER], vec![self.lower.moduli, self.upper.moduli])?;
        let mesh = frag
            .mesh
            .with_flattening(vec![self.lower.f, self.upper.f])?
            .with_charge(vec![self.lower.c, self.upper.c])?;
        Ok(Fragment { verts: frag.verts, mesh })
    }
}

/// Both sides of a transit and the correspondence of their edges.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitResult {
    pub before: Fragment,
    pub after: Fragment,
    /// (global pair, edge in `before`, edge in `after`)
    pub common: Vec<((usize, usize), usize, usize)>,
    /// The new edge in `after`, if any.
    pub new_edge: Option<usize>,
}

/// Worst residuals of the transit conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitCheck {
    pub modulus_residual: f64,
    pub log_residual: f64,
    pub charges_equal: bool,
    pub new_edge_ok: bool,
}

impl TransitCheck {
    pub fn ok(&self, tol: f64) -> bool {
        self.modulus_residual <= tol && self.log_residual <= tol && self.charges_equal && self.new_edge_ok
    }
}

impl TransitResult {
    pub fn check(&self, tol: f64) -> Result<TransitCheck> {
        let (b, a) = (&self.before.mesh, &self.after.mesh);
        let mut out = TransitCheck { modulus_residual: 0.0, log_residual: 0.0, charges_equal: true, new_edge_ok: true };
        for &(_, eb, ea) in &self.common {
            out.modulus_residual = out.modulus_residual.max((b.edge_total_modulus(eb)? - a.edge_total_modulus(ea)?).norm());
            out.log_residual = out.log_residual.max((b.edge_total_log_branch(eb)? - a.edge_total_log_branch(ea)?).norm());
            out.charges_equal &= b.edge_total_charge(eb)? == a.edge_total_charge(ea)?;
        }
        if let Some(e) = self.new_edge {
            out.new_edge_ok = (a.edge_total_modulus(e)? - one()).norm() <= tol
                && a.edge_total_log_branch(e)?.norm() <= tol
                && a.edge_total_charge(e)? == 2;
        }
        Ok(out)
    }
}

fn common_edges(before: &Fragment, after: &Fragment) -> Vec<((usize, usize), usize, usize)> {
    let mut out = Vec::new();
    for (a, b) in before.edge_labels() {
        if let (Some(eb), Some(ea)) = (before.edge(a, b), after.edge(a, b)) {
            out.push(((a, b), eb, ea));
        }
    }
    out
}

/// Homogeneous rows on `frag`: per-tet sums, then every listed edge total.
fn transit_rows(frag: &Fragment, edges: &[usize], signed: bool) -> IntSystem {
    let m = &frag.mesh;
    let n = 3 * m.n_tets();
    let mut sys = IntSystem::new(n);
    for t in 0..m.n_tets() {
        let mut row = vec![0; n];
        row[3 * t..3 * t + 3].copy_from_slice(&[1, 1, 1]);
        sys.push(row, 0, Constraint::Tet(t));
    }
    for &e in edges {
        let mut row = vec![0; n];
        for &(t, a, b) in &m.edges()[e].members {
            row[3 * t + edge_index(a, b)] += if signed { m.signs[t].as_i64() } else { 1 };
        }
        sys.push(row, 0, Constraint::Edge(e));
    }
    sys
}

fn infeasible(what: &str, c: Certificate) -> QhgError {
    QhgError::Infeasible(format!("{what}: {c:?}"))
}

/// Flattening and charge on `after` matching the totals of `before` on common edges,
/// with L = 0 and C = 2 on `new_edge`.
fn solve_matching(
    before: &Fragment,
    after: &Fragment,
    common: &[((usize, usize), usize, usize)],
    new_edge: Option<usize>,
) -> Result<(Vec<[i64; 3]>, Vec<[i64; 3]>)> {
    let m = &after.mesh;
    let moduli = m.moduli.as_ref().ok_or_else(|| QhgError::Undecorated("moduli".into()))?;
    let logs: Vec<[CNum; 3]> = moduli.iter().map(|w| w.logs()).collect();
    let mut edges: Vec<usize> = common.iter().map(|c| c.2).collect();
    let mut log_targets: Vec<CNum> = Vec::new();
    let mut charge_targets: Vec<i64> = Vec::new();
    for &(_, eb, _) in common {
        log_targets.push(before.mesh.edge_total_log_branch(eb)?);
        charge_targets.push(before.mesh.edge_total_charge(eb)?);
    }
    if let Some(e) = new_edge {
        edges.push(e);
        log_targets.push(CNum::new(0.0, 0.0));
        charge_targets.push(2);
    }

    let mut fsys = transit_rows(after, &edges, true);
    let nt = m.n_tets();
    for t in 0..nt {
        let s: CNum = logs[t].iter().sum();
        fsys.rhs[t] = integral_target(-s, Constraint::Tet(t), TARGET_TOL).map_err(|c| infeasible("flattening", c))?;
    }
    for (i, &e) in edges.iter().enumerate() {
        let mut s = log_targets[i];
        for &(t, a, b) in &m.edges()[e].members {
            s -= logs[t][edge_index(a, b)] * m.signs[t].as_f64();
        }
        fsys.rhs[nt + i] = integral_target(s, Constraint::Edge(e), TARGET_TOL).map_err(|c| infeasible("flattening", c))?;
    }
    let (f, _) = fsys.solve()?.map_err(|c| infeasible("flattening", c))?;

    let mut csys = transit_rows(after, &edges, false);
    for t in 0..nt {
        csys.rhs[t] = 1;
    }
    for (i, &c) in charge_targets.iter().enumerate() {
        csys.rhs[nt + i] = c;
    }
    let (c, _) = csys.solve()?.map_err(|c| infeasible("charge", c))?;

    let triples = |v: &[i64]| v.chunks(3).map(|c| [c[0], c[1], c[2]]).collect::<Vec<_>>();
    Ok((triples(&f), triples(&c)))
}

/// The 2→3 move on a decorated bipyramid.
pub fn two_three_transit(pair: &Bipyramid) -> Result<TransitResult> {
    let (x, y) = pair.xy();
    let (x1, x2, x3) = two_three_moduli(x, y)?;
    let moduli = three_side_w0(x1, x2, x3).iter().map(|&w| ModuliTriple::from_w0(w)).collect::<Result<Vec<_>>>()?;
    let before = pair.fragment()?;
    let bare = Fragment::new(THREE_SIDE.to_vec(), moduli)?;
    let common = common_edges(&before, &bare);
    let new_edge = bare.edge(CENTRAL.0, CENTRAL.1);
    let (f, c) = solve_matching(&before, &bare, &common, new_edge)?;
    let mesh = bare.mesh.with_flattening(f)?.with_charge(c)?;
    let res = TransitResult { before, after: Fragment { verts: bare.verts, mesh }, common, new_edge };
    let chk = res.check(1e-9)?;
    if !chk.ok(1e-9) {
        return Err(QhgError::Infeasible(format!("transit postconditions fail: {chk:?}")));
    }
    Ok(res)
}

/// The 3→2 move: rebuilds the bipyramid from a decorated 3-tet side.
pub fn three_two_transit(three: &Fragment) -> Result<Bipyramid> {
    let moduli = three.mesh.moduli.as_ref().ok_or_else(|| QhgError::Undecorated("moduli".into()))?;
    let w = [0, 1, 2].map(|i| moduli[i].w0());
    // invert three_side_w0
    let x1 = w[0] / (w[0] - one());
    let x3 = one() - w[1];
    let (x, y) = three_two_moduli(x1, x3)?;
    let lo = ModuliTriple::from_w0(x)?;
    let up = ModuliTriple::from_w0(y / (y - one()))?;
    let bare = Fragment::new(vec![LOWER, UPPER], vec![lo, up])?;
    let common = common_edges(three, &bare);
    let (f, c) = solve_matching(three, &bare, &common, None)?;
    Ok(Bipyramid {
        lower: FlatChargedTet::new(Sign::Pos, lo, f[0], c[0])?,
        upper: FlatChargedTet::new(Sign::Pos, up, f[1], c[1])?,
    })
}

/// Integer kernel of the transit constraints on `frag` (flattening if `signed`, else
/// charge): differences of decorations that keep every edge total and tet sum.
pub fn transit_lattice(frag: &Fragment, signed: bool) -> Result<Vec<Vec<i64>>> {
    let edges: Vec<usize> = (0..frag.mesh.edges().len()).collect();
    let sys = transit_rows(frag, &edges, signed);
    integer_kernel(&sys.rows, sys.n)
}

/// Compares the boundary tensors of the two sides of a decorated transit.
pub fn pentagon_witness(t: &TransitResult, level: &Level, tol: f64) -> Result<PhaseWitness> {
    let a = t.before.boundary_tensor(level)?;
    let b = t.after.boundary_tensor(level)?;
    Ok(eq_mod_n_tensors(&a, &b, level, tol))
}

/// Default tolerance of [`pentagon_check`].
pub const PENTAGON_TOL: f64 = 1e-8;

/// 2→3 transit at (x, y) with fixed charges on the 2-tet side, then the tensor comparison.
pub fn pentagon_check(x: CNum, y: CNum, level: &Level) -> Result<PhaseWitness> {
    let pair = Bipyramid::from_xy(x, y, [1, 0, 0], [0, 1, 0])?;
    pentagon_witness(&two_three_transit(&pair)?, level, PENTAGON_TOL)
}

/// Outcome of a seeded batch of pentagon checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PentagonBatch {
    pub level: usize,
    pub seed: u64,
    pub samples: Vec<PentagonSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PentagonSample {
    pub x: CNum,
    pub y: CNum,
    pub c_lower: [i64; 3],
    pub c_upper: [i64; 3],
    pub witness: PhaseWitness,
}

impl PentagonBatch {
    pub fn passed(&self) -> usize {
        self.samples.iter().filter(|s| s.witness.equal).count()
    }

    pub fn all_passed(&self) -> bool {
        self.passed() == self.samples.len()
    }
}

/// Whether (x, y) and every modulus it produces stay `DEGENERACY_GUARD` away from {0, 1}.
pub fn nondegenerate(x: CNum, y: CNum) -> bool {
    if degenerate(x, DEGENERACY_GUARD) || degenerate(y, DEGENERACY_GUARD) || degenerate(y / (y - one()), DEGENERACY_GUARD) {
        return false;
    }
    match two_three_moduli(x, y) {
        Ok((x1, x2, x3)) => {
            [x1, x2, x3].iter().all(|&z| !degenerate(z, DEGENERACY_GUARD))
                && three_side_w0(x1, x2, x3).iter().all(|&z| !degenerate(z, DEGENERACY_GUARD))
        }
        Err(_) => false,
    }
}

fn random_charge(rng: &mut ChaCha8Rng) -> [i64; 3] {
    let a = rng.gen_range(-2..=2);
    let b = rng.gen_range(-2..=2);
    [a, b, 1 - a - b]
}

/// `count` random (x, y) in the upper half plane with random charges, checked at `tol`.
pub fn pentagon_batch(level: &Level, count: usize, seed: u64, tol: f64) -> Result<PentagonBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count);
    while samples.len() < count {
        let x = CNum::new(rng.gen_range(-1.5..2.5), rng.gen_range(0.05..2.0));
        let y = CNum::new(rng.gen_range(-1.5..2.5), rng.gen_range(0.05..2.0));
        if !nondegenerate(x, y) {
            continue;
        }
        let (c_lower, c_upper) = (random_charge(&mut rng), random_charge(&mut rng));
        let pair = Bipyramid::from_xy(x, y, c_lower, c_upper)?;
        let witness = pentagon_witness(&two_three_transit(&pair)?, level, tol)?;
        samples.push(PentagonSample { x, y, c_lower, c_upper, witness });
    }
    Ok(PentagonBatch { level: level.n(), seed, samples })
}

/// The bubble move on face [012] of a single tetrahedron: before is the tetrahedron
/// alone, after glues a pair of opposite tetrahedra on (0,1,2,4) with modulus `w`,
/// flattening `f` and charge `c` (the same on both) onto that face.
pub fn bubble_pair(base: &FlatChargedTet, w: ModuliTriple, f: [i64; 3], c: [i64; 3]) -> Result<(Mesh, Mesh)> {
    let before = Mesh::new(vec![base.sign], vec![])?
        .with_moduli(vec![base.moduli])?
        .with_flattening(vec![base.f])?
        .with_charge(vec![base.c])?;
    let gluings = vec![
        Gluing::ordered(0, 3, 1, 3),
        Gluing::ordered(1, 0, 2, 0),
        Gluing::ordered(1, 1, 2, 1),
        Gluing::ordered(1, 2, 2, 2),
    ];
    let s = base.sign;
    let after = Mesh::new(vec![s, s.flip(), s], gluings)?
        .with_moduli(vec![base.moduli, w, w])?
        .with_flattening(vec![base.f, f, f])?
        .with_charge(vec![base.c, c, c])?;
    Ok((before, after))
}

/// One line of a bubble report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleCheck {
    pub what: String,
    pub residual: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleReport {
    pub checks: Vec<BubbleCheck>,
}

impl BubbleReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

/// Checks a bubble transit. The tetrahedra of `before` are the first ones of `after`.
/// New edges (all members in added tetrahedra) need W = 1 and L = 0, and charges
/// {0, 0, 2}; old edges keep W, L and C, except `marked` whose C grows by 2.
pub fn bubble_constraints_check(
    before: &Mesh,
    after: &Mesh,
    marked: Option<(usize, usize, usize)>,
    tol: f64,
) -> Result<BubbleReport> {
    let nb = before.n_tets();
    let mut checks = Vec::new();
    let mut push = |what: String, residual: f64, ok: bool| checks.push(BubbleCheck { what, residual, ok });
    let marked_after = match marked {
        Some((t, a, b)) => Some(after.edge_class_of(t, a, b)?),
        None => None,
    };
    for (e, cls) in before.edges().iter().enumerate() {
        let (t, a, b) = cls.rep();
        let ea = after.edge_class_of(t, a, b)?;
        let dw = (before.edge_total_modulus(e)? - after.edge_total_modulus(ea)?).norm();
        push(format!("W at edge {e}"), dw, dw <= tol);
        let dl = (before.edge_total_log_branch(e)? - after.edge_total_log_branch(ea)?).norm();
        push(format!("L at edge {e}"), dl, dl <= tol);
        let shift = if Some(ea) == marked_after { 2 } else { 0 };
        let dc = after.edge_total_charge(ea)? - before.edge_total_charge(e)? - shift;
        push(format!("C at edge {e} (shift {shift})"), dc.abs() as f64, dc == 0);
    }
    let mut new_charges = Vec::new();
    for (e, cls) in after.edges().iter().enumerate() {
        if cls.members.iter().any(|&(t, _, _)| t < nb) {
            continue;
        }
        let dw = (after.edge_total_modulus(e)? - one()).norm();
        push(format!("W = 1 at new edge {e}"), dw, dw <= tol);
        let l = after.edge_total_log_branch(e)?.norm();
        push(format!("L = 0 at new edge {e}"), l, l <= tol);
        new_charges.push(after.edge_total_charge(e)?);
    }
    if !new_charges.is_empty() || after.n_tets() != nb {
        new_charges.sort_unstable();
        let ok = new_charges == vec![0, 0, 2];
        push(format!("new edge charges {new_charges:?} = [0, 0, 2]"), if ok { 0.0 } else { 1.0 }, ok);
    }
    Ok(BubbleReport { checks })
}
