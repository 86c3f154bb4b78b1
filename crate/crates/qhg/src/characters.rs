//! PSL(2,C) cocycles, idealization, and (−)-parameters on surfaces.
//!
//! A cocycle on a branched triangulation assigns z(ab) ∈ PSL(2,C) to every edge
//! a → b with z(01)·z(12) = z(02) on each triangle. The idealization of a tetrahedron
//! is the ideal tetrahedron with vertices u0 = 0 and u_j = z(0j)(0).
//!
//! Points of CP¹ are handled in homogeneous coordinates where ∞ can occur.

use crate::error::{QhgError, Result};
use crate::mesh::{face_vertices, Mesh, Report};
use crate::specialfn::{nth_root, plog};
use crate::tetra::{ModuliTriple, Sign, EDGE_PAIRS};
use crate::CNum;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::Mul;

fn c(re: f64, im: f64) -> CNum {
    CNum::new(re, im)
}

/// A Möbius transformation [[a, b], [c, d]] with ad − bc = 1, defined up to sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Psl2 {
    pub a: CNum,
    pub b: CNum,
    pub c: CNum,
    pub d: CNum,
}

impl Mul for Psl2 {
    type Output = Psl2;
    fn mul(self, o: Psl2) -> Psl2 {
        Psl2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }
}

impl Psl2 {
    /// Requires det = 1 to 1e−10.
    pub fn new(a: CNum, b: CNum, cc: CNum, d: CNum) -> Result<Psl2> {
        let m = Psl2 { a, b, c: cc, d };
        if (m.det() - c(1.0, 0.0)).norm() > 1e-10 {
            return Err(QhgError::Domain(format!("determinant {} ≠ 1", m.det())));
        }
        Ok(m)
    }

    /// Rescales an invertible matrix to determinant 1.
    pub fn normalized(a: CNum, b: CNum, cc: CNum, d: CNum) -> Result<Psl2> {
        let det = a * d - b * cc;
        if det.norm() < 1e-14 {
            return Err(QhgError::Singular("matrix is not invertible".into()));
        }
        let s = CNum::new(1.0, 0.0) / det.sqrt();
        Ok(Psl2 { a: a * s, b: b * s, c: cc * s, d: d * s })
    }

    pub fn identity() -> Psl2 {
        Psl2 { a: c(1.0, 0.0), b: c(0.0, 0.0), c: c(0.0, 0.0), d: c(1.0, 0.0) }
    }

    pub fn det(&self) -> CNum {
        self.a * self.d - self.b * self.c
    }

    pub fn inv(&self) -> Psl2 {
        Psl2 { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn trace(&self) -> CNum {
        self.a + self.d
    }

    /// tr², well defined on PSL(2,C).
    pub fn tr2(&self) -> CNum {
        self.trace() * self.trace()
    }

    pub fn eq_up_to_sign(&self, o: &Psl2, tol: f64) -> bool {
        let d = |s: f64| {
            [(self.a - o.a * s), (self.b - o.b * s), (self.c - o.c * s), (self.d - o.d * s)].iter().map(|z| z.norm()).fold(0.0, f64::max)
        };
        d(1.0) <= tol || d(-1.0) <= tol
    }

    /// Action on a homogeneous point.
    pub fn act_h(&self, p: HPoint) -> HPoint {
        [self.a * p[0] + self.b * p[1], self.c * p[0] + self.d * p[1]]
    }

    /// Action on C ∪ {∞}; `None` stands for ∞.
    pub fn act(&self, z: Option<CNum>) -> Option<CNum> {
        affine(self.act_h(homog(z)))
    }

    /// The translation z ↦ z + t.
    pub fn translation(t: CNum) -> Psl2 {
        Psl2 { a: c(1.0, 0.0), b: t, c: c(0.0, 0.0), d: c(1.0, 0.0) }
    }

    /// A lower-triangular element fixing 0.
    pub fn lower(lambda: CNum, mu: CNum) -> Result<Psl2> {
        if lambda.norm() < 1e-14 {
            return Err(QhgError::Singular("zero diagonal".into()));
        }
        Ok(Psl2 { a: lambda, b: c(0.0, 0.0), c: mu, d: CNum::new(1.0, 0.0) / lambda })
    }
}

/// Homogeneous coordinates (z, 1) or (1, 0) for ∞.
pub type HPoint = [CNum; 2];

pub fn homog(z: Option<CNum>) -> HPoint {
    match z {
        Some(z) => [z, c(1.0, 0.0)],
        None => [c(1.0, 0.0), c(0.0, 0.0)],
    }
}

/// Affine coordinate, `None` for ∞.
pub fn affine(p: HPoint) -> Option<CNum> {
    let scale = p[0].norm().max(p[1].norm());
    if p[1].norm() <= 1e-14 * scale {
        None
    } else {
        Some(p[0] / p[1])
    }
}

fn bracket(x: HPoint, y: HPoint) -> CNum {
    x[0] * y[1] - x[1] * y[0]
}

fn unit(p: HPoint) -> HPoint {
    let n = (p[0].norm_sqr() + p[1].norm_sqr()).sqrt();
    [p[0] / n, p[1] / n]
}

fn distinct(p: &[HPoint], tol: f64) -> bool {
    let u: Vec<HPoint> = p.iter().map(|&x| unit(x)).collect();
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            if bracket(u[i], u[j]).norm() <= tol {
                return false;
            }
        }
    }
    true
}

/// w0 of the ideal tetrahedron (u0, u1, u2, u3) at edge [u0 u1], in homogeneous form.
pub fn cross_ratio_h(u: [HPoint; 4]) -> CNum {
    bracket(u[2], u[1]) * bracket(u[3], u[0]) / (bracket(u[2], u[0]) * bracket(u[3], u[1]))
}

/// w0 = (u2−u1)(u3−u0)/((u2−u0)(u3−u1)); the points must be finite and distinct.
pub fn cross_ratio(u: [CNum; 4]) -> Result<CNum> {
    let h = u.map(|z| homog(Some(z)));
    if !distinct(&h, 1e-12) {
        return Err(QhgError::NotIdealizable { tet: 0, reason: "coincident points".into() });
    }
    Ok(cross_ratio_h(h))
}

/// Cocycle values of one tetrahedron, indexed like [`EDGE_PAIRS`] (edge a → b, a < b).
pub type TetCocycle = [Psl2; 6];

fn pair_slot(a: usize, b: usize) -> usize {
    EDGE_PAIRS.iter().position(|&p| p == (a.min(b), a.max(b))).expect("vertex pair")
}

/// z(a → b) for any two distinct local vertices.
pub fn tet_value(z: &TetCocycle, a: usize, b: usize) -> Psl2 {
    let m = z[pair_slot(a, b)];
    if a < b {
        m
    } else {
        m.inv()
    }
}

/// u0 = 0 and u_j = z(0j)(0), with `None` for ∞.
pub fn tet_points(z: &TetCocycle) -> [Option<CNum>; 4] {
    let zero = Some(c(0.0, 0.0));
    [zero, z[0].act(zero), z[1].act(zero), z[2].act(zero)]
}

/// The idealization of tetrahedron `tet` (index used in errors).
pub fn idealize_tet_at(tet: usize, z: &TetCocycle) -> Result<ModuliTriple> {
    let pts = tet_points(z);
    let mut u = [c(0.0, 0.0); 4];
    for (i, p) in pts.iter().enumerate() {
        u[i] = p.ok_or_else(|| QhgError::NotIdealizable { tet, reason: format!("u{i} = ∞") })?;
    }
    if !distinct(&u.map(|x| homog(Some(x))), 1e-12) {
        return Err(QhgError::NotIdealizable { tet, reason: "coincident points".into() });
    }
    ModuliTriple::from_w0(cross_ratio_h(u.map(|x| homog(Some(x)))))
        .map_err(|e| QhgError::NotIdealizable { tet, reason: e.to_string() })
}

pub fn idealize_tet(z: &TetCocycle) -> Result<ModuliTriple> {
    idealize_tet_at(0, z)
}

/// The three log-branches of the canonical flattening, with logs of u_k − u0:
/// l0 = log(u2−u1) + log u3 − log u2 − log(u3−u1),
/// l1 = log u2 + log(u3−u1) − log u1 − log(u3−u2) + iπ,
/// l2 = log(u3−u2) + log u1 − log u3 − log(u2−u1) − iπ.
pub fn canonical_flattening(u: [CNum; 4]) -> Result<[CNum; 3]> {
    cross_ratio(u)?;
    let (u1, u2, u3) = (u[1] - u[0], u[2] - u[0], u[3] - u[0]);
    let ipi = c(0.0, PI);
    Ok([
        plog(u2 - u1) + plog(u3) - plog(u2) - plog(u3 - u1),
        plog(u2) + plog(u3 - u1) - plog(u1) - plog(u3 - u2) + ipi,
        plog(u3 - u2) + plog(u1) - plog(u3) - plog(u2 - u1) - ipi,
    ])
}

/// Integer flattening f with l_j = log w_j + iπ f_j.
pub fn flattening_of(moduli: &ModuliTriple, l: &[CNum; 3]) -> Result<[i64; 3]> {
    let logs = moduli.logs();
    let mut f = [0i64; 3];
    for j in 0..3 {
        let d = (l[j] - logs[j]) / c(0.0, PI);
        if d.im.abs() > 1e-8 || (d.re - d.re.round()).abs() > 1e-8 {
            return Err(QhgError::Domain(format!("l{j} is not a log-branch of w{j}")));
        }
        f[j] = d.re.round() as i64;
    }
    Ok(f)
}

/// A cocycle on a mesh: per-tet values on the six edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cocycle {
    pub values: Vec<TetCocycle>,
}

impl Cocycle {
    /// z(ab) = g_a⁻¹·g_b from elements attached to the four vertices of each tet.
    pub fn from_vertex_elements(per_tet: &[[Psl2; 4]]) -> Cocycle {
        let values = per_tet.iter().map(|g| EDGE_PAIRS.map(|(a, b)| g[a].inv() * g[b])).collect();
        Cocycle { values }
    }

    /// Same, with elements indexed by global vertex labels.
    pub fn from_labels(verts: &[[usize; 4]], g: &[Psl2]) -> Cocycle {
        let per: Vec<[Psl2; 4]> = verts.iter().map(|v| v.map(|x| g[x])).collect();
        Cocycle::from_vertex_elements(&per)
    }

    pub fn trivial(n: usize) -> Cocycle {
        Cocycle { values: vec![[Psl2::identity(); 6]; n] }
    }

    /// h⁻¹·z·h on every edge.
    pub fn conjugated(&self, h: &Psl2) -> Cocycle {
        Cocycle { values: self.values.iter().map(|z| z.map(|m| h.inv() * m * *h)).collect() }
    }

    /// Triangle relations on every face and agreement across every gluing (up to sign).
    pub fn validate(&self, m: &Mesh, tol: f64) -> Result<()> {
        if self.values.len() != m.n_tets() {
            return Err(QhgError::Domain("cocycle size does not match the mesh".into()));
        }
        for (t, z) in self.values.iter().enumerate() {
            for f in 0..4 {
                let [a, b, cc] = face_vertices(f);
                if !(tet_value(z, a, b) * tet_value(z, b, cc)).eq_up_to_sign(&tet_value(z, a, cc), tol) {
                    return Err(QhgError::Domain(format!("cocycle relation fails on face {f} of tet {t}")));
                }
            }
        }
        for g in &m.gluings {
            let map = g.vertex_map();
            for a in face_vertices(g.face_a) {
                for b in face_vertices(g.face_a) {
                    if a < b {
                        let za = tet_value(&self.values[g.tet_a], a, b);
                        let zb = tet_value(&self.values[g.tet_b], map[a], map[b]);
                        if !za.eq_up_to_sign(&zb, tol) {
                            return Err(QhgError::Domain(format!("cocycle differs across gluing of tet {} face {}", g.tet_a, g.face_a)));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Installs the idealization and its canonical flattening. The report is the
/// flattening check of the result.
pub fn idealize_mesh(m: &Mesh, z: &Cocycle) -> Result<(Mesh, Report)> {
    z.validate(m, 1e-8)?;
    let mut moduli = Vec::with_capacity(m.n_tets());
    let mut flat = Vec::with_capacity(m.n_tets());
    for (t, zt) in z.values.iter().enumerate() {
        let w = idealize_tet_at(t, zt)?;
        let u = tet_points(zt).map(|p| p.expect("finite after idealization"));
        let l = canonical_flattening(u)?;
        flat.push(flattening_of(&w, &l)?);
        moduli.push(w);
    }
    let out = m.clone().with_moduli(moduli)?.with_flattening(flat)?;
    let report = out.validate_flattened(1e-9)?;
    Ok((out, report))
}

/// A glued pair of triangle edges; edges are named by their opposite vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceGluing {
    pub tri_a: usize,
    pub edge_a: usize,
    pub tri_b: usize,
    pub edge_b: usize,
}

/// Endpoints (i < j) of the triangle edge opposite vertex k.
pub fn tri_edge(k: usize) -> (usize, usize) {
    match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Whether the third vertex lies to the left of the edge opposite k (oriented i → j).
fn third_on_left(sign: Sign, k: usize) -> bool {
    (k != 1) == (sign == Sign::Pos)
}

/// An ideal triangulation of a punctured surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub signs: Vec<Sign>,
    pub gluings: Vec<SurfaceGluing>,
    pub genus: usize,
    pub punctures: usize,
}

impl SurfaceMesh {
    /// Checks that every edge is used at most once, that gluings reverse the induced
    /// boundary orientation, and the Euler characteristic.
    pub fn new(signs: Vec<Sign>, gluings: Vec<SurfaceGluing>, genus: usize, punctures: usize) -> Result<SurfaceMesh> {
        let nt = signs.len();
        let mut used = vec![[false; 3]; nt];
        for g in &gluings {
            for (t, k) in [(g.tri_a, g.edge_a), (g.tri_b, g.edge_b)] {
                if t >= nt || k >= 3 || used[t][k] {
                    return Err(QhgError::InvalidMesh(format!("edge {k} of triangle {t} glued twice or out of range")));
                }
                used[t][k] = true;
            }
            // boundary orientation: [01] and [12] forward, [02] backward
            let dir = |t: usize, k: usize| signs[t].as_i64() * if k == 1 { -1 } else { 1 };
            if dir(g.tri_a, g.edge_a) != -dir(g.tri_b, g.edge_b) {
                return Err(QhgError::InvalidMesh(format!("gluing {g:?} is not orientation reversing")));
            }
        }
        let s = SurfaceMesh { signs, gluings, genus, punctures };
        let v = s.vertex_count();
        let e = s.gluings.len() + used.iter().flatten().filter(|&&u| !u).count();
        let chi = v as i64 - e as i64 + nt as i64;
        if v != punctures || chi != 2 - 2 * genus as i64 {
            return Err(QhgError::InvalidMesh(format!("χ = {chi} with {v} vertices does not match genus {genus} with {punctures} punctures")));
        }
        Ok(s)
    }

    fn vertex_count(&self) -> usize {
        let n = 3 * self.signs.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for g in &self.gluings {
            let (a0, a1) = tri_edge(g.edge_a);
            let (b0, b1) = tri_edge(g.edge_b);
            for (x, y) in [(3 * g.tri_a + a0, 3 * g.tri_b + b0), (3 * g.tri_a + a1, 3 * g.tri_b + b1)] {
                let (rx, ry) = (find(&mut parent, x), find(&mut parent, y));
                parent[rx] = ry;
            }
        }
        (0..n).filter(|&x| find(&mut parent, x) == x).count()
    }

    /// Two triangles t0 = (q0,q1,q2) positive and t1 = (q0,q3,q2) negative in a square
    /// q0 q1 q2 q3, sides glued by translations. Gluings: diagonal, [q0q1]~[q3q2],
    /// [q1q2]~[q0q3].
    pub fn punctured_torus() -> SurfaceMesh {
        let gluings = vec![
            SurfaceGluing { tri_a: 0, edge_a: 1, tri_b: 1, edge_b: 1 },
            SurfaceGluing { tri_a: 0, edge_a: 2, tri_b: 1, edge_b: 0 },
            SurfaceGluing { tri_a: 0, edge_a: 0, tri_b: 1, edge_b: 2 },
        ];
        SurfaceMesh::new(vec![Sign::Pos, Sign::Neg], gluings, 1, 1).expect("punctured torus")
    }

    /// The gluing at edge k of triangle t, seen from t: (neighbor, its edge, gluing index, t is side a).
    fn across(&self, t: usize, k: usize) -> Option<(usize, usize, usize, bool)> {
        self.gluings.iter().enumerate().find_map(|(i, g)| {
            if (g.tri_a, g.edge_a) == (t, k) {
                Some((g.tri_b, g.edge_b, i, true))
            } else if (g.tri_b, g.edge_b) == (t, k) {
                Some((g.tri_a, g.edge_a, i, false))
            } else {
                None
            }
        })
    }
}

/// An equivariant cocycle on a surface mesh: elements at the corners of each triangle
/// (z(ab) = g_a⁻¹·g_b inside a triangle) and, per gluing, the deck element carrying
/// triangle b next to triangle a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCocycle {
    pub corners: Vec<[Psl2; 3]>,
    pub deck: Vec<Psl2>,
}

impl SurfaceCocycle {
    /// Developed vertices g_v(0) of triangle t, homogeneous.
    pub fn points(&self, t: usize) -> [HPoint; 3] {
        self.corners[t].map(|g| g.act_h(homog(Some(c(0.0, 0.0)))))
    }

    /// z(a → b) inside triangle t.
    pub fn value(&self, t: usize, a: usize, b: usize) -> Psl2 {
        self.corners[t][a].inv() * self.corners[t][b]
    }

    /// Shared endpoints must develop to the same points across each gluing.
    pub fn validate(&self, s: &SurfaceMesh, tol: f64) -> Result<()> {
        if self.corners.len() != s.signs.len() || self.deck.len() != s.gluings.len() {
            return Err(QhgError::Domain("cocycle size does not match the surface".into()));
        }
        for (i, g) in s.gluings.iter().enumerate() {
            let pa = self.points(g.tri_a);
            let pb = self.points(g.tri_b);
            let (a0, a1) = tri_edge(g.edge_a);
            let (b0, b1) = tri_edge(g.edge_b);
            for (x, y) in [(a0, b0), (a1, b1)] {
                let moved = self.deck[i].act_h(pb[y]);
                if bracket(unit(pa[x]), unit(moved)).norm() > tol {
                    return Err(QhgError::Domain(format!("gluing {i} does not match developed points")));
                }
            }
        }
        Ok(())
    }

    /// Replaces g_v by g_v·λ_v, with λ fixing 0 (lower triangular).
    pub fn gauged(&self, lambdas: &[[Psl2; 3]]) -> SurfaceCocycle {
        let corners = self.corners.iter().zip(lambdas).map(|(g, l)| [g[0] * l[0], g[1] * l[1], g[2] * l[2]]).collect();
        SurfaceCocycle { corners, deck: self.deck.clone() }
    }

    /// The cocycle of a representation (A, B) of the punctured torus group on
    /// [`SurfaceMesh::punctured_torus`]. `base` sends 0 to a fixed point of
    /// A⁻¹B⁻¹AB, the developed image of the puncture.
    pub fn punctured_torus(a: Psl2, b: Psl2, base: Psl2) -> Result<SurfaceCocycle> {
        let k = a.inv() * b.inv() * a * b;
        let p = base.act_h(homog(Some(c(0.0, 0.0))));
        if bracket(unit(k.act_h(p)), unit(p)).norm() > 1e-8 {
            return Err(QhgError::Domain("base point is not fixed by the commutator".into()));
        }
        Ok(SurfaceCocycle {
            corners: vec![[base, a * base, a * b * base], [base, b * base, b * a * base]],
            deck: vec![Psl2::identity(), b.inv(), a],
        })
    }
}

/// A base for [`SurfaceCocycle::punctured_torus`]: a translation to a fixed point of
/// the commutator (any point when the commutator is trivial).
pub fn torus_base(a: &Psl2, b: &Psl2, fallback: CNum) -> Result<Psl2> {
    let k = a.inv() * b.inv() * *a * *b;
    if k.eq_up_to_sign(&Psl2::identity(), 1e-12) {
        return Ok(Psl2::translation(fallback));
    }
    // c z² + (d − a) z − b = 0
    if k.c.norm() < 1e-14 {
        if (k.d - k.a).norm() < 1e-14 {
            return Err(QhgError::NotIdealizable { tet: 0, reason: "puncture develops to ∞".into() });
        }
        return Ok(Psl2::translation(k.b / (k.d - k.a)));
    }
    let disc = ((k.d - k.a) * (k.d - k.a) + 4.0 * k.b * k.c).sqrt();
    Ok(Psl2::translation((k.a - k.d + disc) / (2.0 * k.c)))
}

/// The four developed points (s, t, R, L) of the quadrilateral at gluing k: edge s → t
/// by the branching, R and L the third vertices on the right and left.
fn quadrilateral(s: &SurfaceMesh, z: &SurfaceCocycle, k: usize) -> [HPoint; 4] {
    let g = s.gluings[k];
    let pa = z.points(g.tri_a);
    let pb = z.points(g.tri_b);
    let (i, j) = tri_edge(g.edge_a);
    let xa = pa[g.edge_a];
    let xb = z.deck[k].act_h(pb[g.edge_b]);
    if third_on_left(s.signs[g.tri_a], g.edge_a) {
        [pa[i], pa[j], xb, xa]
    } else {
        [pa[i], pa[j], xa, xb]
    }
}

/// The (−)-parameter (R−t)(L−s)/((R−s)(L−t)) at gluing k.
pub fn w_minus(s: &SurfaceMesh, z: &SurfaceCocycle, k: usize) -> Result<CNum> {
    if k >= s.gluings.len() {
        return Err(QhgError::Domain(format!("no edge {k}")));
    }
    let q = quadrilateral(s, z, k);
    if !distinct(&q, 1e-10) {
        return Err(QhgError::NotIdealizable { tet: k, reason: "degenerate quadrilateral".into() });
    }
    Ok(cross_ratio_h(q))
}

/// Parameters of every edge, indexed by gluing.
pub fn w_minus_all(s: &SurfaceMesh, z: &SurfaceCocycle) -> Result<Vec<CNum>> {
    (0..s.gluings.len()).map(|k| w_minus(s, z, k)).collect()
}

/// p = [[0,1],[1,0]].
pub fn p_matrix() -> Psl2 {
    Psl2 { a: c(0.0, 0.0), b: c(1.0, 0.0), c: c(1.0, 0.0), d: c(0.0, 0.0) }
}

/// l = [[−1,1],[−1,0]].
pub fn l_matrix() -> Psl2 {
    Psl2 { a: c(-1.0, 0.0), b: c(1.0, 0.0), c: c(-1.0, 0.0), d: c(0.0, 0.0) }
}

/// r = l⁻¹.
pub fn r_matrix() -> Psl2 {
    l_matrix().inv()
}

/// diag(w^{1/2}, w^{−1/2}) with the principal square root: fixes 0 and ∞, sends 1 to w.
pub fn gamma_matrix(w: CNum) -> Psl2 {
    let r = nth_root(w, 2);
    Psl2 { a: r, b: c(0.0, 0.0), c: c(0.0, 0.0), d: CNum::new(1.0, 0.0) / r }
}

/// A closed path transverse to the edges: starting triangle and the edges it crosses,
/// each named by the opposite vertex in the current triangle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransversePath {
    pub start: usize,
    pub crossings: Vec<usize>,
}

/// The frame sending 0, ∞, −1 to v0, v1, v2.
fn frame(v: [HPoint; 3]) -> Result<Psl2> {
    // v2 = β v0 − α v1
    let det = bracket(v[0], v[1]);
    if det.norm() < 1e-14 {
        return Err(QhgError::Singular("degenerate triangle".into()));
    }
    let beta = bracket(v[2], v[1]) / det;
    let alpha = -bracket(v[0], v[2]) / det;
    let (m1, m0) = ([v[1][0] * alpha, v[1][1] * alpha], [v[0][0] * beta, v[0][1] * beta]);
    Psl2::normalized(m1[0], m0[0], m1[1], m0[1])
}

/// Holonomy of a closed transverse path from the (−)-parameters: the triangles along
/// the path are developed from the start frame (0, ∞, −1), each new vertex placed by
/// the parameter of the crossed edge; the result is the final frame.
pub fn holonomy_from_parameters(s: &SurfaceMesh, params: &[CNum], path: &TransversePath) -> Result<Psl2> {
    if params.len() != s.gluings.len() {
        return Err(QhgError::Domain("one parameter per edge is required".into()));
    }
    if path.start >= s.signs.len() || path.crossings.is_empty() {
        return Err(QhgError::InvalidPath("empty or out of range".into()));
    }
    let mut tri = path.start;
    let mut pts: [HPoint; 3] = [homog(Some(c(0.0, 0.0))), homog(None), homog(Some(c(-1.0, 0.0)))];
    let mut entered: Option<usize> = None;
    for &k in &path.crossings {
        if k >= 3 {
            return Err(QhgError::InvalidPath(format!("edge {k}")));
        }
        if entered == Some(k) {
            return Err(QhgError::InvalidPath("path leaves through the edge it just entered".into()));
        }
        let (nb, nk, gi, _) = s.across(tri, k).ok_or_else(|| QhgError::InvalidPath(format!("edge {k} of triangle {tri} is on the boundary")))?;
        let (i, j) = tri_edge(k);
        let (sp, tp, known) = (pts[i], pts[j], pts[k]);
        let w = params[gi];
        // w = [R,t][L,s] / ([R,s][L,t])
        let new = if third_on_left(s.signs[tri], k) {
            let l = known;
            let (a, b) = (bracket(l, sp), w * bracket(l, tp));
            [tp[0] * a - sp[0] * b, tp[1] * a - sp[1] * b]
        } else {
            let r = known;
            let (a, b) = (w * bracket(r, sp), bracket(r, tp));
            [tp[0] * a - sp[0] * b, tp[1] * a - sp[1] * b]
        };
        let (ni, nj) = tri_edge(nk);
        let mut next = [[c(0.0, 0.0); 2]; 3];
        next[ni] = unit(sp);
        next[nj] = unit(tp);
        next[nk] = unit(new);
        pts = next;
        tri = nb;
        entered = Some(nk);
    }
    if tri != path.start {
        return Err(QhgError::InvalidPath("path does not close".into()));
    }
    frame(pts)
}

/// tr² of the generators and of their commutator.
pub fn torus_invariants(a: &Psl2, b: &Psl2) -> [CNum; 3] {
    [a.tr2(), b.tr2(), (*a * *b * a.inv() * b.inv()).tr2()]
}

/// The two generator loops of the punctured torus: through the diagonal, then out
/// across [q0q3] (holonomy A⁻¹) or across [q3q2] (holonomy B).
pub fn torus_loops() -> [TransversePath; 2] {
    [
        TransversePath { start: 0, crossings: vec![1, 2] },
        TransversePath { start: 0, crossings: vec![1, 0] },
    ]
}

/// Holonomies of the two generator loops reconstructed from parameters: A⁻¹ and B up
/// to a common conjugation.
pub fn torus_holonomy(params: &[CNum]) -> Result<[Psl2; 2]> {
    let s = SurfaceMesh::punctured_torus();
    let [l1, l2] = torus_loops();
    Ok([holonomy_from_parameters(&s, params, &l1)?, holonomy_from_parameters(&s, params, &l2)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Gluing;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rc(rng: &mut ChaCha8Rng) -> CNum {
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    fn random_psl(rng: &mut ChaCha8Rng) -> Psl2 {
        loop {
            let (a, b, cc, d) = (rc(rng), rc(rng), rc(rng), rc(rng));
            if let Ok(m) = Psl2::normalized(a, b, cc, d) {
                if (a * d - b * cc).norm() > 0.1 {
                    return m;
                }
            }
        }
    }

    fn doubled_mesh() -> Mesh {
        Mesh::new(vec![Sign::Pos, Sign::Neg], (0..4).map(|f| Gluing::ordered(0, f, 1, f)).collect()).unwrap()
    }

    #[test]
    fn cross_ratio_example() {
        let w = cross_ratio([c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 2.0)]).unwrap();
        assert!((w - c(0.6, 0.2)).norm() < 1e-14);
        assert!(cross_ratio([c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn cross_ratio_is_mobius_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let g = random_psl(&mut rng);
            let u = [rc(&mut rng), rc(&mut rng), rc(&mut rng), rc(&mut rng)];
            let w = cross_ratio(u).unwrap();
            let v = u.map(|z| g.act(Some(z)).unwrap());
            let w2 = cross_ratio(v).unwrap();
            assert!((w - w2).norm() <= 1e-10 * w.norm().max(1.0), "{w} vs {w2}");
        }
    }

    #[test]
    fn canonical_flattening_is_a_flattening() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let u = [c(0.0, 0.0), rc(&mut rng), rc(&mut rng), rc(&mut rng)];
            let l = canonical_flattening(u).unwrap();
            assert!((l[0] + l[1] + l[2]).norm() < 1e-10);
            let w = ModuliTriple::from_w0(cross_ratio(u).unwrap()).unwrap();
            for j in 0..3 {
                assert!(((2.0 * l[j]).exp() - w.w[j] * w.w[j]).norm() < 1e-9 * w.w[j].norm_sqr().max(1.0));
            }
            flattening_of(&w, &l).unwrap();
        }
    }

    #[test]
    fn canonical_flattening_under_rotation() {
        // an even vertex permutation keeps exp(2 l_j) up to the induced relabeling of edges
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let u = [c(0.0, 0.0), rc(&mut rng), rc(&mut rng), rc(&mut rng)];
            let v = [u[1], u[2], u[0], u[3]];
            let (l, lv) = (canonical_flattening(u).unwrap(), canonical_flattening(v).unwrap());
            // (1,2,0,3): edge [01] of v is [12] of u, [12] is [02], [02] is [01]
            for (j, jv) in [(1, 0), (2, 1), (0, 2)] {
                assert!(((2.0 * l[j]).exp() - (2.0 * lv[jv]).exp()).norm() < 1e-8 * (2.0 * l[j]).exp().norm().max(1.0));
            }
        }
    }

    #[test]
    fn p_and_l_move_standard_points() {
        let (zero, one, inf) = (Some(c(0.0, 0.0)), Some(c(1.0, 0.0)), None);
        let p = p_matrix();
        assert_eq!((p.act(zero), p.act(one), p.act(inf)), (inf, one, zero));
        let l = l_matrix();
        assert_eq!((l.act(zero), l.act(one), l.act(inf)), (inf, zero, one));
        assert!((l_matrix() * r_matrix()).eq_up_to_sign(&Psl2::identity(), 1e-15));
        let w = c(0.3, -1.2);
        assert!((gamma_matrix(w).act(one).unwrap() - w).norm() < 1e-14);
    }

    #[test]
    fn doubled_tet_idealizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = doubled_mesh();
        let g: Vec<Psl2> = (0..4).map(|_| random_psl(&mut rng)).collect();
        let z = Cocycle::from_vertex_elements(&[[g[0], g[1], g[2], g[3]], [g[0], g[1], g[2], g[3]]]);
        let (dec, flat) = idealize_mesh(&m, &z).unwrap();
        assert!(dec.validate_i(1e-10).unwrap().ok());
        assert!(flat.ok(), "{flat:?}");
        // conjugation by an element fixing the base point leaves the moduli unchanged
        let h = Psl2::lower(c(0.8, 0.3), c(-0.4, 1.1)).unwrap();
        let (dec2, _) = idealize_mesh(&m, &z.conjugated(&h)).unwrap();
        for (a, b) in dec.moduli.unwrap().iter().zip(dec2.moduli.unwrap()) {
            assert!((a.w0() - b.w0()).norm() < 1e-9);
        }
    }

    #[test]
    fn three_side_central_edge_total_is_odd() {
        // the displayed constants do not telescope around the central edge of a 2-3 fragment
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let verts = crate::moves::THREE_SIDE;
        let labeled: Vec<([usize; 4], Sign)> = verts.iter().map(|&v| (v, Sign::Pos)).collect();
        let m = Mesh::from_labeled(&labeled).unwrap();
        let e0 = m.edge_class_of(0, 0, 2).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..200 {
            let g: Vec<Psl2> = (0..5).map(|_| random_psl(&mut rng)).collect();
            let z = Cocycle::from_labels(&verts, &g);
            let (dec, _) = idealize_mesh(&m, &z).unwrap();
            assert!((dec.edge_total_modulus(e0).unwrap() - c(1.0, 0.0)).norm() < 1e-9);
            let l = dec.edge_total_log_branch(e0).unwrap();
            let k = l.im / PI;
            assert!(l.re.abs() < 1e-9 && (k - k.round()).abs() < 1e-9, "{l}");
            assert!((k.round() as i64) % 2 != 0, "{l}");
            seen.insert(k.round() as i64);
        }
        assert!(seen.len() > 1);
    }

    #[test]
    fn trivial_cocycle_is_rejected() {
        let m = doubled_mesh();
        match idealize_mesh(&m, &Cocycle::trivial(2)) {
            Err(QhgError::NotIdealizable { tet, .. }) => assert_eq!(tet, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn surface_mesh_checks() {
        let s = SurfaceMesh::punctured_torus();
        assert_eq!(s.gluings.len(), 3);
        let bad = SurfaceMesh::new(s.signs.clone(), s.gluings.clone(), 0, 1);
        assert!(bad.is_err());
        let twisted = SurfaceMesh::new(vec![Sign::Pos, Sign::Pos], s.gluings.clone(), 1, 1);
        assert!(twisted.is_err());
    }

    fn random_torus(rng: &mut ChaCha8Rng) -> (Psl2, Psl2, SurfaceCocycle) {
        let (a, b) = (random_psl(rng), random_psl(rng));
        let base = torus_base(&a, &b, rc(rng)).unwrap();
        (a, b, SurfaceCocycle::punctured_torus(a, b, base).unwrap())
    }

    #[test]
    fn parameter_product_is_commutator_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = SurfaceMesh::punctured_torus();
        for _ in 0..20 {
            let (a, b, z) = random_torus(&mut rng);
            z.validate(&s, 1e-8).unwrap();
            let prod: CNum = w_minus_all(&s, &z).unwrap().iter().product();
            let k = a.inv() * b.inv() * a * b;
            // eigenvalues μ, 1/μ of the commutator (an SL lift, independent of signs)
            let disc = (k.trace() * k.trace() - 4.0).sqrt();
            let (m1, m2) = ((k.trace() + disc) / 2.0, (k.trace() - disc) / 2.0);
            assert!((prod - m1).norm().min((prod - m2).norm()) < 1e-8 * prod.norm().max(1.0), "{prod} vs {m1}, {m2}");
        }
    }

    #[test]
    fn diagonal_cocycle_product_is_one() {
        let s = SurfaceMesh::punctured_torus();
        let a = gamma_matrix(c(1.3, 0.4));
        let b = gamma_matrix(c(0.5, -0.9));
        let z = SurfaceCocycle::punctured_torus(a, b, Psl2::translation(c(0.7, 0.2))).unwrap();
        let prod: CNum = w_minus_all(&s, &z).unwrap().iter().product();
        assert!((prod - c(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn parameters_are_gauge_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = SurfaceMesh::punctured_torus();
        let (_, _, z) = random_torus(&mut rng);
        let lam: Vec<[Psl2; 3]> = (0..2).map(|_| [0, 1, 2].map(|_| Psl2::lower(rc(&mut rng) + c(1.5, 0.0), rc(&mut rng)).unwrap())).collect();
        let zg = z.gauged(&lam);
        for (x, y) in w_minus_all(&s, &z).unwrap().iter().zip(w_minus_all(&s, &zg).unwrap()) {
            assert!((x - y).norm() < 1e-9 * x.norm().max(1.0));
        }
    }

    #[test]
    fn fuchsian_parameters_are_real() {
        let r = |x: f64| c(x, 0.0);
        // the commutator of the modular torus fixes ∞; conjugate by a real element
        let g = Psl2::new(r(2.0), r(1.0), r(1.0), r(1.0)).unwrap();
        let a = g * Psl2::new(r(1.0), r(1.0), r(1.0), r(2.0)).unwrap() * g.inv();
        let b = g * Psl2::new(r(1.0), r(-1.0), r(-1.0), r(2.0)).unwrap() * g.inv();
        let k = a.inv() * b.inv() * a * b;
        assert!((k.trace() - r(-2.0)).norm() < 1e-12);
        let s = SurfaceMesh::punctured_torus();
        let z = SurfaceCocycle::punctured_torus(a, b, torus_base(&a, &b, r(0.0)).unwrap()).unwrap();
        let w = w_minus_all(&s, &z).unwrap();
        for x in &w {
            assert!(x.im.abs() < 1e-10 && x.re < 0.0, "{x}");
        }
        let prod: CNum = w.iter().product();
        assert!((prod - r(-1.0)).norm() < 1e-10);
    }

    #[test]
    fn holonomy_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = SurfaceMesh::punctured_torus();
        for _ in 0..100 {
            let (a, b, z) = random_torus(&mut rng);
            let params = w_minus_all(&s, &z).unwrap();
            let [h1, h2] = torus_holonomy(&params).unwrap();
            let want = torus_invariants(&a, &b);
            let got = torus_invariants(&h1, &h2);
            for i in 0..3 {
                assert!((want[i] - got[i]).norm() < 1e-8 * want[i].norm().max(1.0), "{i}: {} vs {}", want[i], got[i]);
            }
        }
    }

    #[test]
    fn malformed_paths_are_rejected() {
        let s = SurfaceMesh::punctured_torus();
        let p = [c(-1.0, 0.5); 3];
        assert!(holonomy_from_parameters(&s, &p, &TransversePath { start: 0, crossings: vec![1, 1] }).is_err());
        assert!(holonomy_from_parameters(&s, &p, &TransversePath { start: 0, crossings: vec![1] }).is_err());
        assert!(holonomy_from_parameters(&s, &p, &TransversePath { start: 0, crossings: vec![] }).is_err());
    }
}
