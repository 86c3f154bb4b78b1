//! Branched triangulations: face pairings, edge and vertex classes, totals, normal paths.
//!
//! A gluing identifies face `face_a` of tetrahedron `tet_a` with face `face_b` of
//! `tet_b`. `perm[k]` is the vertex of `tet_b` matched with the k-th smallest vertex of
//! `face_a`. Gluings must preserve the vertex order (branchings match) and reverse the
//! ambient orientation.

use crate::error::{QhgError, Result};
use crate::specialfn::plog;
use crate::tetra::{edge_index, FlatChargedTet, ModuliTriple, Sign, EDGE_PAIRS};
use crate::CNum;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gluing {
    pub tet_a: usize,
    pub face_a: usize,
    pub tet_b: usize,
    pub face_b: usize,
    pub perm: [usize; 3],
}

pub fn face_vertices(face: usize) -> [usize; 3] {
    let mut out = [0; 3];
    let mut k = 0;
    for v in 0..4 {
        if v != face {
            out[k] = v;
            k += 1;
        }
    }
    out
}

impl Gluing {
    /// Order-preserving gluing between two faces.
    pub fn ordered(tet_a: usize, face_a: usize, tet_b: usize, face_b: usize) -> Gluing {
        Gluing { tet_a, face_a, tet_b, face_b, perm: face_vertices(face_b) }
    }

    /// Vertex map of tet_a into tet_b (face_a ↦ face_b on the opposite vertex).
    pub fn vertex_map(&self) -> [usize; 4] {
        let mut m = [0; 4];
        for (k, v) in face_vertices(self.face_a).iter().enumerate() {
            m[*v] = self.perm[k];
        }
        m[self.face_a] = self.face_b;
        m
    }

    pub fn reversed(&self) -> Gluing {
        let m = self.vertex_map();
        let mut inv = [0; 4];
        for v in 0..4 {
            inv[m[v]] = v;
        }
        let fb = face_vertices(self.face_b);
        Gluing {
            tet_a: self.tet_b,
            face_a: self.face_b,
            tet_b: self.tet_a,
            face_b: self.face_a,
            perm: [inv[fb[0]], inv[fb[1]], inv[fb[2]]],
        }
    }
}

/// A face of the mesh, seen from one tetrahedron: `(tet, face)`.
pub type FaceRef = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeClass {
    /// (tet, a, b) with a < b; sorted, so `members[0]` is the canonical representative.
    pub members: Vec<(usize, usize, usize)>,
    pub boundary: bool,
}

impl EdgeClass {
    pub fn rep(&self) -> (usize, usize, usize) {
        self.members[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexKind {
    /// closed link, sphere
    Manifold,
    /// closed link, torus
    Toroidal,
    /// link with boundary; χ = 1 is a disk
    Boundary { chi: i64 },
    /// any other closed link
    Other { chi: i64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexClass {
    pub members: Vec<(usize, usize)>,
    pub kind: VertexKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub signs: Vec<Sign>,
    pub gluings: Vec<Gluing>,
    pub moduli: Option<Vec<ModuliTriple>>,
    pub flattening: Option<Vec<[i64; 3]>>,
    pub charge: Option<Vec<[i64; 3]>>,
    /// Edge classes marked Hamiltonian.
    pub ham: BTreeSet<usize>,
    partner: Vec<[Option<Gluing>; 4]>,
    edges: Vec<EdgeClass>,
    edge_of: Vec<[usize; 6]>,
    vertices: Vec<VertexClass>,
    vertex_of: Vec<[usize; 4]>,
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

fn pair_slot(a: usize, b: usize) -> usize {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    EDGE_PAIRS.iter().position(|&p| p == (lo, hi)).unwrap()
}

fn perm_sign(p: [usize; 4]) -> i64 {
    let mut s = 1;
    for i in 0..4 {
        for j in i + 1..4 {
            if p[i] > p[j] {
                s = -s;
            }
        }
    }
    s
}

impl Mesh {
    /// Builds the combinatorial mesh and derives edge and vertex classes.
    pub fn new(signs: Vec<Sign>, gluings: Vec<Gluing>) -> Result<Mesh> {
        let nt = signs.len();
        let mut partner: Vec<[Option<Gluing>; 4]> = vec![[None; 4]; nt];
        for g in &gluings {
            if g.tet_a >= nt || g.tet_b >= nt || g.face_a > 3 || g.face_b > 3 {
                return Err(QhgError::InvalidMesh(format!("gluing out of range: {g:?}")));
            }
            if (g.tet_a, g.face_a) == (g.tet_b, g.face_b) {
                return Err(QhgError::InvalidMesh(format!("face glued to itself: {g:?}")));
            }
            let target = face_vertices(g.face_b);
            let mut seen = g.perm;
            seen.sort_unstable();
            if seen != target {
                return Err(QhgError::InvalidMesh(format!("gluing is not a bijection of faces: {g:?}")));
            }
            if !(g.perm[0] < g.perm[1] && g.perm[1] < g.perm[2]) {
                return Err(QhgError::InvalidMesh(format!("branchings do not match: {g:?}")));
            }
            let pa = signs[g.tet_a].as_i64() * if g.face_a % 2 == 0 { 1 } else { -1 };
            let pb = signs[g.tet_b].as_i64() * if g.face_b % 2 == 0 { 1 } else { -1 };
            if pa != -pb {
                return Err(QhgError::InvalidMesh(format!("gluing preserves orientation: {g:?}")));
            }
            for (t, f, gl) in [(g.tet_a, g.face_a, *g), (g.tet_b, g.face_b, g.reversed())] {
                if partner[t][f].is_some() {
                    return Err(QhgError::InvalidMesh(format!("face ({t},{f}) glued twice")));
                }
                partner[t][f] = Some(gl);
            }
        }

        // edge classes
        let mut dsu = Dsu::new(6 * nt);
        for g in &gluings {
            let m = g.vertex_map();
            let fv = face_vertices(g.face_a);
            for (x, y) in [(fv[0], fv[1]), (fv[0], fv[2]), (fv[1], fv[2])] {
                dsu.union(6 * g.tet_a + pair_slot(x, y), 6 * g.tet_b + pair_slot(m[x], m[y]));
            }
        }
        let mut groups: BTreeMap<usize, Vec<(usize, usize, usize)>> = BTreeMap::new();
        for t in 0..nt {
            for (s, &(a, b)) in EDGE_PAIRS.iter().enumerate() {
                groups.entry(dsu.find(6 * t + s)).or_default().push((t, a, b));
            }
        }
        let mut edges: Vec<EdgeClass> = groups
            .into_values()
            .map(|mut members| {
                members.sort_unstable();
                let boundary = members.iter().any(|&(t, a, b)| {
                    (0..4).filter(|&f| f != a && f != b).any(|f| partner[t][f].is_none())
                });
                EdgeClass { members, boundary }
            })
            .collect();
        edges.sort_by_key(|e| e.rep());
        let mut edge_of = vec![[0usize; 6]; nt];
        for (id, e) in edges.iter().enumerate() {
            for &(t, a, b) in &e.members {
                edge_of[t][pair_slot(a, b)] = id;
            }
        }

        // vertex classes and link Euler characteristics
        let mut vd = Dsu::new(4 * nt);
        let mut ends = Dsu::new(16 * nt);
        for g in &gluings {
            let m = g.vertex_map();
            for &v in &face_vertices(g.face_a) {
                vd.union(4 * g.tet_a + v, 4 * g.tet_b + m[v]);
                for &u in &face_vertices(g.face_a) {
                    if u != v {
                        ends.union(16 * g.tet_a + 4 * v + u, 16 * g.tet_b + 4 * m[v] + m[u]);
                    }
                }
            }
        }
        let mut vgroups: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for t in 0..nt {
            for v in 0..4 {
                vgroups.entry(vd.find(4 * t + v)).or_default().push((t, v));
            }
        }
        let mut vertices = Vec::new();
        let mut vertex_of = vec![[0usize; 4]; nt];
        for members in vgroups.into_values() {
            let faces = members.len() as i64;
            let mut end_roots = BTreeSet::new();
            let mut half_edges = 0i64;
            let mut glued_half = 0i64;
            for &(t, v) in &members {
                for u in (0..4).filter(|&u| u != v) {
                    end_roots.insert(ends.find(16 * t + 4 * v + u));
                }
                for f in (0..4).filter(|&f| f != v) {
                    half_edges += 1;
                    if partner[t][f].is_some() {
                        glued_half += 1;
                    }
                }
            }
            let link_edges = half_edges - glued_half / 2;
            let chi = end_roots.len() as i64 - link_edges + faces;
            let kind = if glued_half < half_edges {
                VertexKind::Boundary { chi }
            } else if chi == 2 {
                VertexKind::Manifold
            } else if chi == 0 {
                VertexKind::Toroidal
            } else {
                VertexKind::Other { chi }
            };
            let id = vertices.len();
            for &(t, v) in &members {
                vertex_of[t][v] = id;
            }
            vertices.push(VertexClass { members, kind });
        }

        Ok(Mesh {
            signs,
            gluings,
            moduli: None,
            flattening: None,
            charge: None,
            ham: BTreeSet::new(),
            partner,
            edges,
            edge_of,
            vertices,
            vertex_of,
        })
    }

    /// Glues tetrahedra given by sorted global vertex labels along equal vertex triples.
    pub fn from_labeled(tets: &[([usize; 4], Sign)]) -> Result<Mesh> {
        let mut by_face: BTreeMap<[usize; 3], Vec<(usize, usize)>> = BTreeMap::new();
        for (t, (verts, _)) in tets.iter().enumerate() {
            if !(verts[0] < verts[1] && verts[1] < verts[2] && verts[2] < verts[3]) {
                return Err(QhgError::InvalidMesh(format!("labels of tet {t} not increasing")));
            }
            for f in 0..4 {
                let fv = face_vertices(f).map(|v| verts[v]);
                by_face.entry(fv).or_default().push((t, f));
            }
        }
        let mut gluings = Vec::new();
        for (key, occ) in by_face {
            match occ.len() {
                1 => {}
                2 => gluings.push(Gluing::ordered(occ[0].0, occ[0].1, occ[1].0, occ[1].1)),
                _ => return Err(QhgError::InvalidMesh(format!("face {key:?} shared by {} tets", occ.len()))),
            }
        }
        Mesh::new(tets.iter().map(|t| t.1).collect(), gluings)
    }

    pub fn n_tets(&self) -> usize {
        self.signs.len()
    }

    pub fn with_moduli(mut self, moduli: Vec<ModuliTriple>) -> Result<Mesh> {
        if moduli.len() != self.n_tets() {
            return Err(QhgError::InvalidMesh("moduli count differs from tet count".into()));
        }
        self.moduli = Some(moduli);
        Ok(self)
    }

    pub fn with_flattening(mut self, f: Vec<[i64; 3]>) -> Result<Mesh> {
        if f.len() != self.n_tets() {
            return Err(QhgError::InvalidMesh("flattening count differs from tet count".into()));
        }
        self.flattening = Some(f);
        Ok(self)
    }

    pub fn with_charge(mut self, c: Vec<[i64; 3]>) -> Result<Mesh> {
        if c.len() != self.n_tets() {
            return Err(QhgError::InvalidMesh("charge count differs from tet count".into()));
        }
        self.charge = Some(c);
        Ok(self)
    }

    /// Marks the edge classes containing the given (tet, a, b) edges as Hamiltonian.
    pub fn with_hamiltonian(mut self, reps: &[(usize, usize, usize)]) -> Result<Mesh> {
        for &(t, a, b) in reps {
            self.ham.insert(self.edge_class_of(t, a, b)?);
        }
        Ok(self)
    }

    pub fn edges(&self) -> &[EdgeClass] {
        &self.edges
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| !self.edges[e].boundary)
    }

    pub fn edge_class_of(&self, t: usize, a: usize, b: usize) -> Result<usize> {
        if t >= self.n_tets() || a > 3 || b > 3 || a == b {
            return Err(QhgError::InvalidMesh(format!("no edge ({t},{a},{b})")));
        }
        Ok(self.edge_of[t][pair_slot(a, b)])
    }

    pub fn vertices(&self) -> &[VertexClass] {
        &self.vertices
    }

    pub fn vertex_class_of(&self, t: usize, v: usize) -> usize {
        self.vertex_of[t][v]
    }

    pub fn classify_vertices(&self) -> Vec<VertexKind> {
        self.vertices.iter().map(|v| v.kind).collect()
    }

    /// The gluing leaving (t, f), seen from t.
    pub fn partner(&self, t: usize, f: usize) -> Option<Gluing> {
        self.partner[t][f]
    }

    /// Unglued faces, sorted.
    pub fn boundary_faces(&self) -> Vec<FaceRef> {
        let mut out = Vec::new();
        for t in 0..self.n_tets() {
            for f in 0..4 {
                if self.partner[t][f].is_none() {
                    out.push((t, f));
                }
            }
        }
        out
    }

    /// Face classes: each glued pair once (smaller side first) plus the boundary faces.
    pub fn face_classes(&self) -> Vec<Vec<FaceRef>> {
        let mut out = Vec::new();
        for t in 0..self.n_tets() {
            for f in 0..4 {
                match self.partner[t][f] {
                    None => out.push(vec![(t, f)]),
                    Some(g) if (t, f) < (g.tet_b, g.face_b) => out.push(vec![(t, f), (g.tet_b, g.face_b)]),
                    Some(_) => {}
                }
            }
        }
        out
    }

    fn moduli_ref(&self) -> Result<&Vec<ModuliTriple>> {
        self.moduli.as_ref().ok_or_else(|| QhgError::Undecorated("moduli".into()))
    }

    fn flattening_ref(&self) -> Result<&Vec<[i64; 3]>> {
        self.flattening.as_ref().ok_or_else(|| QhgError::Undecorated("flattening".into()))
    }

    fn charge_ref(&self) -> Result<&Vec<[i64; 3]>> {
        self.charge.as_ref().ok_or_else(|| QhgError::Undecorated("charge".into()))
    }

    /// The decorated tetrahedron t (requires moduli, flattening and charge).
    pub fn tet(&self, t: usize) -> Result<FlatChargedTet> {
        let m = self.moduli_ref()?[t];
        let f = self.flattening_ref()?[t];
        let c = self.charge_ref()?[t];
        FlatChargedTet::new(self.signs[t], m, f, c)
    }

    fn log_branch(&self, t: usize) -> Result<[CNum; 3]> {
        let logs = self.moduli_ref()?[t].logs();
        let f = self.flattening_ref()?[t];
        Ok([0, 1, 2].map(|j| logs[j] + CNum::new(0.0, PI * f[j] as f64)))
    }

    /// W(e) = ∏ w(h)^{*_b}.
    pub fn edge_total_modulus(&self, e: usize) -> Result<CNum> {
        let moduli = self.moduli_ref()?;
        let mut acc = CNum::new(1.0, 0.0);
        for &(t, a, b) in &self.edges[e].members {
            let w = moduli[t].w[edge_index(a, b)];
            acc *= match self.signs[t] {
                Sign::Pos => w,
                Sign::Neg => CNum::new(1.0, 0.0) / w,
            };
        }
        Ok(acc)
    }

    /// L(e) = Σ *_b l(h).
    pub fn edge_total_log_branch(&self, e: usize) -> Result<CNum> {
        let mut acc = CNum::new(0.0, 0.0);
        for &(t, a, b) in &self.edges[e].members {
            acc += self.log_branch(t)?[edge_index(a, b)] * self.signs[t].as_f64();
        }
        Ok(acc)
    }

    /// C(e) = Σ c(h).
    pub fn edge_total_charge(&self, e: usize) -> Result<i64> {
        let c = self.charge_ref()?;
        Ok(self.edges[e].members.iter().map(|&(t, a, b)| c[t][edge_index(a, b)]).sum())
    }

    /// Residuals |W(e) − 1| at interior edges.
    pub fn validate_i(&self, tol: f64) -> Result<Report> {
        let mut r = Report::new("I-triangulation", tol);
        for e in self.interior_edges() {
            let res = (self.edge_total_modulus(e)? - CNum::new(1.0, 0.0)).norm();
            r.check(Location::Edge(e), res);
        }
        Ok(r)
    }

    /// Per-tet |Σ l_j| and per-interior-edge |L(e)|.
    pub fn validate_flattened(&self, tol: f64) -> Result<Report> {
        let mut r = Report::new("flattened", tol);
        for t in 0..self.n_tets() {
            let s: CNum = self.log_branch(t)?.iter().sum();
            r.check(Location::Tet(t), s.norm());
        }
        for e in self.interior_edges() {
            r.check(Location::Edge(e), self.edge_total_log_branch(e)?.norm());
        }
        Ok(r)
    }

    /// Per-tet charge sum 1; C(e) = 0 on Hamiltonian edges and 2 on other interior edges.
    pub fn validate_charged(&self) -> Result<Report> {
        let c = self.charge_ref()?;
        let mut r = Report::new("charged", 0.5);
        for (t, ct) in c.iter().enumerate() {
            r.check(Location::Tet(t), (ct.iter().sum::<i64>() - 1).abs() as f64);
        }
        for e in self.interior_edges() {
            let target = if self.ham.contains(&e) { 0 } else { 2 };
            r.check(Location::Edge(e), (self.edge_total_charge(e)? - target).abs() as f64);
        }
        Ok(r)
    }

    /// Checks that `p` is a closed normal path in this mesh.
    pub fn check_path(&self, p: &NormalPath) -> Result<()> {
        let n = p.steps.len();
        if n == 0 {
            return Err(QhgError::InvalidPath("empty path".into()));
        }
        for (i, s) in p.steps.iter().enumerate() {
            if s.tet >= self.n_tets() || s.vertex > 3 || s.enter > 3 || s.exit > 3 {
                return Err(QhgError::InvalidPath(format!("step {i} out of range")));
            }
            if s.enter == s.exit || s.vertex == s.enter || s.vertex == s.exit {
                return Err(QhgError::InvalidPath(format!("step {i} enters and exits the same face or leaves its vertex")));
            }
            let g = self.partner[s.tet][s.exit]
                .ok_or_else(|| QhgError::InvalidPath(format!("step {i} exits through a boundary face")))?;
            let next = &p.steps[(i + 1) % n];
            if (g.tet_b, g.face_b) != (next.tet, next.enter) || g.vertex_map()[s.vertex] != next.vertex {
                return Err(QhgError::InvalidPath(format!("step {i} does not connect to step {}", (i + 1) % n)));
            }
        }
        Ok(())
    }

    /// Signed coefficient of each (tet, edge index) along a path, with sign rule `sign`.
    fn path_coefficients(&self, p: &NormalPath, ambient: bool) -> Result<Vec<[i64; 3]>> {
        self.check_path(p)?;
        let mut coef = vec![[0i64; 3]; self.n_tets()];
        for s in &p.steps {
            let other = (0..4).find(|&x| x != s.vertex && x != s.enter && x != s.exit).unwrap();
            // turning sign in branching labels; *_b times the ambient direction
            let mut sign = perm_sign([s.vertex, s.enter, s.exit, other]);
            if ambient {
                sign *= self.signs[s.tet].as_i64();
            }
            coef[s.tet][edge_index(s.vertex, other)] += sign;
        }
        Ok(coef)
    }

    /// Coefficients c with γ(f)(p) = Σ c·l, as used by the flattening solver.
    pub fn flattening_path_coefficients(&self, p: &NormalPath) -> Result<Vec<[i64; 3]>> {
        self.path_coefficients(p, false)
    }

    pub fn path_weight(&self, p: &NormalPath, kind: PathKind) -> Result<PathWeight> {
        match kind {
            PathKind::Flattening => {
                let coef = self.path_coefficients(p, false)?;
                let mut acc = CNum::new(0.0, 0.0);
                for (t, c) in coef.iter().enumerate() {
                    if c.iter().any(|&x| x != 0) {
                        let l = self.log_branch(t)?;
                        for j in 0..3 {
                            acc += l[j] * c[j] as f64;
                        }
                    }
                }
                Ok(PathWeight::Complex(acc))
            }
            PathKind::LogDerivative => {
                let coef = self.path_coefficients(p, false)?;
                let moduli = self.moduli_ref()?;
                let mut acc = CNum::new(0.0, 0.0);
                for (t, c) in coef.iter().enumerate() {
                    let l0 = plog(moduli[t].w[0]);
                    let l1 = plog(moduli[t].w[1]);
                    let l = [l0, l1, -l0 - l1];
                    for j in 0..3 {
                        acc += l[j] * c[j] as f64;
                    }
                }
                Ok(PathWeight::Complex(acc))
            }
            PathKind::Charge => {
                let coef = self.path_coefficients(p, true)?;
                let c = self.charge_ref()?;
                Ok(PathWeight::Integer(
                    coef.iter().zip(c).map(|(k, ct)| (0..3).map(|j| k[j] * ct[j]).sum::<i64>()).sum(),
                ))
            }
            PathKind::FlatteningParity => {
                self.check_path(p)?;
                let f = self.flattening_ref()?;
                let mut s = 0i64;
                for st in &p.steps {
                    let other = (0..4).find(|&x| x != st.vertex && x != st.enter && x != st.exit).unwrap();
                    s += f[st.tet][edge_index(st.vertex, other)];
                }
                Ok(PathWeight::Integer(s.rem_euclid(2)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalStep {
    pub tet: usize,
    /// the vertex whose link the path runs in
    pub vertex: usize,
    pub enter: usize,
    pub exit: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalPath {
    pub steps: Vec<NormalStep>,
}

impl NormalPath {
    pub fn from_tuples(steps: &[(usize, usize, usize, usize)]) -> NormalPath {
        NormalPath {
            steps: steps.iter().map(|&(tet, vertex, enter, exit)| NormalStep { tet, vertex, enter, exit }).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Flattening,
    LogDerivative,
    Charge,
    /// mod-2 sum of flattenings along the path
    FlatteningParity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathWeight {
    Complex(CNum),
    Integer(i64),
}

impl PathWeight {
    pub fn complex(self) -> CNum {
        match self {
            PathWeight::Complex(z) => z,
            PathWeight::Integer(k) => CNum::new(k as f64, 0.0),
        }
    }

    pub fn integer(self) -> Option<i64> {
        match self {
            PathWeight::Integer(k) => Some(k),
            PathWeight::Complex(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Location {
    Tet(usize),
    Edge(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub at: Location,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: String,
    pub tol: f64,
    pub checked: usize,
    pub max_residual: f64,
    pub violations: Vec<Violation>,
}

impl Report {
    fn new(kind: &str, tol: f64) -> Self {
        Report { kind: kind.into(), tol, checked: 0, max_residual: 0.0, violations: Vec::new() }
    }

    fn check(&mut self, at: Location, residual: f64) {
        self.checked += 1;
        self.max_residual = self.max_residual.max(residual);
        if !(residual <= self.tol) {
            self.violations.push(Violation { at, residual });
        }
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}
