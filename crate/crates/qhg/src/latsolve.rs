//! Integer solver for global flattenings and charges.
//!
//! Both problems are linear systems A·x = b over ℤ in the 3T per-tet unknowns: one row
//! per tetrahedron (sum condition), one per interior edge (total), and one per path
//! constraint (weight). They are solved by column Hermite elimination: A·U = H with U
//! unimodular and H lower echelon, forward substitution on H, then x = U·y. Unused
//! columns of U span the integer kernel.

use crate::error::{QhgError, Result};
use crate::mesh::{Mesh, NormalPath};
use crate::specialfn::plog;
use crate::tetra::edge_index;
use crate::CNum;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::f64::consts::PI;

/// Per-tet integer triples (flattening or charge).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntAssignment {
    pub values: Vec<[i64; 3]>,
}

impl IntAssignment {
    pub fn flat(&self) -> Vec<i64> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn from_flat(v: &[i64]) -> IntAssignment {
        IntAssignment { values: v.chunks(3).map(|c| [c[0], c[1], c[2]]).collect() }
    }

    pub fn max_norm(&self) -> i64 {
        self.values.iter().flatten().map(|x| x.abs()).max().unwrap_or(0)
    }

    pub fn shifted(&self, g: &LatticeGen, times: i64) -> IntAssignment {
        IntAssignment {
            values: self
                .values
                .iter()
                .zip(&g.delta)
                .map(|(v, d)| [v[0] + times * d[0], v[1] + times * d[1], v[2] + times * d[2]])
                .collect(),
        }
    }
}

/// A direction in which flat/charges can move without changing any sum or total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeGen {
    /// the edge whose star carries the generator, if it is an edge generator
    pub edge: Option<usize>,
    pub delta: Vec<[i64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    Tet(usize),
    Edge(usize),
    Path(usize),
}

/// Why a system has no integer solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Certificate {
    /// the right-hand side of a constraint is not an integer (e.g. W(e) ≠ 1)
    NonIntegralTarget { at: Constraint, value: CNum },
    /// integer multipliers y with y·A = 0 and y·b ≠ 0
    Rational { combination: Vec<(Constraint, i64)>, value: i64 },
    /// consistent over ℚ, but the pivot of this row does not divide its residual
    Integral { at: Constraint, modulus: i64, residual: i64 },
}

pub type Solve = std::result::Result<IntAssignment, Certificate>;

/// A linear system over ℤ with labeled rows.
#[derive(Debug, Clone, PartialEq)]
pub struct IntSystem {
    pub n: usize,
    pub rows: Vec<Vec<i64>>,
    pub rhs: Vec<i64>,
    pub labels: Vec<Constraint>,
}

fn overflow() -> QhgError {
    QhgError::Domain("integer overflow in lattice reduction".into())
}

fn egcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        if a < 0 {
            (-a, -1, 0)
        } else {
            (a, 1, 0)
        }
    } else {
        let (g, s, t) = egcd(b, a.rem_euclid(b));
        (g, t, s - a.div_euclid(b) * t)
    }
}

struct Echelon {
    h: Vec<Vec<i128>>,
    u: Vec<Vec<i128>>,
    /// pivot column of each row, if any
    pivot: Vec<Option<usize>>,
    rank: usize,
}

fn col_combine(mat: &mut [Vec<i128>], k: usize, c: usize, m: [[i128; 2]; 2]) -> Result<()> {
    for row in mat.iter_mut() {
        let (a, b) = (row[k], row[c]);
        let nk = m[0][0].checked_mul(a).and_then(|x| m[0][1].checked_mul(b).and_then(|y| x.checked_add(y)));
        let nc = m[1][0].checked_mul(a).and_then(|x| m[1][1].checked_mul(b).and_then(|y| x.checked_add(y)));
        row[k] = nk.ok_or_else(overflow)?;
        row[c] = nc.ok_or_else(overflow)?;
    }
    Ok(())
}

fn echelon(rows: &[Vec<i64>], n: usize) -> Result<Echelon> {
    let mut h: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut u: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| (i == j) as i128).collect()).collect();
    let mut pivot = vec![None; rows.len()];
    let mut k = 0;
    for r in 0..rows.len() {
        if k == n {
            break;
        }
        for c in k + 1..n {
            if h[r][c] == 0 {
                continue;
            }
            let (a, b) = (h[r][k], h[r][c]);
            let (g, s, t) = egcd(a, b);
            let m = [[s, t], [-b / g, a / g]];
            col_combine(&mut h, k, c, m)?;
            col_combine(&mut u, k, c, m)?;
        }
        if h[r][k] != 0 {
            if h[r][k] < 0 {
                for row in h.iter_mut().chain(u.iter_mut()) {
                    row[k] = -row[k];
                }
            }
            pivot[r] = Some(k);
            k += 1;
        }
    }
    Ok(Echelon { h, u, pivot, rank: k })
}

fn dot(a: &[i64], b: &[i64]) -> i128 {
    a.iter().zip(b).map(|(&x, &y)| x as i128 * y as i128).sum()
}

fn to_i64(v: i128) -> Result<i64> {
    i64::try_from(v).map_err(|_| overflow())
}

/// Integer kernel basis of the map x ↦ A·x.
pub fn integer_kernel(rows: &[Vec<i64>], n: usize) -> Result<Vec<Vec<i64>>> {
    let e = echelon(rows, n)?;
    let mut basis = Vec::new();
    for c in e.rank..n {
        basis.push((0..n).map(|i| to_i64(e.u[i][c])).collect::<Result<Vec<_>>>()?);
    }
    size_reduce_basis(&mut basis);
    Ok(basis)
}

fn norm2(v: &[i64]) -> i128 {
    dot(v, v)
}

/// Pairwise size reduction; keeps the span, shrinks entries.
fn size_reduce_basis(basis: &mut [Vec<i64>]) {
    for _ in 0..50 {
        let mut changed = false;
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                if i == j {
                    continue;
                }
                let gg = norm2(&basis[j]);
                if gg == 0 {
                    continue;
                }
                let t = ((dot(&basis[i], &basis[j]) as f64) / gg as f64).round() as i64;
                if t != 0 {
                    let cand: Vec<i64> = basis[i].iter().zip(&basis[j]).map(|(a, b)| a - t * b).collect();
                    if norm2(&cand) < norm2(&basis[i]) {
                        basis[i] = cand;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
}

fn reduce_key(v: &[i64]) -> (i64, i64, i128) {
    (v.iter().map(|x| x.abs()).max().unwrap_or(0), v.iter().map(|x| x.abs()).sum(), norm2(v))
}

/// Greedily shortens x by integer multiples of the generators (max-norm first).
pub fn reduce_by(x: &mut Vec<i64>, gens: &[Vec<i64>]) {
    for _ in 0..200 {
        let mut changed = false;
        for g in gens {
            let gg = norm2(g);
            if gg == 0 {
                continue;
            }
            let t = -((dot(x, g) as f64) / gg as f64).round() as i64;
            if t != 0 {
                let cand: Vec<i64> = x.iter().zip(g).map(|(a, b)| a + t * b).collect();
                if norm2(&cand) < norm2(x) {
                    *x = cand;
                    changed = true;
                }
            }
            for t in [1i64, -1] {
                let cand: Vec<i64> = x.iter().zip(g).map(|(a, b)| a + t * b).collect();
                if reduce_key(&cand) < reduce_key(x) {
                    *x = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

impl IntSystem {
    pub fn new(n: usize) -> IntSystem {
        IntSystem { n, rows: Vec::new(), rhs: Vec::new(), labels: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<i64>, rhs: i64, label: Constraint) {
        debug_assert_eq!(row.len(), self.n);
        self.rows.push(row);
        self.rhs.push(rhs);
        self.labels.push(label);
    }

    pub fn residual(&self, x: &[i64]) -> Vec<i128> {
        self.rows.iter().zip(&self.rhs).map(|(r, &b)| dot(r, x) - b as i128).collect()
    }

    /// A reduced particular solution and a kernel basis, or an infeasibility certificate.
    pub fn solve(&self) -> Result<std::result::Result<(Vec<i64>, Vec<Vec<i64>>), Certificate>> {
        let e = echelon(&self.rows, self.n)?;
        let mut y = vec![0i128; self.n];
        for r in 0..self.rows.len() {
            let mut res = self.rhs[r] as i128;
            let upto = e.pivot[r].unwrap_or(e.rank);
            for (i, yi) in y.iter().enumerate().take(upto) {
                res = res.checked_sub(e.h[r][i].checked_mul(*yi).ok_or_else(overflow)?).ok_or_else(overflow)?;
            }
            match e.pivot[r] {
                Some(j) => {
                    let p = e.h[r][j];
                    if res % p != 0 {
                        return Ok(Err(Certificate::Integral {
                            at: self.labels[r],
                            modulus: to_i64(p)?,
                            residual: to_i64(res)?,
                        }));
                    }
                    y[j] = res / p;
                }
                None if res != 0 => return Ok(Err(self.rational_certificate()?)),
                None => {}
            }
        }
        let mut x = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mut s: i128 = 0;
            for (j, yj) in y.iter().enumerate() {
                s = s.checked_add(e.u[i][j].checked_mul(*yj).ok_or_else(overflow)?).ok_or_else(overflow)?;
            }
            x.push(to_i64(s)?);
        }
        let mut kernel = Vec::new();
        for c in e.rank..self.n {
            kernel.push((0..self.n).map(|i| to_i64(e.u[i][c])).collect::<Result<Vec<_>>>()?);
        }
        size_reduce_basis(&mut kernel);
        reduce_by(&mut x, &kernel);
        debug_assert!(self.residual(&x).iter().all(|&r| r == 0));
        Ok(Ok((x, kernel)))
    }

    fn rational_certificate(&self) -> Result<Certificate> {
        let m = self.rows.len();
        let transposed: Vec<Vec<i64>> = (0..self.n).map(|j| (0..m).map(|i| self.rows[i][j]).collect()).collect();
        for y in integer_kernel(&transposed, m)? {
            let v = dot(&y, &self.rhs);
            if v != 0 {
                let combination = y.iter().enumerate().filter(|(_, &c)| c != 0).map(|(i, &c)| (self.labels[i], c)).collect();
                return Ok(Certificate::Rational { combination, value: to_i64(v)? });
            }
        }
        Err(QhgError::Infeasible("inconsistent system without a left-kernel witness".into()))
    }
}

/// Rows shared by flattening and charge systems: per-tet sums and interior edge totals.
fn base_rows(m: &Mesh, signed: bool) -> (IntSystem, Vec<usize>) {
    let nt = m.n_tets();
    let mut sys = IntSystem::new(3 * nt);
    for t in 0..nt {
        let mut row = vec![0; 3 * nt];
        row[3 * t..3 * t + 3].copy_from_slice(&[1, 1, 1]);
        sys.push(row, 0, Constraint::Tet(t));
    }
    let interior: Vec<usize> = m.interior_edges().collect();
    for &e in &interior {
        let mut row = vec![0; 3 * nt];
        for &(t, a, b) in &m.edges()[e].members {
            let s = if signed { m.signs[t].as_i64() } else { 1 };
            row[3 * t + edge_index(a, b)] += s;
        }
        sys.push(row, 0, Constraint::Edge(e));
    }
    (sys, interior)
}

pub(crate) fn integral_target(z: CNum, at: Constraint, tol: f64) -> std::result::Result<i64, Certificate> {
    // z must be iπ·k
    let k = z.im / PI;
    if z.re.abs() > tol || (k - k.round()).abs() > tol {
        return Err(Certificate::NonIntegralTarget { at, value: z });
    }
    Ok(k.round() as i64)
}

pub(crate) const TARGET_TOL: f64 = 1e-7;

/// Flattening system: F at every tet, L(e) = 0 at interior edges, γ(p) = target on paths.
pub fn flattening_system(m: &Mesh, paths: &[(NormalPath, CNum)]) -> Result<std::result::Result<IntSystem, Certificate>> {
    let moduli = m.moduli.as_ref().ok_or_else(|| QhgError::Undecorated("moduli".into()))?;
    let logs: Vec<[CNum; 3]> = moduli.iter().map(|w| [plog(w.w[0]), plog(w.w[1]), plog(w.w[2])]).collect();
    let (mut sys, interior) = base_rows(m, true);
    for t in 0..m.n_tets() {
        let s: CNum = logs[t].iter().sum();
        match integral_target(-s, Constraint::Tet(t), TARGET_TOL) {
            Ok(k) => sys.rhs[t] = k,
            Err(c) => return Ok(Err(c)),
        }
    }
    for (i, &e) in interior.iter().enumerate() {
        let mut s = CNum::new(0.0, 0.0);
        for &(t, a, b) in &m.edges()[e].members {
            s += logs[t][edge_index(a, b)] * m.signs[t].as_f64();
        }
        match integral_target(-s, Constraint::Edge(e), TARGET_TOL) {
            Ok(k) => sys.rhs[m.n_tets() + i] = k,
            Err(c) => return Ok(Err(c)),
        }
    }
    for (i, (p, target)) in paths.iter().enumerate() {
        let coef = m.flattening_path_coefficients(p)?;
        let mut s = *target;
        let mut row = vec![0; 3 * m.n_tets()];
        for (t, c) in coef.iter().enumerate() {
            for j in 0..3 {
                s -= logs[t][j] * c[j] as f64;
                row[3 * t + j] = c[j];
            }
        }
        match integral_target(s, Constraint::Path(i), TARGET_TOL) {
            Ok(k) => sys.push(row, k, Constraint::Path(i)),
            Err(c) => return Ok(Err(c)),
        }
    }
    Ok(Ok(sys))
}

/// Charge system: sums 1, C(e) = 0 on `ham` and 2 on other interior edges, path weights.
pub fn charge_system(m: &Mesh, ham: &BTreeSet<usize>, paths: &[(NormalPath, i64)]) -> Result<IntSystem> {
    let (mut sys, interior) = base_rows(m, false);
    for t in 0..m.n_tets() {
        sys.rhs[t] = 1;
    }
    for (i, &e) in interior.iter().enumerate() {
        sys.rhs[m.n_tets() + i] = if ham.contains(&e) { 0 } else { 2 };
    }
    for (i, (p, target)) in paths.iter().enumerate() {
        let coef = charge_path_coefficients(m, p)?;
        sys.push(coef.iter().flatten().copied().collect(), *target, Constraint::Path(i));
    }
    Ok(sys)
}

fn charge_path_coefficients(m: &Mesh, p: &NormalPath) -> Result<Vec<[i64; 3]>> {
    let mut coef = m.flattening_path_coefficients(p)?;
    for (t, c) in coef.iter_mut().enumerate() {
        let s = m.signs[t].as_i64();
        for x in c.iter_mut() {
            *x *= s;
        }
    }
    Ok(coef)
}

fn finish(sys: Result<std::result::Result<IntSystem, Certificate>>) -> Result<Solve> {
    let sys = match sys? {
        Ok(s) => s,
        Err(c) => return Ok(Err(c)),
    };
    Ok(sys.solve()?.map(|(x, _)| IntAssignment::from_flat(&x)))
}

/// A global flattening with the given path weights, or a certificate of infeasibility.
pub fn solve_flattening(m: &Mesh, paths: &[(NormalPath, CNum)]) -> Result<Solve> {
    finish(flattening_system(m, paths))
}

/// A global charge for Hamiltonian edge set `ham`, or a certificate.
pub fn solve_charge(m: &Mesh, ham: &BTreeSet<usize>) -> Result<Solve> {
    solve_charge_weighted(m, ham, &[])
}

/// As [`solve_charge`], with prescribed integer charge weights on closed paths.
pub fn solve_charge_weighted(m: &Mesh, ham: &BTreeSet<usize>, paths: &[(NormalPath, i64)]) -> Result<Solve> {
    finish(charge_system(m, ham, paths).map(Ok))
}

/// The per-edge generator: around each corner of e, +1 on the next edge type and −1 on
/// the previous one, weighted by *_b.
pub fn edge_generator(m: &Mesh, e: usize) -> LatticeGen {
    let mut delta = vec![[0i64; 3]; m.n_tets()];
    for &(t, a, b) in &m.edges()[e].members {
        let j = edge_index(a, b);
        let s = m.signs[t].as_i64();
        delta[t][(j + 1) % 3] += s;
        delta[t][(j + 2) % 3] -= s;
    }
    LatticeGen { edge: Some(e), delta }
}

fn homogeneous(m: &Mesh, signed: bool) -> IntSystem {
    base_rows(m, signed).0
}

/// Whether `v` is an integer combination of `gens`.
pub fn in_span(v: &[i64], gens: &[Vec<i64>]) -> Result<bool> {
    if gens.is_empty() {
        return Ok(v.iter().all(|&x| x == 0));
    }
    let n = gens.len();
    let mut sys = IntSystem::new(n);
    for (i, &vi) in v.iter().enumerate() {
        sys.push(gens.iter().map(|g| g[i]).collect(), vi, Constraint::Tet(i));
    }
    Ok(sys.solve()?.is_ok())
}

/// Generators of the lattice of flattening (signed = true) or charge (signed = false)
/// differences: the edge generators of interior edges, completed to span the kernel.
pub fn lattice_generators_for(m: &Mesh, signed: bool) -> Result<Vec<LatticeGen>> {
    let sys = homogeneous(m, signed);
    let mut gens: Vec<LatticeGen> = Vec::new();
    for e in m.interior_edges() {
        let mut g = edge_generator(m, e);
        if !signed {
            // charge totals are unsigned, so the orientation weight drops out
            for (t, d) in g.delta.iter_mut().enumerate() {
                let s = m.signs[t].as_i64();
                for x in d.iter_mut() {
                    *x *= s;
                }
            }
        }
        let flat: Vec<i64> = g.delta.iter().flatten().copied().collect();
        if flat.iter().any(|&x| x != 0) && sys.residual(&flat).iter().all(|&r| r == 0) {
            gens.push(g);
        }
    }
    let mut flats: Vec<Vec<i64>> = gens.iter().map(|g| g.delta.iter().flatten().copied().collect()).collect();
    for k in integer_kernel(&sys.rows, sys.n)? {
        if !in_span(&k, &flats)? {
            gens.push(LatticeGen { edge: None, delta: IntAssignment::from_flat(&k).values });
            flats.push(k);
        }
    }
    Ok(gens)
}

/// Flattening lattice generators.
pub fn lattice_generators(m: &Mesh) -> Result<Vec<LatticeGen>> {
    lattice_generators_for(m, true)
}

/// Kernel of the flattening map with the given paths added as homogeneous constraints.
pub fn lattice_generators_with_paths(m: &Mesh, paths: &[NormalPath]) -> Result<Vec<LatticeGen>> {
    weighted_kernel(m, paths, true)
}

/// Charge differences keeping every total and the charge weight of each path.
pub fn charge_generators_with_paths(m: &Mesh, paths: &[NormalPath]) -> Result<Vec<LatticeGen>> {
    weighted_kernel(m, paths, false)
}

fn weighted_kernel(m: &Mesh, paths: &[NormalPath], flattening: bool) -> Result<Vec<LatticeGen>> {
    let mut sys = homogeneous(m, flattening);
    for (i, p) in paths.iter().enumerate() {
        let coef = if flattening { m.flattening_path_coefficients(p)? } else { charge_path_coefficients(m, p)? };
        sys.push(coef.iter().flatten().copied().collect(), 0, Constraint::Path(i));
    }
    Ok(integer_kernel(&sys.rows, sys.n)?
        .into_iter()
        .map(|k| LatticeGen { edge: None, delta: IntAssignment::from_flat(&k).values })
        .collect())
}

/// Whether a − b lies in the span of `gens`.
pub fn differ_by_generators(a: &IntAssignment, b: &IntAssignment, gens: &[LatticeGen]) -> Result<bool> {
    let d: Vec<i64> = a.flat().iter().zip(b.flat()).map(|(x, y)| x - y).collect();
    let flats: Vec<Vec<i64>> = gens.iter().map(|g| g.delta.iter().flatten().copied().collect()).collect();
    in_span(&d, &flats)
}
