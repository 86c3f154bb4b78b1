//! State sums: contraction of the per-tet tensors over N-states of the interior faces.
//!
//! Indices are labeled by face classes of the mesh (see [`Mesh::face_classes`]). A face
//! glued to another face is summed over; unglued faces survive as indices of the trace
//! tensor, sorted by label.

use crate::dilog::{r1_scalar, rn_tensor};
use crate::error::{QhgError, Result};
use crate::mesh::{Mesh, VertexKind};
use crate::specialfn::Level;
use crate::CNum;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Dense tensor of dimension `dim` per index, row-major, indices labeled.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dim: usize,
    pub labels: Vec<usize>,
    pub data: Vec<CNum>,
}

fn strides(dim: usize, rank: usize) -> Vec<usize> {
    let mut s = vec![1; rank];
    for i in (0..rank.saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dim;
    }
    s
}

impl Tensor {
    pub fn scalar(z: CNum) -> Tensor {
        Tensor { dim: 1, labels: vec![], data: vec![z] }
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }

    /// Reorders indices so that label order becomes `order`.
    pub fn permuted(&self, order: &[usize]) -> Tensor {
        let pos: Vec<usize> = order.iter().map(|l| self.labels.iter().position(|x| x == l).unwrap()).collect();
        let r = self.rank();
        let old = strides(self.dim, r);
        let mut data = vec![CNum::new(0.0, 0.0); self.data.len()];
        let mut idx = vec![0usize; r];
        for out in data.iter_mut() {
            let src: usize = (0..r).map(|k| idx[k] * old[pos[k]]).sum();
            *out = self.data[src];
            for k in (0..r).rev() {
                idx[k] += 1;
                if idx[k] < self.dim {
                    break;
                }
                idx[k] = 0;
            }
        }
        Tensor { dim: self.dim, labels: order.to_vec(), data }
    }

    /// Sums over repeated labels (a face glued to another face of the same tet).
    pub fn self_traced(&self) -> Tensor {
        let mut t = self.clone();
        loop {
            let r = t.rank();
            let dup = (0..r).find_map(|i| (i + 1..r).find(|&j| t.labels[j] == t.labels[i]).map(|j| (i, j)));
            let Some((i, j)) = dup else { return t };
            let rest: Vec<usize> = (0..r).filter(|&k| k != i && k != j).collect();
            let st = strides(t.dim, r);
            let new_len = t.dim.pow(rest.len() as u32);
            let mut data = vec![CNum::new(0.0, 0.0); new_len];
            let mut idx = vec![0usize; rest.len()];
            for out in data.iter_mut() {
                let base: usize = rest.iter().zip(&idx).map(|(&k, &x)| x * st[k]).sum();
                for a in 0..t.dim {
                    *out += t.data[base + a * (st[i] + st[j])];
                }
                for k in (0..rest.len()).rev() {
                    idx[k] += 1;
                    if idx[k] < t.dim {
                        break;
                    }
                    idx[k] = 0;
                }
            }
            t = Tensor { dim: t.dim, labels: rest.iter().map(|&k| t.labels[k]).collect(), data };
        }
    }

    /// Contracts all shared labels. Result labels: free labels of self, then of other.
    pub fn contract(&self, other: &Tensor) -> Tensor {
        let shared: Vec<usize> = self.labels.iter().filter(|l| other.labels.contains(l)).copied().collect();
        let fa: Vec<usize> = self.labels.iter().filter(|l| !shared.contains(l)).copied().collect();
        let fb: Vec<usize> = other.labels.iter().filter(|l| !shared.contains(l)).copied().collect();
        let a = self.permuted(&[fa.clone(), shared.clone()].concat());
        let b = other.permuted(&[shared.clone(), fb.clone()].concat());
        let d = self.dim.max(other.dim);
        let (p, k, q) = (d.pow(fa.len() as u32), d.pow(shared.len() as u32), d.pow(fb.len() as u32));
        let mut data = vec![CNum::new(0.0, 0.0); p * q];
        for i in 0..p {
            let row = &a.data[i * k..(i + 1) * k];
            let out = &mut data[i * q..(i + 1) * q];
            for (s, &x) in row.iter().enumerate() {
                if x == CNum::new(0.0, 0.0) {
                    continue;
                }
                let brow = &b.data[s * q..(s + 1) * q];
                for (o, &y) in out.iter_mut().zip(brow) {
                    *o += x * y;
                }
            }
        }
        Tensor { dim: d, labels: [fa, fb].concat(), data }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// The labeled per-tet tensors of a decorated mesh at level N > 1.
pub fn tet_tensors(m: &Mesh, level: &Level) -> Result<Vec<Tensor>> {
    let class = face_class_map(m);
    (0..m.n_tets())
        .map(|t| {
            let r = rn_tensor(&m.tet(t)?, level)?;
            Ok(Tensor { dim: level.n(), labels: r.faces.iter().map(|&f| class[&(t, f)]).collect(), data: r.data })
        })
        .collect()
}

fn face_class_map(m: &Mesh) -> BTreeMap<(usize, usize), usize> {
    let mut map = BTreeMap::new();
    for (i, cls) in m.face_classes().iter().enumerate() {
        for &fr in cls {
            map.insert(fr, i);
        }
    }
    map
}

/// Pairwise schedule over a growing list: step (i, j) contracts entries i and j and
/// appends the result.
pub type Plan = Vec<(usize, usize)>;

/// Greedy plan: always contract the sharing pair with the smallest result rank.
pub fn plan_for(label_sets: &[Vec<usize>]) -> Plan {
    let mut live: Vec<Option<Vec<usize>>> = label_sets.iter().map(|l| Some(dedup_traced(l))).collect();
    let mut plan = Vec::new();
    while live.iter().filter(|x| x.is_some()).count() > 1 {
        let ids: Vec<usize> = (0..live.len()).filter(|&i| live[i].is_some()).collect();
        let mut best: Option<(bool, usize, usize, usize)> = None;
        for (x, &i) in ids.iter().enumerate() {
            for &j in &ids[x + 1..] {
                let (a, b) = (live[i].as_ref().unwrap(), live[j].as_ref().unwrap());
                let shared = a.iter().filter(|l| b.contains(l)).count();
                let rank = a.len() + b.len() - 2 * shared;
                let key = (shared == 0, rank, i, j);
                if best.map_or(true, |bk| key < bk) {
                    best = Some(key);
                }
            }
        }
        let (_, _, i, j) = best.unwrap();
        let (a, b) = (live[i].take().unwrap(), live[j].take().unwrap());
        let merged: Vec<usize> = a.iter().chain(b.iter()).filter(|l| !(a.contains(l) && b.contains(l))).copied().collect();
        live.push(Some(merged));
        plan.push((i, j));
    }
    plan
}

fn dedup_traced(l: &[usize]) -> Vec<usize> {
    l.iter().filter(|x| l.iter().filter(|y| y == x).count() == 1).copied().collect()
}

/// The greedy schedule for the mesh's tet tensors.
pub fn contraction_plan(m: &Mesh) -> Plan {
    let class = face_class_map(m);
    let sets: Vec<Vec<usize>> = (0..m.n_tets()).map(|t| (0..4).map(|f| class[&(t, f)]).collect()).collect();
    plan_for(&sets)
}

/// Largest intermediate rank produced by a plan.
pub fn plan_max_rank(label_sets: &[Vec<usize>], plan: &Plan) -> usize {
    let mut live: Vec<Vec<usize>> = label_sets.iter().map(|l| dedup_traced(l)).collect();
    let mut worst = live.iter().map(|l| l.len()).max().unwrap_or(0);
    for &(i, j) in plan {
        let (a, b) = (live[i].clone(), live[j].clone());
        let merged: Vec<usize> = a.iter().chain(b.iter()).filter(|l| !(a.contains(l) && b.contains(l))).copied().collect();
        worst = worst.max(merged.len());
        live.push(merged);
    }
    worst
}

/// Runs a plan; the result has its labels sorted.
pub fn contract_with_plan(tensors: &[Tensor], plan: &Plan) -> Tensor {
    let mut live: Vec<Option<Tensor>> = tensors.iter().map(|t| Some(t.self_traced())).collect();
    for &(i, j) in plan {
        let (a, b) = (live[i].take().unwrap(), live[j].take().unwrap());
        live.push(Some(a.contract(&b)));
    }
    let out = live.into_iter().flatten().next().unwrap_or_else(|| Tensor::scalar(CNum::new(1.0, 0.0)));
    let mut order = out.labels.clone();
    order.sort_unstable();
    out.permuted(&order)
}

/// Full N-state enumeration: sums the product of entries over every labeling of all
/// labels, keeping labels that occur once as output indices.
pub fn brute_force(tensors: &[Tensor]) -> Tensor {
    let dim = tensors.iter().map(|t| t.dim).max().unwrap_or(1);
    let mut count: BTreeMap<usize, usize> = BTreeMap::new();
    for t in tensors {
        for &l in &t.labels {
            *count.entry(l).or_default() += 1;
        }
    }
    let all: Vec<usize> = count.keys().copied().collect();
    let open: Vec<usize> = all.iter().filter(|l| count[l] == 1).copied().collect();
    let pos: BTreeMap<usize, usize> = all.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let ost = strides(dim, open.len());
    // per tensor: (state position, stride) for each index
    let access: Vec<Vec<(usize, usize)>> = tensors
        .iter()
        .map(|t| t.labels.iter().zip(strides(t.dim, t.rank())).map(|(l, s)| (pos[l], s)).collect())
        .collect();
    let out_access: Vec<(usize, usize)> = open.iter().zip(&ost).map(|(l, &s)| (pos[l], s)).collect();
    let mut data = vec![CNum::new(0.0, 0.0); dim.pow(open.len() as u32)];
    let mut state = vec![0usize; all.len()];
    let total = dim.pow(all.len() as u32);
    for _ in 0..total {
        let mut prod = CNum::new(1.0, 0.0);
        for (t, acc) in tensors.iter().zip(&access) {
            let k: usize = acc.iter().map(|&(p, s)| state[p] * s).sum();
            prod *= t.data[k];
            if prod == CNum::new(0.0, 0.0) {
                break;
            }
        }
        let o: usize = out_access.iter().map(|&(p, s)| state[p] * s).sum();
        data[o] += prod;
        for k in (0..all.len()).rev() {
            state[k] += 1;
            if state[k] < dim {
                break;
            }
            state[k] = 0;
        }
    }
    Tensor { dim, labels: open, data }
}

/// Exponent v_δ/2 + v_I of the normalization N^{−(v_δ/2 + v_I)}.
pub fn normalization_exponent(m: &Mesh) -> f64 {
    let mut e = 0.0;
    for k in m.classify_vertices() {
        match k {
            VertexKind::Manifold => e += 1.0,
            VertexKind::Boundary { chi: 1 } => e += 0.5,
            _ => {}
        }
    }
    e
}

/// Normalized total contraction of the mesh's tensors (scalar for closed meshes).
pub fn trace_tensor(m: &Mesh, level: &Level) -> Result<Tensor> {
    let norm = (level.n() as f64).powf(-normalization_exponent(m));
    if level.n() == 1 {
        let mut prod = CNum::new(1.0, 0.0);
        for t in 0..m.n_tets() {
            prod *= r1_scalar(&m.tet(t)?)?;
        }
        let mut labels: Vec<usize> = Vec::new();
        let class = face_class_map(m);
        for fr in m.boundary_faces() {
            labels.push(class[&fr]);
        }
        labels.sort_unstable();
        return Ok(Tensor { dim: 1, labels, data: vec![prod * norm] });
    }
    if m.n_tets() == 0 {
        return Err(QhgError::InvalidMesh("empty mesh".into()));
    }
    let tensors = tet_tensors(m, level)?;
    let mut out = contract_with_plan(&tensors, &contraction_plan(m));
    for z in out.data.iter_mut() {
        *z *= norm;
    }
    Ok(out)
}

/// Outcome of comparing two tensors up to a factor ±ζ^k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseWitness {
    pub equal: bool,
    /// a / b at the largest entry of b
    pub scalar: CNum,
    /// k with scalar ≈ sign·ζ^k (meaningful when equal)
    pub phase_index: i64,
    pub sign: i8,
}

/// a =_N b: a = ±ζ^k·b entrywise, to tol relative to max|b|.
pub fn eq_mod_n(a: &[CNum], b: &[CNum], level: &Level, tol: f64) -> PhaseWitness {
    let fail = |scalar| PhaseWitness { equal: false, scalar, phase_index: 0, sign: 1 };
    if a.len() != b.len() {
        return fail(CNum::new(f64::NAN, f64::NAN));
    }
    let (imax, bmax) = b.iter().enumerate().map(|(i, z)| (i, z.norm())).fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    if bmax == 0.0 {
        let amax = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
        return if amax == 0.0 {
            PhaseWitness { equal: true, scalar: CNum::new(1.0, 0.0), phase_index: 0, sign: 1 }
        } else {
            fail(CNum::new(f64::INFINITY, 0.0))
        };
    }
    let scalar = a[imax] / b[imax];
    let n = level.n() as i64;
    let mut best = (f64::INFINITY, 0i64, 1i8);
    for k in 0..n {
        for s in [1i8, -1] {
            let d = (scalar - level.zeta_pow(k) * s as f64).norm();
            if d < best.0 {
                best = (d, k, s);
            }
        }
    }
    if !(best.0 <= tol) {
        return fail(scalar);
    }
    let ok = a.iter().zip(b).all(|(x, y)| (x - scalar * y).norm() <= tol * bmax);
    PhaseWitness { equal: ok, scalar, phase_index: best.1, sign: best.2 }
}

/// [`eq_mod_n`] on labeled tensors; label sets must agree.
pub fn eq_mod_n_tensors(a: &Tensor, b: &Tensor, level: &Level, tol: f64) -> PhaseWitness {
    if a.labels.len() != b.labels.len() {
        return PhaseWitness { equal: false, scalar: CNum::new(f64::NAN, f64::NAN), phase_index: 0, sign: 1 };
    }
    let mut order = b.labels.clone();
    order.sort_unstable();
    let mut la = a.labels.clone();
    la.sort_unstable();
    if la != order {
        return PhaseWitness { equal: false, scalar: CNum::new(f64::NAN, f64::NAN), phase_index: 0, sign: 1 };
    }
    eq_mod_n(&a.permuted(&order).data, &b.permuted(&order).data, level, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(labels: Vec<usize>, seed: u64) -> Tensor {
        let dim = 3;
        let n = dim_pow(dim, labels.len());
        let data = (0..n)
            .map(|i| {
                let x = ((i as u64 + 1) * 2654435761 + seed * 97) % 1000;
                CNum::new(x as f64 / 500.0 - 1.0, ((x * 7) % 1000) as f64 / 500.0 - 1.0)
            })
            .collect();
        Tensor { dim, labels, data }
    }

    fn dim_pow(d: usize, r: usize) -> usize {
        d.pow(r as u32)
    }

    #[test]
    fn contraction_matches_brute_force() {
        let ts = vec![t(vec![0, 1, 2, 3], 1), t(vec![2, 4, 0, 5], 2), t(vec![5, 1, 6, 7], 3)];
        let sets: Vec<Vec<usize>> = ts.iter().map(|x| x.labels.clone()).collect();
        let plan = plan_for(&sets);
        let a = contract_with_plan(&ts, &plan);
        let b = brute_force(&ts);
        assert_eq!(a.labels, b.labels);
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn self_trace_matches_brute_force() {
        let ts = vec![t(vec![0, 1, 0, 2], 5), t(vec![1, 2, 3, 4], 6)];
        let plan = plan_for(&ts.iter().map(|x| x.labels.clone()).collect::<Vec<_>>());
        let a = contract_with_plan(&ts, &plan);
        let b = brute_force(&ts);
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn two_tets_single_step() {
        let plan = plan_for(&[vec![0, 1, 2, 3], vec![1, 0, 3, 2]]);
        assert_eq!(plan, vec![(0, 1)]);
    }

    #[test]
    fn eq_mod_n_examples() {
        let lv = Level::new(3).unwrap();
        let x: Vec<CNum> = (0..5).map(|i| CNum::new(i as f64 + 0.5, 1.0 - i as f64)).collect();
        let w = eq_mod_n(&x, &x, &lv, 1e-8);
        assert!(w.equal && w.phase_index == 0 && w.sign == 1);
        let zx: Vec<CNum> = x.iter().map(|z| z * lv.zeta()).collect();
        let w = eq_mod_n(&zx, &x, &lv, 1e-8);
        assert!(w.equal && w.phase_index == 1);
        let bumped: Vec<CNum> = x.iter().map(|z| z * 1.0001).collect();
        assert!(!eq_mod_n(&bumped, &x, &lv, 1e-8).equal);
        let neg: Vec<CNum> = x.iter().map(|z| -z).collect();
        let w = eq_mod_n(&neg, &x, &lv, 1e-8);
        assert!(w.equal && w.sign == -1);
        let zero = vec![CNum::new(0.0, 0.0); 5];
        assert!(!eq_mod_n(&x, &zero, &lv, 1e-8).equal);
    }

    #[test]
    fn permute_roundtrip() {
        let a = t(vec![4, 7, 1], 9);
        let b = a.permuted(&[1, 4, 7]).permuted(&[4, 7, 1]);
        assert_eq!(a, b);
    }
}
