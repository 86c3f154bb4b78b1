#![allow(dead_code)]

use qhg::fig8;
use qhg::latsolve::{self, IntAssignment};
use qhg::mesh::{face_vertices, Gluing, Mesh};
use qhg::moves;
use qhg::tetra::{ModuliTriple, Sign};
use qhg::CNum;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

pub fn c(re: f64, im: f64) -> CNum {
    CNum::new(re, im)
}

/// A modulus away from 0, 1 and the real axis.
pub fn random_modulus(rng: &mut ChaCha8Rng) -> CNum {
    loop {
        let w = c(rng.gen_range(-1.5..2.5), rng.gen_range(0.1..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        if w.norm() > 0.1 && (w - c(1.0, 0.0)).norm() > 0.1 {
            return w;
        }
    }
}

/// The mesh glued to its mirror copy along every boundary face.
pub fn doubled(m: &Mesh) -> Mesh {
    let k = m.n_tets();
    let mut signs = m.signs.clone();
    signs.extend(m.signs.iter().map(|s| s.flip()));
    let mut gluings = m.gluings.clone();
    gluings.extend(m.gluings.iter().map(|g| Gluing { tet_a: g.tet_a + k, tet_b: g.tet_b + k, ..*g }));
    for (t, f) in m.boundary_faces() {
        gluings.push(Gluing { tet_a: t, face_a: f, tet_b: t + k, face_b: f, perm: face_vertices(f) });
    }
    let mut d = Mesh::new(signs, gluings).expect("double");
    if let Some(w) = &m.moduli {
        let mut all = w.clone();
        all.extend(w.iter().copied());
        d = d.with_moduli(all).unwrap();
    }
    d
}

/// Tet t of `m` becomes tet perm[t]; decorations and Hamiltonian edges follow.
pub fn relabeled(m: &Mesh, perm: &[usize]) -> Mesh {
    let n = m.n_tets();
    let mut signs = vec![Sign::Pos; n];
    for t in 0..n {
        signs[perm[t]] = m.signs[t];
    }
    let gluings = m.gluings.iter().map(|g| Gluing { tet_a: perm[g.tet_a], tet_b: perm[g.tet_b], ..*g }).collect();
    let mut out = Mesh::new(signs, gluings).expect("relabel");
    if let Some(w) = &m.moduli {
        out = out.with_moduli(moved(w, perm)).unwrap();
    }
    if let Some(f) = &m.flattening {
        out = out.with_flattening(moved(f, perm)).unwrap();
    }
    if let Some(ch) = &m.charge {
        out = out.with_charge(moved(ch, perm)).unwrap();
    }
    let reps: Vec<(usize, usize, usize)> = m
        .ham
        .iter()
        .map(|&e| {
            let (t, a, b) = m.edges()[e].rep();
            (perm[t], a, b)
        })
        .collect();
    out.with_hamiltonian(&reps).unwrap()
}

fn moved<T: Clone>(v: &[T], perm: &[usize]) -> Vec<T> {
    let mut o = v.to_vec();
    for (t, x) in v.iter().enumerate() {
        o[perm[t]] = x.clone();
    }
    o
}

/// Pulls an assignment on a relabeled mesh back to the original tet order.
pub fn pulled_back(a: &IntAssignment, perm: &[usize]) -> IntAssignment {
    IntAssignment { values: (0..perm.len()).map(|t| a.values[perm[t]]).collect() }
}

/// Random moduli with per-tet (not global) flattening and charge.
pub fn locally_decorated(m: Mesh, rng: &mut ChaCha8Rng) -> Mesh {
    let n = m.n_tets();
    let moduli: Vec<ModuliTriple> = (0..n).map(|_| ModuliTriple::from_w0(random_modulus(rng)).unwrap()).collect();
    let f = moduli.iter().map(|w| [0, 0, w.forced_flattening_sum()]).collect();
    let ch = (0..n)
        .map(|_| {
            let a = rng.gen_range(-2..=2);
            let b = rng.gen_range(-2..=2);
            [a, b, 1 - a - b]
        })
        .collect();
    m.with_moduli(moduli).unwrap().with_flattening(f).unwrap().with_charge(ch).unwrap()
}

/// A random 2-3 transit; `after` is the decorated 3-side with its central interior edge.
pub fn random_transit(rng: &mut ChaCha8Rng) -> moves::TransitResult {
    loop {
        let (x, y) = (random_modulus(rng), random_modulus(rng));
        if !moves::nondegenerate(x, y) {
            continue;
        }
        let ch = |rng: &mut ChaCha8Rng| {
            let a = rng.gen_range(-2..=2);
            let b = rng.gen_range(-2..=2);
            [a, b, 1 - a - b]
        };
        let (lo, up) = (ch(rng), ch(rng));
        if let Ok(r) = moves::Bipyramid::from_xy(x, y, lo, up).and_then(|b| moves::two_three_transit(&b)) {
            return r;
        }
    }
}

/// The first Hamiltonian edge set (by lexicographic search) admitting a charge.
pub fn feasible_ham(m: &Mesh) -> Option<BTreeSet<usize>> {
    let interior: Vec<usize> = m.interior_edges().collect();
    let k = interior.len();
    for mask in 0u32..(1 << k) {
        let ham: BTreeSet<usize> = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| interior[i]).collect();
        if let Ok(Ok(_)) = latsolve::solve_charge(m, &ham) {
            return Some(ham);
        }
    }
    None
}

/// The doubled single tetrahedron and doubled 2-3 bipyramid (closed, 2 and 4 tets).
pub fn closed_doubles(rng: &mut ChaCha8Rng) -> Vec<(String, Mesh)> {
    let single = Mesh::new(vec![Sign::Pos], vec![]).unwrap().with_moduli(vec![ModuliTriple::from_w0(random_modulus(rng)).unwrap()]).unwrap();
    let bip = Mesh::from_labeled(&[(moves::LOWER, Sign::Pos), (moves::UPPER, Sign::Pos)])
        .unwrap()
        .with_moduli((0..2).map(|_| ModuliTriple::from_w0(random_modulus(rng)).unwrap()).collect())
        .unwrap();
    vec![("doubled tetrahedron".into(), doubled(&single)), ("doubled bipyramid".into(), doubled(&bip))]
}

/// The complete figure-eight mesh with solver decorations.
pub fn fig8_mesh() -> Mesh {
    let (f, ch) = fig8::solver_decorations().unwrap();
    fig8::build_fig8_mesh(&fig8::Fig8Point::complete(), &f, &ch).unwrap()
}
