//! Matrix dilogarithms of level N and the scalar N = 1 dilogarithm.
//!
//! A [`DilogTensor`] stores entries T[i,j,k,l] row-major. Read as a matrix with row
//! (i,j) and column (k,l), `ln_tensor` and `ln_tensor_inv` are mutual inverses.
//! Each index slot is attached to a face of the tetrahedron by `faces`.

use crate::error::{QhgError, Result};
use crate::specialfn::{bracket, check_fermat, g_func, omega_unchecked, rogers_extended, Level};
use crate::tetra::{FlatChargedTet, Sign};
use crate::CNum;

/// Slot → face map for *_b = +1 (uses L_N).
pub const FACES_POS: [usize; 4] = [2, 0, 3, 1];
/// Slot → face map for *_b = −1 (uses L_N^{-1}).
pub const FACES_NEG: [usize; 4] = [3, 1, 2, 0];

#[derive(Debug, Clone, PartialEq)]
pub struct DilogTensor {
    pub level: Level,
    pub data: Vec<CNum>,
    /// `faces[s]` is the face (opposite vertex) carried by index slot s.
    pub faces: [usize; 4],
}

impl DilogTensor {
    fn zeros(level: &Level, faces: [usize; 4]) -> Self {
        let n = level.n();
        DilogTensor { level: level.clone(), data: vec![CNum::new(0.0, 0.0); n.pow(4)], faces }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        let n = self.level.n();
        ((i * n + j) * n + k) * n + l
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> CNum {
        self.data[self.idx(i, j, k, l)]
    }

    pub fn scale(&mut self, s: CNum) {
        for x in self.data.iter_mut() {
            *x *= s;
        }
    }

    pub fn nonzero_count(&self, tol: f64) -> usize {
        self.data.iter().filter(|z| z.norm() > tol).count()
    }
}

fn omega_table(u: CNum, v: CNum, level: &Level) -> Result<Vec<CNum>> {
    (0..level.n() as i64).map(|n| omega_unchecked(u, v, n, level)).collect()
}

fn h_of(u: CNum, level: &Level) -> CNum {
    g_func(u, level) / g_func(CNum::new(1.0, 0.0), level)
}

/// L_N(u′,v′)[i,j,k,l] = h(u′) ζ^{kj+(m+1)k²} ω(u′,v′|i−k) δ(i+j−l).
pub fn ln_tensor(u1: CNum, v1: CNum, level: &Level) -> Result<DilogTensor> {
    check_fermat(u1, v1, level, 1e-8)?;
    let n = level.n();
    let m1 = (level.m() + 1) as i64;
    let om = omega_table(u1, v1, level)?;
    let hu = h_of(u1, level);
    let mut t = DilogTensor::zeros(level, FACES_POS);
    for i in 0..n {
        for j in 0..n {
            let l = (i + j) % n;
            for k in 0..n {
                let (ki, ji) = (k as i64, j as i64);
                let d = (i as i64 - ki).rem_euclid(n as i64) as usize;
                let idx = t.idx(i, j, k, l);
                t.data[idx] = hu * level.zeta_pow(ki * ji + m1 * ki * ki) * om[d];
            }
        }
    }
    Ok(t)
}

/// L_N(u′,v′)^{-1}[i,j,k,l] = [u′]/h(u′) ζ^{−il−(m+1)i²} / ω(u′/ζ,v′|k−i) δ(k+l−j).
pub fn ln_tensor_inv(u1: CNum, v1: CNum, level: &Level) -> Result<DilogTensor> {
    check_fermat(u1, v1, level, 1e-8)?;
    let n = level.n();
    let m1 = (level.m() + 1) as i64;
    let br = bracket(u1, level);
    if br.norm() < 1e-13 {
        return Err(QhgError::Singular(format!("[u'] vanishes at u' = {u1}")));
    }
    let om = omega_table(u1 / level.zeta(), v1, level)?;
    if om.iter().any(|z| z.norm() < 1e-300) {
        return Err(QhgError::Singular("ω factor vanishes".into()));
    }
    let pre = br / h_of(u1, level);
    let mut t = DilogTensor::zeros(level, FACES_NEG);
    for i in 0..n {
        for k in 0..n {
            let d = (k as i64 - i as i64).rem_euclid(n as i64) as usize;
            for l in 0..n {
                let j = (k + l) % n;
                let (ii, li) = (i as i64, l as i64);
                let idx = t.idx(i, j, k, l);
                t.data[idx] = pre * level.zeta_pow(-ii * li - m1 * ii * ii) / om[d];
            }
        }
    }
    Ok(t)
}

/// Max-entry deviation of L·L^{-1} from the identity on C^N ⊗ C^N.
pub fn inverse_residual(a: &DilogTensor, b: &DilogTensor) -> f64 {
    let n = a.level.n();
    let n2 = n * n;
    let mut worst = 0.0f64;
    for r in 0..n2 {
        for c in 0..n2 {
            let mut s = CNum::new(0.0, 0.0);
            for mid in 0..n2 {
                s += a.data[r * n2 + mid] * b.data[mid * n2 + c];
            }
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((s - CNum::new(target, 0.0)).norm());
        }
    }
    worst
}

/// R_N = ((w′0)^{−c1}(w′1)^{c0})^{(N−1)/2} · L_N^{*_b}(w′0, 1/w′1).
pub fn rn_tensor(t: &FlatChargedTet, level: &Level) -> Result<DilogTensor> {
    if level.n() < 2 {
        return Err(QhgError::Domain("matrix dilogarithm needs N > 1".into()));
    }
    let wp = t.w_prime(level);
    let m = level.m() as i32;
    let pre = wp[0].powi(-(t.c[1] as i32) * m) * wp[1].powi(t.c[0] as i32 * m);
    let (u, v) = (wp[0], CNum::new(1.0, 0.0) / wp[1]);
    let mut r = match t.sign {
        Sign::Pos => ln_tensor(u, v, level)?,
        Sign::Neg => ln_tensor_inv(u, v, level)?,
    };
    r.scale(pre);
    Ok(r)
}

/// R_1 = exp(*_b/(iπ) · R(w0; f0, f1)).
pub fn r1_scalar(t: &FlatChargedTet) -> Result<CNum> {
    let r = rogers_extended(t.moduli.w0(), t.f[0], t.f[1])?;
    Ok((r * t.sign.as_f64() / CNum::new(0.0, std::f64::consts::PI)).exp())
}
