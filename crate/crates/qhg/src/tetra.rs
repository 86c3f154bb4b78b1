//! Decorated ideal tetrahedra.
//!
//! Vertices of a tetrahedron are labeled 0..3 by its branching (each edge points to
//! the larger label). Edge e0 = [01] ~ [23], e1 = [12] ~ [03], e2 = [02] ~ [13];
//! opposite edges carry the same modulus. Face a is the face opposite vertex a.

use crate::error::{QhgError, Result};
use crate::specialfn::{plog, Level};
use crate::CNum;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Orientation of the branching relative to the ambient orientation (*_b).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn from_i64(s: i64) -> Result<Sign> {
        match s {
            1 => Ok(Sign::Pos),
            -1 => Ok(Sign::Neg),
            _ => Err(QhgError::Domain(format!("orientation must be ±1, got {s}"))),
        }
    }

    pub fn as_i64(self) -> i64 {
        match self {
            Sign::Pos => 1,
            Sign::Neg => -1,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.as_i64() as f64
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }
}

/// Index (0, 1 or 2) of the edge joining local vertices a and b.
pub fn edge_index(a: usize, b: usize) -> usize {
    debug_assert!(a != b && a < 4 && b < 4);
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    match (lo, hi) {
        (0, 1) | (2, 3) => 0,
        (1, 2) | (0, 3) => 1,
        _ => 2,
    }
}

/// The six vertex pairs of a tetrahedron, in a fixed order.
pub const EDGE_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Cross-ratio moduli (w0, w1, w2) with w_{j+1} = 1/(1 − w_j).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuliTriple {
    pub w: [CNum; 3],
}

impl ModuliTriple {
    pub fn from_w0(w0: CNum) -> Result<Self> {
        let one = CNum::new(1.0, 0.0);
        let bad = |z: CNum| !z.re.is_finite() || !z.im.is_finite() || z.norm() < 1e-14 || (z - one).norm() < 1e-14;
        if bad(w0) {
            return Err(QhgError::Domain(format!("degenerate modulus {w0}")));
        }
        let w1 = one / (one - w0);
        let w2 = one / (one - w1);
        if bad(w1) || bad(w2) {
            return Err(QhgError::Domain(format!("degenerate modulus {w0}")));
        }
        Ok(ModuliTriple { w: [w0, w1, w2] })
    }

    pub fn w0(&self) -> CNum {
        self.w[0]
    }

    /// Sign of Im(w0), 0 for (numerically) real moduli.
    pub fn star_w(&self) -> i8 {
        let im = self.w[0].im;
        if im.abs() <= 1e-12 * self.w[0].norm().max(1.0) {
            0
        } else if im > 0.0 {
            1
        } else {
            -1
        }
    }

    /// Principal logs of the three moduli.
    pub fn logs(&self) -> [CNum; 3] {
        [plog(self.w[0]), plog(self.w[1]), plog(self.w[2])]
    }

    /// The integer f-sum forced by the flattening condition, −Σ arg(w_j)/π.
    pub fn forced_flattening_sum(&self) -> i64 {
        let s: f64 = self.logs().iter().map(|l| l.im).sum();
        (-s / PI).round() as i64
    }
}

/// A branched tetrahedron with moduli, flattening and charge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatChargedTet {
    pub sign: Sign,
    pub moduli: ModuliTriple,
    pub f: [i64; 3],
    pub c: [i64; 3],
}

impl FlatChargedTet {
    /// Builds and validates: l0+l1+l2 = 0 to 1e−9 and c0+c1+c2 = 1.
    pub fn new(sign: Sign, moduli: ModuliTriple, f: [i64; 3], c: [i64; 3]) -> Result<Self> {
        let t = FlatChargedTet { sign, moduli, f, c };
        let s: CNum = t.log_branch().iter().sum();
        if s.norm() > 1e-9 {
            return Err(QhgError::Domain(format!("flattening condition violated: Σl = {s}")));
        }
        if c.iter().sum::<i64>() != 1 {
            return Err(QhgError::Domain(format!("charge condition violated: {c:?}")));
        }
        Ok(t)
    }

    /// l_j = log(w_j) + iπ f_j.
    pub fn log_branch(&self) -> [CNum; 3] {
        let logs = self.moduli.logs();
        [0, 1, 2].map(|j| logs[j] + CNum::new(0.0, PI * self.f[j] as f64))
    }

    /// l_{j,N} = log(w_j) + iπ(N+1)(f_j − *_b c_j).
    pub fn quantum_log_branch(&self, level: &Level) -> [CNum; 3] {
        let logs = self.moduli.logs();
        let np1 = (level.n() + 1) as f64;
        let s = self.sign.as_i64();
        [0, 1, 2].map(|j| logs[j] + CNum::new(0.0, PI * np1 * (self.f[j] - s * self.c[j]) as f64))
    }

    /// w′_j = exp(l_{j,N}/N).
    pub fn w_prime(&self, level: &Level) -> [CNum; 3] {
        let n = level.n() as f64;
        self.quantum_log_branch(level).map(|l| (l / n).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(theta: f64) -> CNum {
        CNum::from_polar(1.0, theta)
    }

    fn regular() -> ModuliTriple {
        ModuliTriple::from_w0(e(PI / 3.0)).unwrap()
    }

    #[test]
    fn moduli_examples() {
        let m = regular();
        for j in 0..3 {
            assert!((m.w[j] - e(PI / 3.0)).norm() < 1e-14);
        }
        let m = ModuliTriple::from_w0(CNum::new(2.0, 0.0)).unwrap();
        assert!((m.w[1] - CNum::new(-1.0, 0.0)).norm() < 1e-15);
        assert!((m.w[2] - CNum::new(0.5, 0.0)).norm() < 1e-15);
        let m = ModuliTriple::from_w0(CNum::new(0.5, 0.0)).unwrap();
        assert!((m.w[1] - CNum::new(2.0, 0.0)).norm() < 1e-15);
        assert!((m.w[2] - CNum::new(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(m.star_w(), 0);
        assert!(ModuliTriple::from_w0(CNum::new(1.0, 0.0)).is_err());
        assert!(ModuliTriple::from_w0(CNum::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn edge_labels() {
        assert_eq!(edge_index(0, 1), 0);
        assert_eq!(edge_index(3, 2), 0);
        assert_eq!(edge_index(1, 2), 1);
        assert_eq!(edge_index(0, 3), 1);
        assert_eq!(edge_index(2, 0), 2);
        assert_eq!(edge_index(1, 3), 2);
    }

    #[test]
    fn regular_log_branch() {
        let t = FlatChargedTet::new(Sign::Pos, regular(), [0, 0, -1], [0, 1, 0]).unwrap();
        let l = t.log_branch();
        assert!((l[0] - CNum::new(0.0, PI / 3.0)).norm() < 1e-14);
        assert!((l[2] - CNum::new(0.0, PI / 3.0 - PI)).norm() < 1e-14);
        assert_eq!(regular().forced_flattening_sum(), -1);
    }

    #[test]
    fn quantum_branch_example() {
        let lv = Level::new(3).unwrap();
        let t = FlatChargedTet::new(Sign::Pos, regular(), [0, 0, -1], [0, 1, 0]).unwrap();
        let q = t.quantum_log_branch(&lv);
        let third = CNum::new(0.0, PI / 3.0);
        assert!((q[0] - third).norm() < 1e-13);
        assert!((q[1] - (third - CNum::new(0.0, 4.0 * PI))).norm() < 1e-13);
        assert!((q[2] - (third - CNum::new(0.0, 4.0 * PI))).norm() < 1e-13);
        let tn = FlatChargedTet { sign: Sign::Neg, ..t };
        let qn = tn.quantum_log_branch(&lv);
        assert!((qn[1] - (third + CNum::new(0.0, 4.0 * PI))).norm() < 1e-13);
    }

    #[test]
    fn w_prime_complete_fig8_positive() {
        for n in [3usize, 5, 7] {
            let lv = Level::new(n).unwrap();
            let t = FlatChargedTet::new(Sign::Pos, regular(), [0, -1, 0], [0, 1, 0]).unwrap();
            let wp = t.w_prime(&lv);
            let nf = n as f64;
            assert!((wp[0] - e(PI / (3.0 * nf))).norm() < 1e-13);
            assert!((wp[1] - e(-5.0 * PI / (3.0 * nf))).norm() < 1e-13);
            let prod = wp[0] * wp[1] * wp[2];
            assert!((prod - e(-PI / nf)).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_decorations() {
        assert!(FlatChargedTet::new(Sign::Pos, regular(), [0, 0, 0], [0, 1, 0]).is_err());
        assert!(FlatChargedTet::new(Sign::Pos, regular(), [0, 0, -1], [1, 1, 0]).is_err());
    }
}
