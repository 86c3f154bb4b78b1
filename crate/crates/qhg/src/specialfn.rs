//! Scalar special functions: principal branches, the cyclic dilogarithm and friends.
//!
//! Every fractional power in the crate goes through [`principal_log`], so that the
//! branch conventions are made in exactly one place.

use crate::error::{QhgError, Result};
use crate::CNum;
use std::f64::consts::PI;

/// Odd level N = 2m+1 together with ζ = exp(2πi/N) and its powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    n: usize,
    m: usize,
    zeta_pows: Vec<CNum>,
}

impl Level {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n % 2 == 0 {
            return Err(QhgError::Domain(format!("level must be odd and positive, got {n}")));
        }
        let zeta_pows = (0..n)
            .map(|k| CNum::from_polar(1.0, 2.0 * PI * k as f64 / n as f64))
            .collect();
        Ok(Level { n, m: (n - 1) / 2, zeta_pows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn zeta(&self) -> CNum {
        self.zeta_pows[1 % self.n]
    }

    /// ζ^k for any integer k.
    pub fn zeta_pow(&self, k: i64) -> CNum {
        self.zeta_pows[k.rem_euclid(self.n as i64) as usize]
    }
}

/// Principal logarithm with imaginary part in (−π, π].
///
/// A negative real number with a signed-zero imaginary part maps to +iπ.
pub fn principal_log(z: CNum) -> Result<CNum> {
    if z.re == 0.0 && z.im == 0.0 {
        return Err(QhgError::Domain("log(0)".into()));
    }
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(QhgError::Domain(format!("log of non-finite {z}")));
    }
    Ok(plog(z))
}

// Infallible variant for inputs already known to be nonzero.
pub(crate) fn plog(z: CNum) -> CNum {
    let im = if z.im == 0.0 && z.re < 0.0 { PI } else { z.im.atan2(z.re) };
    CNum::new(z.norm().ln(), im)
}

// log(1 + z) accurate for small |z|; principal branch.
pub(crate) fn log1p_c(z: CNum) -> CNum {
    if z.norm() > 0.5 {
        return plog(CNum::new(1.0, 0.0) + z);
    }
    let (x, y) = (z.re, z.im);
    let re = 0.5 * (2.0 * x + x * x + y * y).ln_1p();
    CNum::new(re, y.atan2(1.0 + x))
}

/// x^{1/N} = exp(log(x)/N), with 0^{1/N} = 0.
pub fn nth_root(z: CNum, n: usize) -> CNum {
    if z.re == 0.0 && z.im == 0.0 {
        return CNum::new(0.0, 0.0);
    }
    (plog(z) / n as f64).exp()
}

/// g(x) = ∏_{j=1}^{N−1} (1 − x ζ^{−j})^{j/N}, each factor through [`nth_root`].
pub fn g_func(x: CNum, level: &Level) -> CNum {
    let n = level.n();
    let mut acc = CNum::new(1.0, 0.0);
    for j in 1..n {
        let base = CNum::new(1.0, 0.0) - x * level.zeta_pow(-(j as i64));
        acc *= nth_root(base, n).powi(j as i32);
    }
    acc
}

/// h(x) = g(x)/g(1).
pub fn h_func(x: CNum, level: &Level) -> CNum {
    g_func(x, level) / g_func(CNum::new(1.0, 0.0), level)
}

/// [x] = N^{−1}(1 − x^N)/(1 − x), equal to 1 at x = 1.
pub fn bracket(x: CNum, level: &Level) -> CNum {
    let n = level.n();
    let one = CNum::new(1.0, 0.0);
    if (x - one).norm() < 1e-14 {
        // geometric sum (1 + x + ... + x^{N−1})/N, continuous through x = 1
        let mut s = CNum::new(0.0, 0.0);
        let mut p = one;
        for _ in 0..n {
            s += p;
            p *= x;
        }
        return s / n as f64;
    }
    (one - x.powi(n as i32)) / (one - x) / n as f64
}

/// ω(u′,v′|n) = ∏_{j=1}^{n mod N} v′/(1 − u′ζ^j).
///
/// Checks u′^N + v′^N = 1 (to 1e−8, relative to the size of the terms).
pub fn omega(u1: CNum, v1: CNum, n: i64, level: &Level) -> Result<CNum> {
    check_fermat(u1, v1, level, 1e-8)?;
    omega_unchecked(u1, v1, n, level)
}

pub(crate) fn check_fermat(u1: CNum, v1: CNum, level: &Level, tol: f64) -> Result<()> {
    let n = level.n() as i32;
    let (un, vn) = (u1.powi(n), v1.powi(n));
    let scale = 1.0f64.max(un.norm()).max(vn.norm());
    let resid = (un + vn - CNum::new(1.0, 0.0)).norm();
    if resid > tol * scale {
        return Err(QhgError::Domain(format!(
            "u'^N + v'^N = 1 violated (residual {resid:.3e})"
        )));
    }
    Ok(())
}

pub(crate) fn omega_unchecked(u1: CNum, v1: CNum, n: i64, level: &Level) -> Result<CNum> {
    let k = n.rem_euclid(level.n() as i64);
    let mut acc = CNum::new(1.0, 0.0);
    for j in 1..=k {
        let den = CNum::new(1.0, 0.0) - u1 * level.zeta_pow(j);
        if den.norm() < 1e-13 {
            return Err(QhgError::Singular(format!("1 − u'ζ^{j} vanishes")));
        }
        acc *= v1 / den;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Quadrature

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> CNum>(f: &F, a: f64, b: f64) -> (CNum, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kron += s * WGK[i];
        if i % 2 == 1 {
            gauss += s * WG[i / 2];
        }
    }
    (kron * h, ((kron - gauss) * h).norm())
}

/// Adaptive Gauss–Kronrod (7/15) integration of a complex-valued f over [a, b].
pub fn integrate<F: Fn(f64) -> CNum>(f: F, a: f64, b: f64, abs_tol: f64) -> CNum {
    let mut total = CNum::new(0.0, 0.0);
    let mut stack = vec![(a, b, abs_tol, 0u32)];
    while let Some((lo, hi, tol, depth)) = stack.pop() {
        let (val, err) = gk15(&f, lo, hi);
        let floor = 64.0 * f64::EPSILON * val.norm();
        if err <= tol.max(floor) || depth >= 50 {
            total += val;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * tol, depth + 1));
            stack.push((mid, hi, 0.5 * tol, depth + 1));
        }
    }
    total
}

/// Integration path 0 → w used by [`rogers_extended`].
///
/// Straight unless the segment comes within 1e−9 of t = 1 (or, away from its start,
/// of t = 0); then 0 → i|w| → w.
pub fn rogers_path(w: CNum) -> Vec<(CNum, CNum)> {
    let zero = CNum::new(0.0, 0.0);
    let one = CNum::new(1.0, 0.0);
    let near_one = dist_to_segment(one, zero, w) < 1e-9;
    if near_one {
        let top = CNum::new(0.0, w.norm());
        vec![(zero, top), (top, w)]
    } else {
        vec![(zero, w)]
    }
}

fn dist_to_segment(p: CNum, a: CNum, b: CNum) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let s = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (a + d * s - p).norm()
}

/// Extended Rogers dilogarithm R(w; f0, f1).
///
/// Evaluated as −π²/6 − ½∫₀^w [log t/(1−t) + log(1−t)/t + iπf0/(1−t)] dt + ½iπ f1 log w
/// along [`rogers_path`], with the logs continued along the path. The f1 part of the
/// integrand, iπ f1/t, is not integrable at 0 and is taken in closed form.
pub fn rogers_extended(w: CNum, f0: i64, f1: i64) -> Result<CNum> {
    let one = CNum::new(1.0, 0.0);
    if w.norm() < 1e-300 || (w - one).norm() < 1e-300 || !w.re.is_finite() || !w.im.is_finite() {
        return Err(QhgError::Domain(format!("Rogers dilogarithm undefined at {w}")));
    }
    let ipf0 = CNum::new(0.0, PI * f0 as f64);
    let mut integral = CNum::new(0.0, 0.0);
    // Branch tracking: on each segment the logs are continued from the start point.
    let mut log_t_prev: Option<CNum> = None;
    let mut log_1mt_prev = CNum::new(0.0, 0.0);
    for (a, b) in rogers_path(w) {
        let d = b - a;
        // offsets so that the continued logs match the previous segment at its end
        let (off_t, off_1mt) = match log_t_prev {
            None => (CNum::new(0.0, 0.0), CNum::new(0.0, 0.0)),
            Some(lt) => (lt - plog(a), log_1mt_prev - log1p_c(-a)),
        };
        let integrand = |s: f64| {
            let t = a + d * s;
            let lt = continued_log(t, a, d, s) + off_t;
            let l1 = log1p_c(-t) + off_1mt;
            let l1 = l1 + unwrap_shift(one - a, -d, s);
            let val = if t.norm() < 1e-300 {
                CNum::new(0.0, 0.0)
            } else {
                lt / (one - t) + l1 / t + ipf0 / (one - t)
            };
            val * d
        };
        integral += integrate(integrand, 0.0, 1.0, 1e-12);
        log_t_prev = Some(continued_log(b, a, d, 1.0) + off_t);
        log_1mt_prev = log1p_c(-b) + off_1mt + unwrap_shift(one - a, -d, 1.0);
    }
    let logw = plog(w);
    Ok(CNum::new(-PI * PI / 6.0, 0.0) - 0.5 * integral
        + CNum::new(0.0, 0.5 * PI * f1 as f64) * logw)
}

// log of t = a + s·d, continued from s=0 (or from 0⁺ when a = 0) along the segment.
fn continued_log(t: CNum, a: CNum, d: CNum, s: f64) -> CNum {
    if a.norm() == 0.0 {
        // t = s·d with s > 0: arg is constant
        return CNum::new(s.ln() + d.norm().ln(), plog(d).im);
    }
    plog(t) + unwrap_shift(a, d, s)
}

// 2πi·k correction making plog(p + s·q) continuous in s from s = 0.
// The segment p + s·q crosses the negative real axis at most once.
fn unwrap_shift(p: CNum, q: CNum, s: f64) -> CNum {
    if q.im == 0.0 || p.im == 0.0 {
        return CNum::new(0.0, 0.0);
    }
    let s0 = -p.im / q.im;
    if s0 <= 0.0 || s0 >= s {
        return CNum::new(0.0, 0.0);
    }
    let x = p.re + s0 * q.re;
    if x >= 0.0 {
        return CNum::new(0.0, 0.0);
    }
    // crossing the cut: upward crossing (Im increasing) drops arg from π to −π
    if q.im > 0.0 {
        CNum::new(0.0, 2.0 * PI)
    } else {
        CNum::new(0.0, -2.0 * PI)
    }
}

/// Lobachevsky function Λ(θ) = −∫₀^θ log|2 sin t| dt.
pub fn lobachevsky(theta: f64) -> f64 {
    // π-periodic and odd: reduce to [0, π/2]
    let mut x = theta.rem_euclid(PI);
    let mut sign = 1.0;
    if x > PI / 2.0 {
        x = PI - x;
        sign = -1.0;
    }
    if x == 0.0 {
        return 0.0;
    }
    let f = |t: f64| CNum::new((2.0 * t.sin()).abs().ln(), 0.0);
    -sign * integrate(f, 0.0, x, 1e-13).re
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> CNum {
        CNum::new(re, im)
    }

    #[test]
    fn log_examples() {
        assert_eq!(principal_log(c(1.0, 0.0)).unwrap(), c(0.0, 0.0));
        let l = principal_log(c(-1.0, 0.0)).unwrap();
        assert!((l - c(0.0, PI)).norm() < 1e-15);
        let l = principal_log(c(-1.0, -0.0)).unwrap();
        assert!((l.im - PI).abs() < 1e-15);
        let l = principal_log(CNum::from_polar(1.0, PI / 3.0)).unwrap();
        assert!((l - c(0.0, PI / 3.0)).norm() < 1e-15);
        assert!(principal_log(c(0.0, 0.0)).is_err());
    }

    #[test]
    fn root_examples() {
        assert_eq!(nth_root(c(0.0, 0.0), 3), c(0.0, 0.0));
        assert!((nth_root(c(1.0, 0.0), 5) - c(1.0, 0.0)).norm() < 1e-15);
        let r = nth_root(c(-1.0, 0.0), 3);
        assert!((r - CNum::from_polar(1.0, PI / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn level_rejects_even() {
        assert!(Level::new(4).is_err());
        assert!(Level::new(0).is_err());
        let l = Level::new(7).unwrap();
        assert_eq!(l.m(), 3);
        assert!((l.zeta().powi(7) - c(1.0, 0.0)).norm() < 1e-13);
        assert_eq!(l.zeta_pow(-1), l.zeta_pow(6));
    }

    #[test]
    fn g_at_one_and_zero() {
        for n in [3, 5, 7, 9] {
            let lv = Level::new(n).unwrap();
            let g1 = g_func(c(1.0, 0.0), &lv);
            assert!((g1.norm_sqr() - n as f64).abs() < 1e-10 * n as f64);
            assert!((g_func(c(0.0, 0.0), &lv) - c(1.0, 0.0)).norm() < 1e-15);
        }
        let lv = Level::new(3).unwrap();
        assert!((h_func(c(1.0, 0.0), &lv) - c(1.0, 0.0)).norm() < 1e-14);
        let h0 = h_func(c(0.0, 0.0), &lv);
        assert!((h0 * g_func(c(1.0, 0.0), &lv) - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn omega_conventions() {
        let lv = Level::new(3).unwrap();
        let u = c(0.3, 0.2);
        let v = nth_root(c(1.0, 0.0) - u.powi(3), 3);
        assert_eq!(omega(u, v, 0, &lv).unwrap(), c(1.0, 0.0));
        assert_eq!(omega(u, v, 3, &lv).unwrap(), c(1.0, 0.0));
        assert_eq!(omega(u, v, 5, &lv).unwrap(), omega(u, v, 2, &lv).unwrap());
        assert_eq!(omega(c(0.0, 0.0), c(1.0, 0.0), 2, &lv).unwrap(), c(1.0, 0.0));
        assert!(omega(u, c(2.0, 0.0), 1, &lv).is_err());
    }

    #[test]
    fn bracket_values() {
        let lv = Level::new(5).unwrap();
        assert!((bracket(c(0.0, 0.0), &lv) - c(0.2, 0.0)).norm() < 1e-15);
        assert!((bracket(c(1.0, 0.0), &lv) - c(1.0, 0.0)).norm() < 1e-15);
        assert!(bracket(lv.zeta(), &lv).norm() < 1e-14);
    }

    // Neumann's closed form with a power-series dilogarithm; valid for |w| < 1 off the cuts.
    fn li2_series(w: CNum) -> CNum {
        let mut s = c(0.0, 0.0);
        let mut p = w;
        for k in 1..4000 {
            s += p / (k * k) as f64;
            p *= w;
            if p.norm() < 1e-18 {
                break;
            }
        }
        s
    }

    fn rogers_oracle(w: CNum, f0: i64, f1: i64) -> CNum {
        let one = c(1.0, 0.0);
        let lw = plog(w);
        let l1w = plog(one - w);
        c(-PI * PI / 6.0, 0.0)
            + li2_series(w)
            + 0.5 * lw * l1w
            + c(0.0, 0.5 * PI) * (f1 as f64 * lw + f0 as f64 * l1w)
    }

    #[test]
    fn rogers_matches_series_oracle() {
        for &(w, f0, f1) in &[
            (c(0.3, 0.4), 0, 0),
            (c(-0.5, 0.2), 1, -2),
            (CNum::from_polar(0.9, PI / 3.0), 0, -1),
            (c(0.2, -0.6), -3, 2),
        ] {
            let r = rogers_extended(w, f0, f1).unwrap();
            let o = rogers_oracle(w, f0, f1);
            assert!((r - o).norm() < 1e-10, "{w}: {r} vs {o}");
        }
    }

    #[test]
    fn rogers_conjugation_symmetry() {
        for &(w, f0, f1) in &[(c(0.3, 0.4), 1, 0), (c(1.7, 0.5), 0, -1), (c(-2.0, 0.3), 2, 1)] {
            let a = rogers_extended(w.conj(), -f0, -f1).unwrap();
            let b = rogers_extended(w, f0, f1).unwrap().conj();
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn rogers_detour_is_used_past_one() {
        assert_eq!(rogers_path(c(2.0, 0.0)).len(), 2);
        assert_eq!(rogers_path(c(0.5, 0.5)).len(), 1);
        let r = rogers_extended(c(2.0, 0.0), 0, 0).unwrap();
        assert!(r.re.is_finite() && r.im.is_finite());
        assert!(rogers_extended(c(1.0, 0.0), 0, 0).is_err());
        assert!(rogers_extended(c(0.0, 0.0), 0, 0).is_err());
    }

    #[test]
    fn rogers_volume_of_regular_tet() {
        // Im R(e^{iπ/3}; 0, −1) = Cl₂(π/3) = Vol(regular ideal)/3·... = 1.01494160640965
        let r = rogers_extended(CNum::from_polar(1.0, PI / 3.0), 0, -1).unwrap();
        assert!((r.im - 1.014_941_606_409_653_6).abs() < 1e-10);
    }

    #[test]
    fn lobachevsky_values() {
        assert_eq!(lobachevsky(0.0), 0.0);
        assert!(lobachevsky(PI).abs() < 1e-14);
        assert!((6.0 * lobachevsky(PI / 3.0) - 2.029_883_212_819_307).abs() < 1e-10);
        // series Λ(θ) = ½ Σ sin(2nθ)/n²
        for &th in &[0.2, 0.7, 1.3, 2.5] {
            let series: f64 = (1..200_000)
                .map(|n| (2.0 * n as f64 * th).sin() / (n as f64).powi(2))
                .sum::<f64>()
                * 0.5;
            assert!((lobachevsky(th) - series).abs() < 1e-5);
        }
    }
}
