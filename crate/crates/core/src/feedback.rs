//! Best-M order-statistics algebra.
//!
//! When a user reports its `M` strongest of `N` resource blocks, the CQI the
//! scheduler sees on a reported block has CDF
//!
//! ```text
//! F_Y = Σ_{m=0}^{M−1} ξ1(N,M,m)·F^(N−m)
//! ```
//!
//! in terms of the per-block CDF `F`. Powers `F_Y^τ` expand with the
//! coefficients `ξ2(N,M,τ,m)`. Both tables are built in exact rational
//! arithmetic and cached per key.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use dashu_int::{IBig, UBig};
use dashu_ratio::RBig;

use crate::channel::LinkProfile;
use crate::error::{Error, Result};
use crate::hiprec;

pub(crate) fn binom(n: u32, k: u32) -> UBig {
    if k > n {
        return UBig::ZERO;
    }
    let k = k.min(n - k);
    let mut acc = UBig::ONE;
    for i in 0..k {
        acc = acc * UBig::from(n - i) / UBig::from(i + 1);
    }
    acc
}

pub(crate) fn rat_to_f64(r: &RBig) -> f64 {
    r.to_f64().value()
}

fn check_nm(n: u32, m: u32) -> Result<()> {
    if m < 1 || m > n {
        return Err(Error::Range(format!("best-M requires 1 <= M <= N, got N={n}, M={m}")));
    }
    Ok(())
}

/// `ξ1(N,M,m)` as an exact rational.
pub fn xi1_exact(n: u32, m_fb: u32, m: u32) -> Result<RBig> {
    check_nm(n, m_fb)?;
    if m >= m_fb {
        return Err(Error::Range(format!("xi1 index m={m} outside 0..{m_fb}")));
    }
    let mut acc = IBig::ZERO;
    for i in m..m_fb {
        let t = IBig::from((m_fb - i) as i64) * IBig::from(binom(n, i)) * IBig::from(binom(i, m));
        if (i - m) % 2 == 0 {
            acc += t;
        } else {
            acc -= t;
        }
    }
    Ok(RBig::from_parts(acc, UBig::from(m_fb)))
}

/// `ξ1(N,M,m) = Σ_{i=m}^{M−1} ((M−i)/M)·C(N,i)·C(i,m)·(−1)^(i−m)`.
///
/// ```
/// assert_eq!(bestm_sched::feedback::xi1(16, 2, 0).unwrap(), -7.0);
/// assert_eq!(bestm_sched::feedback::xi1(16, 2, 1).unwrap(), 8.0);
/// ```
pub fn xi1(n: u32, m_fb: u32, m: u32) -> Result<f64> {
    Ok(rat_to_f64(&xi1_exact(n, m_fb, m)?))
}

/// Scheduler-side CQI CDF as a polynomial in the per-block CDF.
#[derive(Debug)]
pub struct BestMPoly {
    n: u32,
    m: u32,
    xi1_exact: Vec<RBig>,
    xi1: Vec<f64>,
    binom_n: Vec<f64>,
    binom_n1: Vec<f64>,
}

static BESTM_CACHE: OnceLock<Mutex<HashMap<(u32, u32), Arc<BestMPoly>>>> = OnceLock::new();
static POWERED_CACHE: OnceLock<Mutex<HashMap<(u32, u32, u32), Arc<PoweredPoly>>>> = OnceLock::new();

impl BestMPoly {
    pub fn new(n: u32, m: u32) -> Result<Self> {
        check_nm(n, m)?;
        let xi1_exact: Vec<RBig> = (0..m).map(|i| xi1_exact(n, m, i)).collect::<Result<_>>()?;
        let xi1 = xi1_exact.iter().map(rat_to_f64).collect();
        let to_f = |u: UBig| -> f64 { RBig::from(IBig::from(u)).to_f64().value() };
        Ok(Self {
            n,
            m,
            xi1_exact,
            xi1,
            binom_n: (0..=n).map(|i| to_f(binom(n, i))).collect(),
            binom_n1: (0..n).map(|i| to_f(binom(n - 1, i))).collect(),
        })
    }

    /// Shared cached table for `(N, M)`.
    pub fn get(n: u32, m: u32) -> Result<Arc<Self>> {
        let cache = BESTM_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(p) = cache.lock().unwrap().get(&(n, m)) {
            return Ok(p.clone());
        }
        let p = Arc::new(Self::new(n, m)?);
        cache.lock().unwrap().insert((n, m), p.clone());
        Ok(p)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// `ξ1(N,M,m)` for `m = 0..M−1`.
    pub fn xi1(&self) -> &[f64] {
        &self.xi1
    }

    pub fn xi1_exact(&self) -> &[RBig] {
        &self.xi1_exact
    }

    /// `Σ_m ξ1[m]·F^(N−m)` evaluated literally.
    pub fn eval_power_form(&self, f: f64) -> f64 {
        self.xi1.iter().enumerate().map(|(m, c)| c * f.powi((self.n - m as u32) as i32)).sum()
    }

    fn bern(&self, i: u32, f: f64, s: f64) -> f64 {
        self.binom_n[i as usize] * s.powi(i as i32) * f.powi((self.n - i) as i32)
    }

    /// `F_Y` from `F` and `S = 1 − F`.
    ///
    /// Evaluated in the equivalent binomial form
    /// `Σ_{i<M} ((M−i)/M)·C(N,i)·S^i·F^(N−i)`, whose terms are all
    /// nonnegative.
    pub fn cdf(&self, f: f64, s: f64) -> f64 {
        let mf = self.m as f64;
        (0..self.m).map(|i| (mf - i as f64) / mf * self.bern(i, f, s)).sum::<f64>().min(1.0)
    }

    /// `1 − F_Y = Σ_{i≥1} (min(i,M)/M)·C(N,i)·S^i·F^(N−i)`.
    pub fn survival(&self, f: f64, s: f64) -> f64 {
        let mf = self.m as f64;
        (1..=self.n).map(|i| (i.min(self.m) as f64) / mf * self.bern(i, f, s)).sum::<f64>().min(1.0)
    }

    /// `dF_Y/dF = (N/M)·Σ_{j=1}^{M} C(N−1,j−1)·S^(j−1)·F^(N−j)`.
    pub fn derivative(&self, f: f64, s: f64) -> f64 {
        let scale = self.n as f64 / self.m as f64;
        scale
            * (1..=self.m)
                .map(|j| self.binom_n1[(j - 1) as usize] * s.powi((j - 1) as i32) * f.powi((self.n - j) as i32))
                .sum::<f64>()
    }

    /// Inverse of `F ↦ F_Y` on `[0, 1]`, returned as `(F, S)`.
    pub fn invert(&self, q: f64) -> (f64, f64) {
        // F_Y is increasing in F; bisect on S to keep tail resolution.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(1.0 - mid, mid) > q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = 0.5 * (lo + hi);
        (1.0 - s, s)
    }

    /// The `(F, S)` with `1 − F_Y = t`, resolved relative to `t` so that
    /// deep-tail targets keep their precision.
    pub fn invert_survival(&self, t: f64) -> (f64, f64) {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.survival(1.0 - mid, mid) < t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = 0.5 * (lo + hi);
        (1.0 - s, s)
    }
}

/// Coefficients of `F_Y^τ` in powers of `F`.
#[derive(Debug)]
pub struct PoweredPoly {
    n: u32,
    m: u32,
    tau0: u32,
    xi2_exact: Vec<RBig>,
    xi2: Vec<f64>,
}

impl PoweredPoly {
    /// Builds the table through the power-series recursion.
    pub fn new(n: u32, m: u32, tau0: u32) -> Result<Self> {
        check_nm(n, m)?;
        if tau0 < 1 {
            return Err(Error::Range("tau0 must be at least 1".into()));
        }
        let base = BestMPoly::get(n, m)?;
        let xi2_exact = xi2_recursion(base.xi1_exact(), tau0)?;
        let xi2 = xi2_exact.iter().map(rat_to_f64).collect();
        Ok(Self { n, m, tau0, xi2_exact, xi2 })
    }

    pub fn get(n: u32, m: u32, tau0: u32) -> Result<Arc<Self>> {
        let cache = POWERED_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(p) = cache.lock().unwrap().get(&(n, m, tau0)) {
            return Ok(p.clone());
        }
        let p = Arc::new(Self::new(n, m, tau0)?);
        cache.lock().unwrap().insert((n, m, tau0), p.clone());
        Ok(p)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn tau0(&self) -> u32 {
        self.tau0
    }

    /// `ξ2(N,M,τ0,m)` for `m = 0..=τ0(M−1)`.
    pub fn xi2(&self) -> &[f64] {
        &self.xi2
    }

    pub fn xi2_exact(&self) -> &[RBig] {
        &self.xi2_exact
    }
}

/// Power-series recursion for the coefficients of `(Σ a_ℓ t^ℓ)^τ`:
/// `b_0 = a_0^τ`, `b_m = (1/(m·a_0))·Σ_{ℓ=1}^{min(m,M−1)} ((τ+1)ℓ − m)·a_ℓ·b_{m−ℓ}`.
///
/// Leading zero coefficients are factored out as `t^(sτ)` first, so the
/// division is always by a nonzero `a_s`.
pub fn xi2_recursion(a: &[RBig], tau0: u32) -> Result<Vec<RBig>> {
    if a.is_empty() || tau0 < 1 {
        return Err(Error::Range("empty coefficient list or tau0 < 1".into()));
    }
    let deg = a.len() - 1;
    let len = tau0 as usize * deg + 1;
    let Some(shift) = a.iter().position(|c| *c != RBig::ZERO) else {
        return Ok(vec![RBig::ZERO; len]);
    };
    let a = &a[shift..];
    let deg = a.len() - 1;
    let mut b = vec![RBig::ZERO; shift * tau0 as usize];
    let base = b.len();
    let mut b0 = RBig::ONE;
    for _ in 0..tau0 {
        b0 = &b0 * &a[0];
    }
    b.push(b0);
    let tp1 = tau0 as i64 + 1;
    for m in 1..=tau0 as usize * deg {
        let mut acc = RBig::ZERO;
        for l in 1..=m.min(deg) {
            let w = tp1 * l as i64 - m as i64;
            if w != 0 {
                acc += RBig::from(IBig::from(w)) * &a[l] * &b[base + m - l];
            }
        }
        let denom = RBig::from(IBig::from(m as i64)) * &a[0];
        b.push(acc / denom);
    }
    debug_assert_eq!(b.len(), len);
    Ok(b)
}

/// `(Σ a_ℓ t^ℓ)^τ` by repeated convolution.
pub fn xi2_convolution(a: &[RBig], tau0: u32) -> Vec<RBig> {
    let mut acc = vec![RBig::ONE];
    for _ in 0..tau0 {
        let mut next = vec![RBig::ZERO; acc.len() + a.len() - 1];
        for (i, x) in acc.iter().enumerate() {
            for (j, y) in a.iter().enumerate() {
                next[i + j] += x * y;
            }
        }
        acc = next;
    }
    acc
}

/// `ξ2(N,M,τ0,m)`.
pub fn xi2(n: u32, m_fb: u32, tau0: u32, m: u32) -> Result<f64> {
    let p = PoweredPoly::get(n, m_fb, tau0)?;
    p.xi2().get(m as usize).copied().ok_or_else(|| {
        Error::Range(format!("xi2 index m={m} outside 0..={}", p.xi2().len() - 1))
    })
}

/// CDF of a reported CQI value.
pub fn bestm_cdf(p: &LinkProfile, n: u32, m: u32, x: f64) -> Result<f64> {
    let poly = BestMPoly::get(n, m)?;
    let (f, s) = p.cdf_survival(x);
    Ok(poly.cdf(f, s))
}

/// `P(|U| = τ0)` for `K` users each reporting a given block with
/// probability `M/N`.
pub fn feedback_count_pmf(k: u32, m: u32, n: u32, tau0: u32) -> Result<f64> {
    check_nm(n, m)?;
    if tau0 > k {
        return Err(Error::Range(format!("tau0={tau0} exceeds K={k}")));
    }
    if m == n {
        return Ok(if tau0 == k { 1.0 } else { 0.0 });
    }
    let p = m as f64 / n as f64;
    let lc = statrs::function::factorial::ln_binomial(k as u64, tau0 as u64);
    Ok((lc + tau0 as f64 * p.ln() + (k - tau0) as f64 * (-p).ln_1p()).exp())
}

/// The same PMF as an exact rational.
pub fn feedback_count_pmf_exact(k: u32, m: u32, n: u32, tau0: u32) -> Result<RBig> {
    check_nm(n, m)?;
    if tau0 > k {
        return Err(Error::Range(format!("tau0={tau0} exceeds K={k}")));
    }
    let num = IBig::from(binom(k, tau0)) * IBig::from(m).pow(tau0 as usize) * IBig::from(n - m).pow((k - tau0) as usize);
    Ok(RBig::from_parts(num, UBig::from(n).pow(k as usize)))
}

/// `F_Y(x)^τ0` through the `ξ2` expansion.
pub fn selected_cdf_conditional(p: &LinkProfile, n: u32, m: u32, tau0: u32, x: f64) -> Result<f64> {
    let poly = PoweredPoly::get(n, m, tau0)?;
    let f = p.cdf(x);
    // The coefficients alternate and grow quickly with τ0, so the sum is
    // formed in extended precision from the exact rationals.
    let spread: f64 = poly.xi2().iter().map(|c| c.abs()).sum::<f64>().max(1.0);
    let prec = 80 + spread.log2().ceil() as usize;
    let fm = hiprec::mp_f64(f, prec);
    let mut acc = hiprec::mp_int(0, prec);
    for c in poly.xi2_exact() {
        acc = &(&acc * &fm) + &c.to_float::<dashu_float::round::mode::HalfEven, 2>(prec).value();
    }
    let tail = (n * tau0) as usize + 1 - poly.xi2_exact().len();
    Ok(hiprec::to_f64(&acc) * f.powi(tail as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn r(v: i64) -> RBig {
        RBig::from(IBig::from(v))
    }

    #[test]
    fn xi1_examples() {
        for n in 1..40 {
            assert_eq!(xi1(n, 1, 0).unwrap(), 1.0);
        }
        assert_eq!(xi1(16, 2, 0).unwrap(), -7.0);
        assert_eq!(xi1(16, 2, 1).unwrap(), 8.0);
        let s: RBig = (0..4).map(|m| xi1_exact(16, 4, m).unwrap()).fold(RBig::ZERO, |a, b| a + b);
        assert_eq!(s, RBig::ONE);
        assert!(xi1(16, 4, 4).is_err());
        assert!(xi1(4, 5, 0).is_err());
    }

    #[test]
    fn xi1_m2_matches_order_statistics() {
        // F_Y = F^N + (N/2) F^(N−1)(1−F) for best-2 reporting
        for n in 2..30u32 {
            let a = xi1_exact(n, 2, 0).unwrap();
            let b = xi1_exact(n, 2, 1).unwrap();
            let half_n = RBig::from_parts(IBig::from(n), UBig::from(2u8));
            assert_eq!(a, RBig::ONE - &half_n);
            assert_eq!(b, half_n);
        }
    }

    #[test]
    fn xi2_examples() {
        let p = PoweredPoly::new(16, 2, 2).unwrap();
        assert_eq!(p.xi2_exact(), &[r(49), r(-112), r(64)]);
        for m_fb in 1..=6 {
            let base = BestMPoly::new(16, m_fb).unwrap();
            let one = PoweredPoly::new(16, m_fb, 1).unwrap();
            assert_eq!(one.xi2_exact(), base.xi1_exact());
        }
    }

    #[test]
    fn recursion_handles_vanishing_constant_term() {
        // ξ1(2, 2, 0) = 1 − 1 = 0
        let base = BestMPoly::new(2, 2).unwrap();
        assert_eq!(base.xi1_exact()[0], RBig::ZERO);
        for tau in 1..=4 {
            assert_eq!(xi2_recursion(base.xi1_exact(), tau).unwrap(), xi2_convolution(base.xi1_exact(), tau));
        }
        let zeros = [RBig::ZERO, RBig::ZERO];
        assert_eq!(xi2_recursion(&zeros, 3).unwrap(), vec![RBig::ZERO; 4]);
    }

    #[test]
    fn xi2_recursion_equals_convolution() {
        for n in [1u32, 2, 5, 8, 16, 23, 32] {
            for m in 1..=n.min(8) {
                let base = BestMPoly::new(n, m).unwrap();
                for tau in 1..=6 {
                    let conv = xi2_convolution(base.xi1_exact(), tau);
                    assert_eq!(xi2_recursion(base.xi1_exact(), tau).unwrap(), conv, "N={n} M={m} tau={tau}");
                    let s = conv.iter().fold(RBig::ZERO, |a, b| a + b);
                    assert_eq!(s, RBig::ONE);
                }
            }
        }
    }

    #[test]
    fn full_feedback_powers_are_monomials() {
        // M = N ≥ 2 gives F_Y = F, so ξ1(N,N,0) = 0
        let base = BestMPoly::new(4, 4).unwrap();
        assert_eq!(base.xi1_exact()[0], RBig::ZERO);
        let p = PoweredPoly::new(4, 4, 2).unwrap();
        let mut expect = vec![0.0; 7];
        expect[6] = 1.0;
        assert_eq!(p.xi2(), &expect[..]);
    }

    #[test]
    fn bestm_cdf_identities() {
        let p = LinkProfile::from_scales(3.0, vec![1.0, 0.2]).unwrap();
        for i in 0..30 {
            let x = 0.3 * i as f64;
            let f = p.cdf(x);
            assert!((bestm_cdf(&p, 16, 16, x).unwrap() - f).abs() < 1e-14);
            assert!((bestm_cdf(&p, 16, 1, x).unwrap() - f.powi(16)).abs() < 1e-14);
            let poly = BestMPoly::get(16, 5).unwrap();
            let (f, s) = p.cdf_survival(x);
            assert!((poly.cdf(f, s) - poly.eval_power_form(f)).abs() < 1e-12);
            assert!((poly.cdf(f, s) + poly.survival(f, s) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn bestm_cdf_noise_limited_example() {
        let p = LinkProfile::noise_limited(1.0).unwrap();
        let x = 2f64.ln();
        let v = bestm_cdf(&p, 16, 2, x).unwrap();
        let expect = -7.0 * 0.5f64.powi(16) + 8.0 * 0.5f64.powi(15);
        assert!((v - expect).abs() < 1e-15);
        assert!((v - 1.373e-4).abs() < 1e-7);
    }

    #[test]
    fn bestm_cdf_matches_simulated_order_statistics() {
        // Report the best 2 of 16 uniform draws, keep one at random.
        let poly = BestMPoly::get(16, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 200_000;
        let grid = [0.8, 0.9, 0.95, 0.98];
        let mut hits = [0u32; 4];
        let mut u = [0.0f64; 16];
        for _ in 0..trials {
            for v in u.iter_mut() {
                *v = rng.random();
            }
            u.sort_by(|a, b| b.total_cmp(a));
            let y = u[rng.random_range(0..2)];
            for (h, &g) in hits.iter_mut().zip(&grid) {
                if y <= g {
                    *h += 1;
                }
            }
        }
        for (h, &g) in hits.iter().zip(&grid) {
            let emp = *h as f64 / trials as f64;
            let q = poly.cdf(g, 1.0 - g);
            let se = (q * (1.0 - q) / trials as f64).sqrt();
            assert!((emp - q).abs() < 4.0 * se, "F={g} emp={emp} q={q}");
        }
    }

    #[test]
    fn pmf_examples() {
        assert!((feedback_count_pmf(2, 8, 16, 1).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(feedback_count_pmf(7, 16, 16, 7).unwrap(), 1.0);
        assert_eq!(feedback_count_pmf(7, 16, 16, 3).unwrap(), 0.0);
        let s: f64 = (0..=10).map(|t| feedback_count_pmf(10, 3, 16, t).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-14);
        for t in 0..=10 {
            let e = rat_to_f64(&feedback_count_pmf_exact(10, 3, 16, t).unwrap());
            assert!((e - feedback_count_pmf(10, 3, 16, t).unwrap()).abs() < 1e-15);
        }
        assert!(feedback_count_pmf(3, 1, 16, 4).is_err());
    }

    #[test]
    fn selected_cdf_examples() {
        let p = LinkProfile::from_scales(2.0, vec![0.5]).unwrap();
        for i in 0..20 {
            let x = 0.5 * i as f64;
            let b = bestm_cdf(&p, 16, 2, x).unwrap();
            assert!((selected_cdf_conditional(&p, 16, 2, 1, x).unwrap() - b).abs() < 1e-12);
            assert!((selected_cdf_conditional(&p, 16, 2, 2, x).unwrap() - b * b).abs() < 1e-12);
        }
        let nl = LinkProfile::noise_limited(1e-3).unwrap();
        assert!((selected_cdf_conditional(&nl, 16, 3, 4, 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invert_round_trip() {
        let poly = BestMPoly::get(16, 4).unwrap();
        for q in [1e-6, 0.1, 0.5, 0.9, 0.999999] {
            let (f, s) = poly.invert(q);
            assert!((poly.cdf(f, s) - q).abs() < 1e-13);
        }
    }
}
