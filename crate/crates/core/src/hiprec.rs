//! Multiprecision primitives for the closed-form rate engine.
//!
//! The alternating sums behind `G_k(ε)` cancel far beyond what binary64 can
//! absorb, so the engine evaluates them with binary floating point of
//! adjustable precision (`dashu-float`) and raises the precision until two
//! evaluations agree.

use std::sync::Mutex;

use dashu_base::Approximation;
use dashu_float::{round::mode::HalfEven, FBig};
use dashu_int::IBig;

pub(crate) type Mp = FBig<HalfEven, 2>;

pub(crate) fn mp_f64(x: f64, prec: usize) -> Mp {
    Mp::try_from(x).expect("finite f64").with_precision(prec).value()
}

pub(crate) fn mp_int(n: i64, prec: usize) -> Mp {
    Mp::from(n).with_precision(prec).value()
}

pub(crate) fn mp_ibig(n: IBig, prec: usize) -> Mp {
    Mp::from(n).with_precision(prec).value()
}

pub(crate) fn to_f64(x: &Mp) -> f64 {
    match x.to_f64() {
        Approximation::Exact(v) => v,
        Approximation::Inexact(v, _) => v,
    }
}


pub(crate) fn is_zero(x: &Mp) -> bool {
    x.repr().is_zero()
}

/// `log2 |x|`, or `-inf` at zero.
pub(crate) fn log2_abs(x: &Mp) -> f64 {
    if is_zero(x) {
        return f64::NEG_INFINITY;
    }
    let r = x.repr();
    let digits = r.digits() as f64;
    // leading bits of the significand give the fractional part
    let v = to_f64(&x.clone().with_precision(53).value()).abs();
    if v.is_finite() && v > 0.0 {
        v.log2()
    } else {
        digits + r.exponent() as f64
    }
}

pub(crate) fn ln2(prec: usize) -> Mp {
    mp_int(2, prec + 8).ln().with_precision(prec).value()
}

static EULER_CACHE: Mutex<Option<Mp>> = Mutex::new(None);

/// Euler–Mascheroni constant to `prec` bits (Brent–McMillan).
pub(crate) fn euler_gamma(prec: usize) -> Mp {
    {
        let guard = EULER_CACHE.lock().unwrap();
        if let Some(g) = guard.as_ref() {
            if g.precision() >= prec {
                return g.clone().with_precision(prec).value();
            }
        }
    }
    let g = brent_mcmillan(prec.max(256));
    let out = g.clone().with_precision(prec).value();
    *EULER_CACHE.lock().unwrap() = Some(g);
    out
}

fn brent_mcmillan(prec: usize) -> Mp {
    // γ = A/B − ln n + O(e^(−4n)), A = Σ (n^k/k!)² H_k, B = Σ (n^k/k!)²
    let n = ((prec as f64 + 16.0) * std::f64::consts::LN_2 / 4.0).ceil() as i64 + 1;
    let wp = prec + 64;
    let n2 = mp_int(n * n, wp);
    let mut term = mp_int(1, wp);
    let mut harmonic = mp_int(0, wp);
    let mut a = mp_int(0, wp);
    let mut b = mp_int(1, wp);
    let tol = -(wp as f64) - 8.0;
    let mut k: i64 = 1;
    loop {
        let kk = mp_int(k * k, wp);
        term = &(&term * &n2) / &kk;
        harmonic = &harmonic + &(&mp_int(1, wp) / &mp_int(k, wp));
        a = &a + &(&term * &harmonic);
        b = &b + &term;
        if k > 3 * n && log2_abs(&term) - log2_abs(&b) < tol {
            break;
        }
        k += 1;
    }
    let ln_n = mp_int(n, wp).ln();
    (&(&a / &b) - &ln_n).with_precision(prec).value()
}

/// `e^x·E1(x)` for `x > 0` to `prec` bits.
#[cfg(test)]
pub(crate) fn e1_scaled(x: &Mp, prec: usize) -> Mp {
    if to_f64(x) < SERIES_LIMIT {
        let wp = series_precision(x, prec);
        let xw = x.clone().with_precision(wp).value();
        e1_scaled_parts(&xw, &xw.clone().ln(), &xw.exp(), prec)
    } else {
        expn_scaled_cf(1, x, prec)
    }
}

/// Below this argument `e^x·E1(x)` is summed from its power series.
pub(crate) const SERIES_LIMIT: f64 = 24.0;

/// Working precision the power series needs at `x`.
pub(crate) fn series_precision(x: &Mp, prec: usize) -> usize {
    prec + (3.0 * to_f64(x)).ceil() as usize + 40
}

/// `e^x·E1(x)` from caller-supplied `ln x` and `e^x` (both at
/// [`series_precision`]); falls back to the continued fraction above
/// [`SERIES_LIMIT`].
pub(crate) fn e1_scaled_parts(x: &Mp, ln_x: &Mp, exp_x: &Mp, prec: usize) -> Mp {
    let xf = to_f64(x);
    debug_assert!(xf > 0.0);
    if xf >= SERIES_LIMIT {
        return expn_scaled_cf(1, x, prec);
    }
    // e^x·(−γ − ln x − Σ_{k≥1} (−x)^k/(k·k!))
    let wp = series_precision(x, prec);
    let xw = x.clone().with_precision(wp).value();
    let mut term = mp_int(1, wp);
    let mut sum = mp_int(0, wp);
    let tol = -(wp as f64) - 4.0;
    let mut k: i64 = 1;
    loop {
        term = &(&term * &xw) / &mp_int(-k, wp);
        let add = &term / &mp_int(k, wp);
        sum = &sum + &add;
        if log2_abs(&add) < tol {
            break;
        }
        k += 1;
    }
    let e1 = &(&(-euler_gamma(wp)) - ln_x) - &sum;
    (&e1 * exp_x).with_precision(prec).value()
}

static LN_INT_CACHE: Mutex<Vec<Option<Mp>>> = Mutex::new(Vec::new());

/// `ln k` to `prec` bits, cached.
pub(crate) fn ln_int(k: u32, prec: usize) -> Mp {
    let idx = k as usize;
    {
        let guard = LN_INT_CACHE.lock().unwrap();
        if let Some(Some(v)) = guard.get(idx) {
            if v.precision() >= prec {
                return v.clone().with_precision(prec).value();
            }
        }
    }
    // round the stored precision up so nearby requests reuse it
    let store = prec.div_ceil(256) * 256;
    let v = mp_int(k as i64, store + 8).ln().with_precision(store).value();
    let mut guard = LN_INT_CACHE.lock().unwrap();
    if guard.len() <= idx {
        guard.resize(idx + 1, None);
    }
    guard[idx] = Some(v.clone());
    v.with_precision(prec).value()
}

/// Arguments `x_k = k/ρ` for `k = 1, 2, …` with `ln x_k` and `e^(x_k)`
/// assembled from one logarithm and one exponential.
pub(crate) struct ScaledFamily {
    rho: f64,
    c: Mp,
    ln_c: Mp,
    exp_c: Mp,
    exp_pows: Vec<Mp>,
    wp: usize,
}

impl ScaledFamily {
    /// The family `c = 1/rho`, covering `k ≤ kmax` at output precision
    /// `prec`; asking for more later rebuilds it.
    pub(crate) fn new(rho: f64, kmax: usize, prec: usize) -> Self {
        let top = (kmax as f64 / rho).min(SERIES_LIMIT);
        let wp = prec + (3.0 * top).ceil() as usize + 56;
        let c = &mp_int(1, wp) / &mp_f64(rho, wp);
        Self { rho, ln_c: c.clone().ln(), exp_c: c.clone().exp(), c, exp_pows: vec![mp_int(1, wp)], wp }
    }

    fn arg(&self, k: usize) -> Mp {
        &mp_int(k as i64, self.wp) * &self.c
    }

    /// `e^(x_k)·E1(x_k)` to `prec` bits.
    pub(crate) fn e1_scaled(&mut self, k: usize, prec: usize) -> Mp {
        let x = self.arg(k);
        if to_f64(&x) >= SERIES_LIMIT {
            return expn_scaled_cf(1, &x, prec);
        }
        if series_precision(&x, prec) + 8 > self.wp {
            *self = Self::new(self.rho, k.max(self.exp_pows.len()), prec);
        }
        while self.exp_pows.len() <= k {
            let next = self.exp_pows.last().unwrap() * &self.exp_c;
            self.exp_pows.push(next);
        }
        let ln_x = &ln_int(k as u32, self.wp) + &self.ln_c;
        e1_scaled_parts(&x, &ln_x, &self.exp_pows[k], prec)
    }
}

/// `e^x·E_n(x)` by the continued fraction, valid for `x ≥ 1`, `n ≥ 1`.
pub(crate) fn expn_scaled_cf(n: i64, x: &Mp, prec: usize) -> Mp {
    // E_n(x) e^x = 1/(x+n− 1·n/(x+n+2− 2(n+1)/(x+n+4− …))), modified Lentz
    let wp = prec + 32;
    let xw = x.clone().with_precision(wp).value();
    let one = mp_int(1, wp);
    let mut b = &xw + &mp_int(n, wp);
    let mut c: Option<Mp> = None;
    let mut d = &one / &b;
    let mut h = d.clone();
    let tol = -(wp as f64);
    for i in 1..200_000i64 {
        let an = mp_int(-i * (n - 1 + i), wp);
        b = &b + &mp_int(2, wp);
        d = &one / &(&(&an * &d) + &b);
        let cn = match &c {
            None => b.clone(),
            Some(c) => &b + &(&an / c),
        };
        let del = &cn * &d;
        h = &h * &del;
        c = Some(cn);
        if log2_abs(&(&del - &one)) < tol {
            break;
        }
    }
    h.with_precision(prec).value()
}
