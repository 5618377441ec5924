//! Special functions used by the closed-form rate expressions: the
//! exponential integral `E1`, the Beta function, and the `₂F₁(1,1;c;z)`
//! family, plus the adaptive quadrature that serves as their oracle.

mod quad;

pub use quad::{
    adaptive_quad, adaptive_quad_estimate, adaptive_quad_halfline, adaptive_quad_halfline_estimate,
    QuadEstimate, QuadratureConfig,
};

use crate::error::{domain, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_43;

/// Exponential integral `E1(x) = ∫_x^∞ e^(−t)/t dt` for `x > 0`.
///
/// ```
/// let v = bestm_sched::specfun::exp_integral_e1(1.0).unwrap();
/// assert!((v - 0.219_383_934_395_520_3).abs() < 1e-15);
/// ```
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    check_e1_arg(x)?;
    if x < 1.0 {
        Ok(e1_series(x))
    } else {
        Ok(e1_cf_scaled(x) * (-x).exp())
    }
}

/// `e^x·E1(x)`, which stays representable for large `x`.
pub fn exp_integral_e1_scaled(x: f64) -> Result<f64> {
    check_e1_arg(x)?;
    if x < 1.0 {
        Ok(x.exp() * e1_series(x))
    } else {
        Ok(e1_cf_scaled(x))
    }
}

fn check_e1_arg(x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("exp_integral_e1", format!("argument must be positive and finite, got {x}")));
    }
    Ok(())
}

fn e1_series(x: f64) -> f64 {
    // E1(x) = −γ − ln x − Σ_{k≥1} (−x)^k / (k·k!)
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= -x / kf;
        let add = term / kf;
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

fn e1_cf_scaled(x: f64) -> f64 {
    // Modified Lentz evaluation of e^x E1(x) = 1/(x+1− 1²/(x+3− 2²/(x+5− …)))
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Beta function `B(x, y) = ∫_0^1 t^(x−1)(1−t)^(y−1) dt`.
///
/// Integer arguments use the factorial identity, evaluated as a running
/// product so it never overflows.
pub fn beta_fn(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) || !x.is_finite() || !y.is_finite() {
        return Err(domain("beta_fn", format!("arguments must be positive, got ({x}, {y})")));
    }
    if x.fract() == 0.0 && y.fract() == 0.0 && x.min(y) < 1e6 {
        let (m, n) = if x >= y { (x, y as u64) } else { (y, x as u64) };
        let mut v = 1.0 / m;
        for i in 1..n {
            let i = i as f64;
            v *= i / (m + i);
        }
        return Ok(v);
    }
    use statrs::function::gamma::ln_gamma;
    Ok((ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)).exp())
}

/// Gauss hypergeometric function `₂F₁(1,1;c;z)` for integer `c ≥ 2`, `z < 1`.
///
/// Uses the power series when `|z| ≤ 1/2` and the Euler integral
/// `(c−1)∫_0^1 (1−t)^(c−2)/(1−zt) dt` elsewhere.
pub fn hyp2f1_unit_params(c: u32, z: f64) -> Result<f64> {
    if c < 2 {
        return Err(domain("hyp2f1_unit_params", format!("c must be at least 2, got {c}")));
    }
    if !(z < 1.0) || z.is_nan() {
        return Err(domain("hyp2f1_unit_params", format!("z must be below 1, got {z}")));
    }
    let cf = c as f64;
    if z.abs() <= 0.5 {
        let mut sum = 1.0;
        let mut term = 1.0;
        for k in 0..200 {
            let kf = k as f64;
            term *= (kf + 1.0) / (cf + kf) * z;
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return Ok(sum);
    }
    let cfg = QuadratureConfig { abs_tol: f64::MIN_POSITIVE, rel_tol: 2e-13, max_subdivisions: 4000 };
    let p = (c - 2) as i32;
    let v = adaptive_quad(|t| (1.0 - t).powi(p) / (1.0 - z * t), 0.0, 1.0, &cfg)?;
    Ok((cf - 1.0) * v)
}
