//! The two integral families behind the closed form, in binary64:
//!
//! ```text
//! I2(α, β, γ) = ∫_0^∞ e^(−αx) / (β+x)^γ dx
//! I1(α, β, γ) = ∫_0^∞ e^(−αx) / ((1+x)(β+x)^γ) dx
//! ```

use crate::error::{domain, Result};
use crate::specfun::{adaptive_quad_halfline, exp_integral_e1_scaled, QuadratureConfig};

const FALLBACK_REL: f64 = 1e-9;

fn check(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(domain("integral", format!("alpha and beta must be positive, got ({alpha}, {beta})")));
    }
    Ok(())
}

fn quad_cfg() -> QuadratureConfig {
    QuadratureConfig { abs_tol: f64::MIN_POSITIVE, rel_tol: 1e-12, max_subdivisions: 4000 }
}

/// `I2` with a relative error estimate.
///
/// The upward recursion `I2(γ) = (β^(1−γ) − α·I2(γ−1))/(γ−1)` from
/// `I2(1) = e^(αβ)E1(αβ)` amplifies rounding by `α/(γ−1)` per step; once the
/// tracked error passes 1e−9 the value comes from quadrature instead.
pub fn integral_i2_with_error(alpha: f64, beta: f64, gamma: u32) -> Result<(f64, f64)> {
    check(alpha, beta)?;
    if gamma < 1 {
        return Err(domain("integral_I2", "gamma must be at least 1"));
    }
    let mut v = exp_integral_e1_scaled(alpha * beta)?;
    let mut err = 4.0 * f64::EPSILON * v;
    for g in 2..=gamma {
        let gm1 = (g - 1) as f64;
        let next = (beta.powf(1.0 - g as f64) - alpha * v) / gm1;
        err = alpha / gm1 * err + 2.0 * f64::EPSILON * next.abs().max(beta.powf(1.0 - g as f64) / gm1);
        v = next;
    }
    if v > 0.0 && err / v <= FALLBACK_REL {
        return Ok((v, err / v));
    }
    let q = adaptive_quad_halfline(|x| (-alpha * x).exp() / (beta + x).powi(gamma as i32), &quad_cfg())?;
    Ok((q, 1e-12))
}

/// `∫_0^∞ e^(−αx)/(β+x)^γ dx`.
///
/// ```
/// use bestm_sched::exact_rate::integral_i2;
/// use bestm_sched::specfun::exp_integral_e1;
/// let e = std::f64::consts::E;
/// let v = integral_i2(1.0, 1.0, 2).unwrap();
/// assert!((v - (1.0 - e * exp_integral_e1(1.0).unwrap())).abs() < 1e-14);
/// ```
pub fn integral_i2(alpha: f64, beta: f64, gamma: u32) -> Result<f64> {
    integral_i2_with_error(alpha, beta, gamma).map(|v| v.0)
}

/// `I1` with a relative error estimate.
pub fn integral_i1_with_error(alpha: f64, beta: f64, gamma: u32) -> Result<(f64, f64)> {
    check(alpha, beta)?;
    if gamma == 0 {
        return integral_i2_with_error(alpha, 1.0, 1);
    }
    let delta = beta - 1.0;
    if delta.abs() < 1e-6 {
        // merged pole: (1+x)(1+x+δ)^γ, first-order correction in δ
        let (a, ea) = integral_i2_with_error(alpha, 1.0, gamma + 1)?;
        let (b, eb) = integral_i2_with_error(alpha, 1.0, gamma + 2)?;
        let v = a - gamma as f64 * delta * b;
        let trunc = (gamma as f64 * (gamma as f64 + 1.0) / 2.0) * delta * delta * b;
        return Ok((v, ea.max(eb) + trunc / v));
    }
    // 1/((1+x)(β+x)^γ) = (β−1)^(−γ)/(1+x) − Σ_i (β−1)^(−(γ−i+1))/(β+x)^i
    let (head, eh) = integral_i2_with_error(alpha, 1.0, 1)?;
    let mut v = head / delta.powi(gamma as i32);
    let mut mag = v.abs();
    let mut err = eh * v.abs();
    for i in 1..=gamma {
        let (t, et) = integral_i2_with_error(alpha, beta, i)?;
        let term = t / delta.powi((gamma - i + 1) as i32);
        v -= term;
        mag += term.abs();
        err += et * term.abs();
    }
    let rel = (err + 4.0 * f64::EPSILON * mag) / v.abs();
    if v > 0.0 && rel <= FALLBACK_REL {
        return Ok((v, rel));
    }
    let q = adaptive_quad_halfline(
        |x| (-alpha * x).exp() / ((1.0 + x) * (beta + x).powi(gamma as i32)),
        &quad_cfg(),
    )?;
    Ok((q, 1e-12))
}

/// `∫_0^∞ e^(−αx)/((1+x)(β+x)^γ) dx`.
pub fn integral_i1(alpha: f64, beta: f64, gamma: u32) -> Result<f64> {
    integral_i1_with_error(alpha, beta, gamma).map(|v| v.0)
}
