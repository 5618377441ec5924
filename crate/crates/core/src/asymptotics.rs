//! Extreme-value approximation of the scheduled rate.
//!
//! The rate of the user picked on a resource block behaves like the maximum
//! of `KM/N` draws of `log2(1 + Y)`, so its mean is approximately `a + E0·b`
//! with the Gumbel normalizing constants `a`, `b` read off quantiles of `Y`.

use std::f64::consts::{E, LN_2};

use crate::channel::{LinkProfile, ProfileKind};
use crate::error::{domain, Error, Result};
use crate::feedback::BestMPoly;

/// The Euler–Mascheroni constant `E0` in `a + E0·b`.
pub const EULER_CONSTANT: f64 = crate::specfun::EULER_GAMMA;

/// Location `a` and scale `b` of the limiting Gumbel law, in bits/s/Hz.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizingConstants {
    pub a: f64,
    pub b: f64,
}

impl NormalizingConstants {
    /// Mean of the limiting law, `a + E0·b`.
    pub fn mean(&self) -> f64 {
        self.a + EULER_CONSTANT * self.b
    }
}

/// Quantile of the best-`M` CQI distribution `F_Y`.
pub fn bestm_cdf_inv(p: &LinkProfile, n: u32, m: u32, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(domain("bestm_cdf_inv", format!("probability must lie in (0,1), got {q}")));
    }
    if q > 0.5 {
        return bestm_quantile_from_survival(p, n, m, 1.0 - q);
    }
    let poly = BestMPoly::get(n, m)?;
    let (f, _) = poly.invert(q);
    if !(f > 0.0) {
        return Ok(0.0);
    }
    p.quantile(f)
}

/// The `x` with `1 − F_Y(x) = t`.
fn bestm_quantile_from_survival(p: &LinkProfile, n: u32, m: u32, t: f64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(domain("bestm_cdf_inv", format!("tail probability must lie in (0,1), got {t}")));
    }
    let poly = BestMPoly::get(n, m)?;
    let (_, s) = poly.invert_survival(t);
    if s >= 1.0 {
        return Ok(0.0);
    }
    p.quantile_from_ln_survival(s.ln())
}

fn check_counts(k: f64, n: u32, m: u32) -> Result<()> {
    if n == 0 || m == 0 || m > n {
        return Err(Error::Precondition(format!("need 1 <= M <= N, got M = {m}, N = {n}")));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Precondition(format!("user count must be positive, got {k}")));
    }
    Ok(())
}

/// Gumbel constants for one user among `K` (continuous `K` allowed):
/// `a = log2(1 + F_Y⁻¹(1 − N/(KM)))`,
/// `b = log2((1 + F_Y⁻¹(1 − N/(KMe)))/(1 + F_Y⁻¹(1 − N/(KM))))`.
pub fn normalizing_constants(p: &LinkProfile, k: f64, n: u32, m: u32) -> Result<NormalizingConstants> {
    check_counts(k, n, m)?;
    let t1 = n as f64 / (k * m as f64);
    if t1 >= 1.0 {
        return Err(Error::Precondition(format!(
            "quantile argument 1 - N/(KM) = {} is not in (0,1); need K*M/N > 1",
            1.0 - t1
        )));
    }
    let x1 = bestm_quantile_from_survival(p, n, m, t1)?;
    let x2 = bestm_quantile_from_survival(p, n, m, t1 / E)?;
    let a = x1.ln_1p() / LN_2;
    let b = (x2.ln_1p() - x1.ln_1p()) / LN_2;
    Ok(NormalizingConstants { a, b })
}

/// Closed-form constants for the two simplified profiles under full
/// (`M = N`) or best-1 (`M = 1`) feedback.
pub fn normalizing_constants_closed(p: &LinkProfile, k: f64, n: u32, m: u32) -> Result<NormalizingConstants> {
    check_counts(k, n, m)?;
    if m != 1 && m != n {
        return Err(Error::Precondition(format!("closed forms exist for M = 1 or M = N only, got M = {m}")));
    }
    let nf = n as f64;
    // x(K) = F_Y⁻¹(1 − N/(KM)) expressed through the per-block tail S
    let tail = |kk: f64| -> Result<f64> {
        if m == n {
            if kk <= 1.0 {
                return Err(Error::Precondition(format!("full feedback needs K > 1, got {kk}")));
            }
            Ok(1.0 / kk)
        } else {
            if kk <= nf {
                return Err(Error::Precondition(format!("best-1 feedback needs K > N, got K = {kk}, N = {n}")));
            }
            // 1 − ((K−N)/K)^(1/N) = (K^(1/N) − (K−N)^(1/N))/K^(1/N)
            let r = kk.powf(1.0 / nf);
            Ok((r - (kk - nf).powf(1.0 / nf)) / r)
        }
    };
    let x_of = |s: f64| -> Result<f64> {
        match p.kind() {
            ProfileKind::InterferenceLimited => Ok(p.rho0() / p.rho_int()[0] * (1.0 - s) / s),
            ProfileKind::NoiseLimited => Ok(-p.rho0() * s.ln()),
            ProfileKind::General => Err(Error::Precondition(
                "closed-form normalizing constants need an interference- or noise-limited profile".into(),
            )),
        }
    };
    let x1 = x_of(tail(k)?)?;
    let x2 = x_of(tail(k * E)?)?;
    Ok(NormalizingConstants { a: x1.ln_1p() / LN_2, b: (x2.ln_1p() - x1.ln_1p()) / LN_2 })
}

/// Probability that a resource block receives at least one CQI report,
/// `1 − (1 − M/N)^K0`.
pub fn feedback_success_probability(k0: u32, n: u32, m: u32) -> f64 {
    -(k0 as f64 * (-(m as f64) / n as f64).ln_1p()).exp_m1()
}

/// Asymptotic individual rate `(1/K0)(1 − (1 − M/N)^K0)(a + E0·b)`.
pub fn user_rate_asymptotic(p: &LinkProfile, k0: u32, n: u32, m: u32) -> Result<f64> {
    if k0 == 0 {
        return Err(Error::Precondition("K0 must be at least 1".into()));
    }
    let c = normalizing_constants(p, k0 as f64, n, m)?;
    Ok(feedback_success_probability(k0, n, m) * c.mean() / k0 as f64)
}

/// Asymptotic cell sum rate with `K0 = profiles.len()`.
pub fn sum_rate_asymptotic(profiles: &[LinkProfile], n: u32, m: u32) -> Result<f64> {
    if profiles.is_empty() {
        return Err(Error::Precondition("at least one user profile is required".into()));
    }
    let k0 = profiles.len() as u32;
    let mut total = 0.0;
    for p in profiles {
        total += normalizing_constants(p, k0 as f64, n, m)?.mean();
    }
    Ok(feedback_success_probability(k0, n, m) * total / k0 as f64)
}

/// Domain of attraction probed by [`tail_convergence_diagnostic`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Attraction {
    /// Probed through `d/dx[(1 − F_Y)/f_Y] → 0`.
    Gumbel,
    /// Probed through `x·f_Y/(1 − F_Y) → φ > 0`.
    Frechet,
}

/// Sufficient-condition functional sampled on a geometric grid.
#[derive(Clone, Debug)]
pub struct TailDiagnostic {
    pub attraction: Attraction,
    pub grid: Vec<f64>,
    pub functional: Vec<f64>,
    /// Last sampled value: the limit estimate for the Fréchet functional.
    pub limit_estimate: f64,
    /// Gumbel: `|functional|` over the last decade of the grid is below its
    /// value a decade earlier. Fréchet: the last decade varies by < 1%.
    pub converging: bool,
}

const GRID_POINTS: usize = 49;

/// Evaluates the tail functional that decides the extreme-value type of the
/// best-`M` CQI distribution.
pub fn tail_convergence_diagnostic(p: &LinkProfile, n: u32, m: u32) -> Result<TailDiagnostic> {
    let poly = BestMPoly::get(n, m)?;
    let x_lo = p.quantile(0.5)?;
    let x_hi = p.quantile_from_ln_survival(-28.0)?;
    let ratio = (x_hi / x_lo).powf(1.0 / (GRID_POINTS - 1) as f64);
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| x_lo * ratio.powi(i as i32)).collect();
    // (1 − F_Y)/f_Y with f_Y = (dF_Y/dF)·f
    let mills = |x: f64| {
        let (f, s) = p.cdf_survival(x);
        poly.survival(f, s) / (poly.derivative(f, s) * p.pdf(x))
    };
    let (attraction, functional): (Attraction, Vec<f64>) = match p.kind() {
        ProfileKind::InterferenceLimited => (Attraction::Frechet, grid.iter().map(|&x| x / mills(x)).collect()),
        _ => {
            let d = |x: f64, h: f64| (mills(x + h) - mills(x - h)) / (2.0 * h);
            (
                Attraction::Gumbel,
                grid.iter()
                    .map(|&x| {
                        let h = 1e-4 * x;
                        // Richardson step removes the h² term
                        (4.0 * d(x, 0.5 * h) - d(x, h)) / 3.0
                    })
                    .collect(),
            )
        }
    };
    let per_decade = ((GRID_POINTS - 1) as f64 / (x_hi / x_lo).log10()).round().max(1.0) as usize;
    let last = functional.len() - 1;
    let earlier = last.saturating_sub(per_decade);
    let converging = match attraction {
        Attraction::Gumbel => functional[last].abs() <= functional[earlier].abs() + 1e-9,
        Attraction::Frechet => {
            let lim = functional[last];
            functional[earlier..].iter().all(|v| ((v - lim) / lim).abs() < 1e-2)
        }
    };
    Ok(TailDiagnostic { attraction, limit_estimate: functional[last], grid, functional, converging })
}
