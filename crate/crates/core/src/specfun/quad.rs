//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals and on the
//! half-line.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{domain, Error, Result};

/// Tolerances for the adaptive integrators.
///
/// A result is accepted once the summed error estimate is at most
/// `max(abs_tol, rel_tol * |integral|)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-14, rel_tol: 1e-12, max_subdivisions: 4000 }
    }
}

impl QuadratureConfig {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let cfg = Self { abs_tol, rel_tol, max_subdivisions };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::Config(format!(
                "quadrature tolerances must be positive (abs {}, rel {})",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::Config("max_subdivisions must be at least 1".into()));
        }
        Ok(())
    }

    /// Relative tolerance only; the absolute floor is set negligibly small.
    pub fn relative(rel_tol: f64) -> Self {
        Self { abs_tol: f64::MIN_POSITIVE, rel_tol, max_subdivisions: 4000 }
    }
}

/// Integral value with the integrator's own error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadEstimate {
    pub value: f64,
    pub abs_error: f64,
    pub subdivisions: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    if !res_k.is_finite() {
        return Err(domain("adaptive_quad", format!("non-finite integrand on [{a}, {b}]")));
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((value, err))
}

/// Adaptive integral of `f` over `[a, b]` with its error estimate.
pub fn adaptive_quad_estimate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadEstimate> {
    cfg.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(domain("adaptive_quad", "interval endpoints must be finite"));
    }
    if a == b {
        return Ok(QuadEstimate { value: 0.0, abs_error: 0.0, subdivisions: 0 });
    }
    let (v, e) = gk15(&mut f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let mut frozen: Vec<Segment> = Vec::new();
    let mut subdivisions = 1;
    loop {
        let total: f64 = heap.iter().chain(frozen.iter()).map(|s| s.value).sum();
        let err: f64 = heap.iter().chain(frozen.iter()).map(|s| s.error).sum();
        if err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            return Ok(QuadEstimate { value: total, abs_error: err, subdivisions });
        }
        let worst = match heap.pop() {
            Some(s) => s,
            None => return Err(Error::Convergence { what: "adaptive quadrature", estimate: err }),
        };
        if subdivisions >= cfg.max_subdivisions {
            return Err(Error::Convergence { what: "adaptive quadrature", estimate: err });
        }
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b || (worst.b - worst.a) < 1e3 * f64::EPSILON * mid.abs() {
            frozen.push(worst);
            continue;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid)?;
        let (v2, e2) = gk15(&mut f, mid, worst.b)?;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
        subdivisions += 1;
    }
}

/// Adaptive integral of `f` over `[a, b]`.
pub fn adaptive_quad<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
    adaptive_quad_estimate(f, a, b, cfg).map(|q| q.value)
}

/// Integral of `f` over `[0, ∞)` using `x = t/(1−t)`.
pub fn adaptive_quad_halfline<F: FnMut(f64) -> f64>(mut f: F, cfg: &QuadratureConfig) -> Result<f64> {
    adaptive_quad_halfline_estimate(&mut f, cfg).map(|q| q.value)
}

pub fn adaptive_quad_halfline_estimate<F: FnMut(f64) -> f64>(
    mut f: F,
    cfg: &QuadratureConfig,
) -> Result<QuadEstimate> {
    adaptive_quad_estimate(
        |t| {
            let s = 1.0 - t;
            let v = f(t / s);
            if v == 0.0 {
                0.0
            } else {
                v / (s * s)
            }
        },
        0.0,
        1.0,
        cfg,
    )
}
