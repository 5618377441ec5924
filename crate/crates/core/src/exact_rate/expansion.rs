//! Literal multinomial / partial-fraction expansion of `S(x)^(ℓ+1)`.
//!
//! With `β_b = ρ0/ρ_b` and `w_b = ϖ_b·β_b`, the per-block survival is
//! `e^(−x/ρ0)·Σ_b w_b/(x+β_b)`. Raising it to `ℓ+1` and splitting each
//! product `Π_b (x+β_b)^(−j_b)` into partial fractions yields the terms
//! enumerated here.

use crate::channel::{LinkProfile, ProfileKind};
use crate::error::{Error, Result};

/// One `(ℓ, j, b, i)` term of the expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionTerm {
    pub ell: u32,
    pub j_vector: Vec<u32>,
    /// 1-based interferer index of the pole.
    pub b: usize,
    pub i: u32,
    pub psi: f64,
    /// `Π_b w_b^(j_b)`.
    pub scale: f64,
    /// `(ℓ+1)!/Π_b j_b!`.
    pub multinomial: f64,
}

pub(crate) fn betas_and_weights(p: &LinkProfile) -> (Vec<f64>, Vec<f64>) {
    let beta: Vec<f64> = p.rho_int().iter().map(|r| p.rho0() / r).collect();
    let w = beta.iter().enumerate().map(|(b, be)| p.varpi(b + 1).unwrap_or(1.0) * be).collect();
    (beta, w)
}

/// Coefficient of `(x+β_b)^(−i)` in the partial fractions of
/// `Π_c (x+β_c)^(−j_c)`.
///
/// It is the order-`(j_b − i)` Taylor coefficient at `h = x + β_b` of
/// `Π_{c≠b} (β_c − β_b + h)^(−j_c)`.
pub fn psi_coefficients(p: &LinkProfile, j_vector: &[u32], b: usize, i: u32) -> Result<f64> {
    let jn = p.num_interferers();
    if j_vector.len() != jn {
        return Err(Error::Range(format!("j-vector has {} entries for J = {jn}", j_vector.len())));
    }
    if b == 0 || b > jn {
        return Err(Error::Range(format!("pole index {b} outside 1..={jn}")));
    }
    let jb = j_vector[b - 1];
    if i > jb {
        return Err(Error::Range(format!("power index {i} exceeds j_b = {jb}")));
    }
    if i == 0 {
        return Ok(0.0);
    }
    let (beta, _) = betas_and_weights(p);
    let order = (jb - i) as usize;
    let mut series = vec![0.0; order + 1];
    series[0] = 1.0;
    for (c, &jc) in j_vector.iter().enumerate() {
        if c == b - 1 || jc == 0 {
            continue;
        }
        let d = beta[c] - beta[b - 1];
        // (d + h)^(−j) = Σ_n (−1)^n C(j+n−1, n) d^(−j−n) h^n
        let mut factor = vec![0.0; order + 1];
        let mut coef = d.powi(-(jc as i32));
        for (n, f) in factor.iter_mut().enumerate() {
            *f = coef;
            let nf = n as f64;
            coef *= -(jc as f64 + nf) / (nf + 1.0) / d;
        }
        let mut next = vec![0.0; order + 1];
        for a in 0..=order {
            for k in 0..=(order - a) {
                next[a + k] += series[a] * factor[k];
            }
        }
        series = next;
    }
    Ok(series[order])
}

/// All compositions of `total` into `parts` nonnegative integers.
pub fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    fn rec(total: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=total).rev() {
            prefix.push(k);
            rec(total - k, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts == 0 {
        return out;
    }
    rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    out
}

fn multinomial(js: &[u32]) -> f64 {
    let mut acc = 1.0;
    let mut n = 0u32;
    for &j in js {
        for k in 1..=j {
            n += 1;
            acc *= n as f64 / k as f64;
        }
    }
    acc
}

/// Every nonzero term for one `ℓ` of a general profile.
pub fn expansion_terms(p: &LinkProfile, ell: u32) -> Result<Vec<ExpansionTerm>> {
    if p.kind() != ProfileKind::General {
        return Err(Error::Precondition("expansion terms exist only for general profiles".into()));
    }
    let (_, w) = betas_and_weights(p);
    let jn = p.num_interferers();
    let mut out = Vec::new();
    for js in compositions(ell + 1, jn) {
        let scale: f64 = js.iter().zip(&w).map(|(&j, wb)| wb.powi(j as i32)).product();
        let mult = multinomial(&js);
        for b in 1..=jn {
            for i in 1..=js[b - 1] {
                out.push(ExpansionTerm {
                    ell,
                    j_vector: js.clone(),
                    b,
                    i,
                    psi: psi_coefficients(p, &js, b, i)?,
                    scale,
                    multinomial: mult,
                });
            }
        }
    }
    Ok(out)
}

/// Number of `(ℓ, j-vector)` groups for `ℓ = 0..eps−1` with `J` interferers.
pub fn term_groups(eps: u32, j: usize) -> u64 {
    if j == 0 {
        return eps as u64;
    }
    (0..eps as u64)
        .map(|l| {
            // C(ℓ + J, J − 1)
            let (n, k) = (l + j as u64, j as u64 - 1);
            (0..k).fold(1u64, |acc, t| acc * (n - t) / (t + 1))
        })
        .sum()
}
