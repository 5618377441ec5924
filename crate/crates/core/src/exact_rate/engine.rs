//! Multiprecision evaluation of `G(ε)` for `ε = 1..=L`.
//!
//! ```text
//! G(ε) = (1/ln 2) Σ_{ℓ=0}^{ε−1} C(ε, ℓ+1) (−1)^ℓ T_ℓ
//! T_ℓ  = ∫_0^∞ e^(−(ℓ+1)x/ρ0) S(x)^(ℓ+1) / (1+x) dx,   S(x) = Σ_b w_b/(x+β_b)
//! ```
//!
//! For a general profile the multinomial sum over j-vectors is regrouped by
//! pole: with `R_b(h) = Σ_{c≠b} w_c/(β_c−β_b+h)` the coefficient of
//! `(x+β_b)^(−i)` in `S^(ℓ+1)` is
//! `Σ_{j=i}^{ℓ+1} C(ℓ+1, j) w_b^j [h^(j−i)] R_b(h)^(ℓ+1−j)`,
//! the same numbers as the literal expansion in fewer operations.
//!
//! Tables are computed at two precisions 64 bits apart; the result is
//! accepted once they agree to the requested number of bits.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use dashu_int::IBig;

use crate::channel::{LinkProfile, ProfileKind};
use crate::error::{Error, Result};
use crate::feedback::binom;
use crate::hiprec::{expn_scaled_cf, ln2, log2_abs, mp_f64, mp_ibig, mp_int, to_f64, Mp, ScaledFamily};

const MAX_PREC: usize = 12_288;
const GAP: usize = 64;
const MIN_VERIFIED_BITS: usize = 112;

/// Verified table of `G(1..=len)`.
#[derive(Clone, Debug)]
pub(crate) struct GTable {
    pub g: Vec<Mp>,
    pub verified_bits: usize,
    pub rel_err: f64,
    pub prec: usize,
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Key(ProfileKind, u64, Vec<u64>);

fn key(p: &LinkProfile) -> Key {
    Key(p.kind(), p.rho0().to_bits(), p.rho_int().iter().map(|r| r.to_bits()).collect())
}

static CACHE: OnceLock<Mutex<HashMap<Key, Arc<GTable>>>> = OnceLock::new();

/// `G(1..=len)` with relative error below `2^(−target_bits)`, cached per
/// profile.
pub(crate) fn g_table(p: &LinkProfile, len: usize, target_bits: usize) -> Result<Arc<GTable>> {
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let k = key(p);
    // grow geometrically so a sweep over ε rebuilds only a few times, and
    // verify well past binary64 so rate combinations rarely need a rebuild
    let mut len = len.max(8).next_power_of_two();
    let target_bits = target_bits.max(MIN_VERIFIED_BITS);
    if let Some(t) = cache.lock().unwrap().get(&k) {
        if t.g.len() >= len && t.verified_bits >= target_bits {
            return Ok(t.clone());
        }
        len = len.max(t.g.len());
    }
    let t = Arc::new(build_verified(p, len, target_bits)?);
    let mut guard = cache.lock().unwrap();
    if guard.len() > 4096 {
        guard.clear();
    }
    guard.insert(k, t.clone());
    Ok(t)
}

fn build_verified(p: &LinkProfile, len: usize, target: usize) -> Result<GTable> {
    let spread: f64 = p.varpi_all().iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    let guess = len as f64 * (1.0 + spread.log2());
    let mut p1 = target + GAP + guess.ceil() as usize;
    let mut a = g_values(p, len, p1)?;
    loop {
        let p2 = p1 + GAP;
        let b = g_values(p, len, p2)?;
        let mut worst = f64::NEG_INFINITY;
        for (x, y) in a.iter().zip(&b) {
            let d = log2_abs(&(x - y)) - log2_abs(y);
            if d.is_nan() {
                worst = f64::INFINITY;
            } else {
                worst = worst.max(d);
            }
        }
        if worst <= -(target as f64) {
            return Ok(GTable { g: b, verified_bits: target, rel_err: worst.exp2(), prec: p2 });
        }
        if p2 >= MAX_PREC {
            return Err(Error::Cancellation { estimate: worst.exp2() });
        }
        let lost = (p1 as f64 + worst).max(0.0);
        let next = (target as f64 + lost + 32.0).ceil() as usize;
        if next <= p2 {
            p1 = p2;
            a = b;
        } else {
            p1 = next.min(MAX_PREC);
            a = g_values(p, len, p1)?;
        }
        log::debug!("closed form: raising precision to {p1} bits (lost {lost:.0} bits)");
    }
}

/// `G(ε)` for `ε = 1..=len` at working precision `prec`.
pub(crate) fn g_values(p: &LinkProfile, len: usize, prec: usize) -> Result<Vec<Mp>> {
    let t = t_values(p, len, prec)?;
    let inv_ln2 = &mp_int(1, prec) / &ln2(prec);
    let mut out = Vec::with_capacity(len);
    for eps in 1..=len as u32 {
        let mut acc = mp_int(0, prec);
        for l in 0..eps {
            let c = mp_ibig(IBig::from(binom(eps, l + 1)), prec);
            let term = &c * &t[l as usize];
            if l % 2 == 0 {
                acc = &acc + &term;
            } else {
                acc = &acc - &term;
            }
        }
        out.push(&acc * &inv_ln2);
    }
    Ok(out)
}

/// `T_ℓ` (without the `1/ln 2`) for `ℓ = 0..len−1`.
pub(crate) fn t_values(p: &LinkProfile, len: usize, prec: usize) -> Result<Vec<Mp>> {
    match p.kind() {
        ProfileKind::NoiseLimited => {
            let mut fam = ScaledFamily::new(p.rho0(), len, prec);
            Ok((1..=len).map(|k| fam.e1_scaled(k, prec)).collect())
        }
        ProfileKind::InterferenceLimited => Ok(t_interference_limited(p, len, prec)),
        ProfileKind::General => t_general(p, len, prec),
    }
}

/// `T_ℓ = r·h_ℓ`, `h_n = ∫_0^1 (1−t)^n/(1−zt) dt`, `r = ρ0/ρ1`, `z = 1 − r`.
fn t_interference_limited(p: &LinkProfile, len: usize, prec: usize) -> Vec<Mp> {
    let r = &mp_f64(p.rho0(), prec) / &mp_f64(p.rho_int()[0], prec);
    let one = mp_int(1, prec);
    let z = &one - &r;
    let zf = to_f64(&z);
    let mut h = Vec::with_capacity(len);
    if zf.abs() <= 0.5 {
        // h_n = (1/(n+1)) Σ_k z^k k!/((n+2)…(n+k+1))
        let wp = prec + 16;
        let zw = z.clone().with_precision(wp).value();
        for n in 0..len as i64 {
            let mut term = mp_int(1, wp);
            let mut sum = mp_int(1, wp);
            let mut k = 0i64;
            while !crate::hiprec::is_zero(&term) {
                term = &(&term * &zw) * &(&mp_int(k + 1, wp) / &mp_int(n + k + 2, wp));
                sum = &sum + &term;
                if log2_abs(&term) < -(wp as f64) - 4.0 {
                    break;
                }
                k += 1;
            }
            h.push(&sum / &mp_int(n + 1, wp));
        }
    } else {
        // forward recurrence h_n = ((z−1)/z) h_{n−1} + 1/(z n); contracting for z > 1/2
        let growth = ((1.0 - zf) / zf).abs().log2().max(0.0);
        let wp = prec + 16 + (growth * len as f64).ceil() as usize;
        let zw = z.clone().with_precision(wp).value();
        let rw = r.clone().with_precision(wp).value();
        let ratio = &(&zw - &mp_int(1, wp)) / &zw;
        let mut cur = &(-rw.ln()) / &zw;
        h.push(cur.clone());
        for n in 1..len as i64 {
            cur = &(&ratio * &cur) + &(&mp_int(1, wp) / &(&zw * &mp_int(n, wp)));
            h.push(cur.clone());
        }
    }
    h.into_iter().map(|v| (&r * &v).with_precision(prec).value()).collect()
}

/// `e^z E_n(z)` for `n = 1..=nmax` (index `n−1`), by recurrences run in
/// their stable directions. `seed(wp)` returns `e^z E_1(z)` to `wp` bits.
fn expn_table(z: &Mp, nmax: usize, prec: usize, seed: &mut dyn FnMut(usize) -> Mp) -> Vec<Mp> {
    let zf = to_f64(z);
    let mut out = vec![mp_int(0, prec); nmax];
    if zf < 24.0 {
        // upward E_{n+1} = (1 − z E_n)/n; only the first ⌊z⌋ steps amplify
        let mut guard = 16.0;
        for n in 1..nmax {
            guard += (zf / n as f64).log2().max(0.0);
        }
        let wp = prec + guard.ceil() as usize;
        let zw = z.clone().with_precision(wp).value();
        let one = mp_int(1, wp);
        let mut e = seed(wp);
        out[0] = e.clone();
        for n in 1..nmax {
            e = &(&one - &(&zw * &e)) / &mp_int(n as i64, wp);
            out[n] = e.clone();
        }
    } else {
        let n0 = (zf.floor() as usize).clamp(1, nmax);
        let wp = prec + 16;
        let zw = z.clone().with_precision(wp).value();
        let one = mp_int(1, wp);
        out[n0 - 1] = expn_scaled_cf(n0 as i64, &zw, wp);
        for n in (1..n0).rev() {
            // E_n = (1 − n E_{n+1})/z
            out[n - 1] = &(&one - &(&mp_int(n as i64, wp) * &out[n])) / &zw;
        }
        for n in n0..nmax {
            out[n] = &(&one - &(&zw * &out[n - 1])) / &mp_int(n as i64, wp);
        }
    }
    out
}

/// `I1(α, β, γ)` for `γ = 0..=gmax`.
///
/// `e_alpha` holds `e^α E_n(α)` for `n ≥ 1` and may be extended.
/// `z` must equal `αβ`; `seed_alpha(wp)` and `seed_z(wp)` return
/// `e^α E_1(α)` and `e^z E_1(z)` to `wp` bits.
fn i1_table(
    alpha: &Mp,
    beta: &Mp,
    z: &Mp,
    gmax: usize,
    e_alpha: &mut Vec<Mp>,
    prec: usize,
    seed_alpha: &mut dyn FnMut(usize) -> Mp,
    seed_z: &mut dyn FnMut(usize) -> Mp,
) -> Vec<Mp> {
    let bf = to_f64(beta);
    let delta_f = bf - 1.0;
    let one = mp_int(1, prec);
    let delta = beta - &one;
    // I2(α,β,γ) = β^(1−γ) e^(αβ) E_γ(αβ)
    let wp = if delta_f.abs() > 0.25 {
        let per_step = (2.0 * (bf + 1.0) / delta_f.abs()).log2().max(0.0);
        prec + 16 + (per_step * gmax as f64).ceil() as usize
    } else {
        prec + 16
    };
    let en = expn_table(z, gmax.max(1), wp, seed_z);
    if e_alpha.is_empty() {
        e_alpha.push(seed_alpha(wp));
    }
    let inv_beta = &mp_int(1, wp) / &beta.clone().with_precision(wp).value();
    let mut i2 = Vec::with_capacity(gmax + 1);
    i2.push(mp_int(0, wp));
    let mut bp = mp_int(1, wp);
    for g in 1..=gmax {
        i2.push(&bp * &en[g - 1]);
        bp = &bp * &inv_beta;
    }
    let mut i1 = vec![mp_int(0, wp); gmax + 1];
    i1[0] = e_alpha[0].clone();
    if gmax == 0 {
        return i1;
    }
    if delta_f.abs() > 0.25 {
        let dw = delta.with_precision(wp).value();
        for g in 1..=gmax {
            i1[g] = &(&i1[g - 1] - &i2[g]) / &dw;
        }
    } else {
        // I1(α,1+δ,g) = Σ_n (−1)^n C(g+n−1,n) δ^n I2(α,1,g+1+n), then
        // I1(γ−1) = δ·I1(γ) + I2(α,β,γ) downward
        let ad = delta_f.abs();
        let mut nmax = 0usize;
        if ad > 0.0 {
            let mut lt = 0.0f64;
            let mut n = 0usize;
            loop {
                n += 1;
                lt += ((gmax + n - 1) as f64 / n as f64).log2() + ad.log2();
                if n > gmax && lt < -(wp as f64) - 10.0 {
                    break;
                }
            }
            nmax = n;
        }
        let need = gmax + 1 + nmax;
        if e_alpha.len() < need || e_alpha[0].precision() < wp {
            *e_alpha = expn_table(alpha, need, wp, seed_alpha);
        }
        let dw = delta.with_precision(wp).value();
        let mut sum = e_alpha[gmax].clone();
        let mut coef = mp_int(1, wp);
        let gm = gmax as i64;
        for n in 1..=nmax as i64 {
            coef = &(&coef * &dw) * &(&mp_int(-(gm + n - 1), wp) / &mp_int(n, wp));
            sum = &sum + &(&coef * &e_alpha[gmax + n as usize]);
        }
        i1[gmax] = sum;
        for g in (1..=gmax).rev() {
            i1[g - 1] = &(&dw * &i1[g]) + &i2[g];
        }
        i1[0] = e_alpha[0].clone();
    }
    i1
}

fn t_general(p: &LinkProfile, len: usize, prec: usize) -> Result<Vec<Mp>> {
    let jn = p.num_interferers();
    let rho0 = mp_f64(p.rho0(), prec);
    let rho: Vec<Mp> = p.rho_int().iter().map(|&r| mp_f64(r, prec)).collect();
    let beta: Vec<Mp> = rho.iter().map(|r| &rho0 / r).collect();
    let mut w = Vec::with_capacity(jn);
    for b in 0..jn {
        let mut v = mp_int(1, prec);
        for c in 0..jn {
            if c != b {
                v = &v * &(&rho[b] / &(&rho[b] - &rho[c]));
            }
        }
        w.push(&v * &beta[b]);
    }
    // pows[b][k][o] = [h^o] R_b(h)^k, o ≤ len−1−k
    let mut pows: Vec<Vec<Vec<Mp>>> = Vec::with_capacity(jn);
    for b in 0..jn {
        let mut r = vec![mp_int(0, prec); len];
        for c in 0..jn {
            if c == b {
                continue;
            }
            let d = &beta[c] - &beta[b];
            let inv_d = &mp_int(1, prec) / &d;
            let mut t = &w[c] * &inv_d;
            for n in 0..len {
                r[n] = &r[n] + &t;
                t = -(&t * &inv_d);
            }
        }
        let mut table = Vec::with_capacity(len + 1);
        let mut first = vec![mp_int(0, prec); len];
        first[0] = mp_int(1, prec);
        table.push(first);
        if jn > 1 {
            for k in 1..len {
                let prev: &Vec<Mp> = &table[k - 1];
                let size = len - k;
                let mut next = vec![mp_int(0, prec); size];
                for (o, slot) in next.iter_mut().enumerate() {
                    let mut acc = mp_int(0, prec);
                    for a in 0..=o {
                        acc = &acc + &(&prev[a] * &r[o - a]);
                    }
                    *slot = acc;
                }
                table.push(next);
            }
        }
        pows.push(table);
    }
    let mut wpow: Vec<Vec<Mp>> = Vec::with_capacity(jn);
    for wb in &w {
        let mut v = Vec::with_capacity(len + 1);
        v.push(mp_int(1, prec));
        for j in 1..=len {
            let next = &v[j - 1] * wb;
            v.push(next);
        }
        wpow.push(v);
    }
    let mut fam_alpha = ScaledFamily::new(p.rho0(), len, prec + 16);
    let mut fam_z: Vec<ScaledFamily> = p.rho_int().iter().map(|&r| ScaledFamily::new(r, len, prec + 16)).collect();
    let mut out = Vec::with_capacity(len);
    for l in 0..len {
        let lp1 = l + 1;
        let alpha = &mp_int(lp1 as i64, prec) / &rho0;
        let mut e_alpha = Vec::new();
        let mut t = mp_int(0, prec);
        let binoms: Vec<Mp> = (0..=lp1).map(|j| mp_ibig(IBig::from(binom(lp1 as u32, j as u32)), prec)).collect();
        for b in 0..jn {
            let z = &mp_int(lp1 as i64, prec + 16) / &mp_f64(p.rho_int()[b], prec + 16);
            let i1 = i1_table(
                &alpha,
                &beta[b],
                &z,
                lp1,
                &mut e_alpha,
                prec,
                &mut |wp| fam_alpha.e1_scaled(lp1, wp),
                &mut |wp| fam_z[b].e1_scaled(lp1, wp),
            );
            if jn == 1 {
                t = &t + &(&wpow[b][lp1] * &i1[lp1]);
                continue;
            }
            let wbin: Vec<Mp> = (0..=lp1).map(|j| &binoms[j] * &wpow[b][j]).collect();
            for i in 1..=lp1 {
                let mut c = mp_int(0, prec);
                for j in i..=lp1 {
                    let k = lp1 - j;
                    let o = j - i;
                    let pk = &pows[b][k];
                    if o < pk.len() {
                        c = &c + &(&wbin[j] * &pk[o]);
                    }
                }
                t = &t + &(&c * &i1[i]);
            }
        }
        out.push(t.with_precision(prec).value());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_rate::integral_i1;
    use crate::hiprec::e1_scaled;
    use crate::specfun::{adaptive_quad_halfline, QuadratureConfig};

    fn tight() -> QuadratureConfig {
        QuadratureConfig { abs_tol: f64::MIN_POSITIVE, rel_tol: 1e-13, max_subdivisions: 8000 }
    }

    fn t_oracle(p: &LinkProfile, l: usize) -> f64 {
        // ∫ e^((ℓ+1)x/ρ0)-scaled survival power / (1+x)
        adaptive_quad_halfline(|x| p.survival(x).powi(l as i32 + 1) / (1.0 + x), &tight()).unwrap()
    }

    #[test]
    fn t_values_match_quadrature_all_kinds() {
        let profiles = [
            LinkProfile::noise_limited(0.7).unwrap(),
            LinkProfile::interference_limited(3.0, 1.0).unwrap(),
            LinkProfile::interference_limited(1.0, 1.6).unwrap(),
            LinkProfile::interference_limited(1.0, 40.0).unwrap(),
            LinkProfile::interference_limited(1.0, 1.0).unwrap(),
            LinkProfile::from_scales(2.0, vec![1.0]).unwrap(),
            LinkProfile::from_scales(2.0, vec![1.9]).unwrap(),
            LinkProfile::from_scales(5.0, vec![2.0, 0.5]).unwrap(),
            LinkProfile::from_scales(1.0, vec![0.9, 0.8, 0.05]).unwrap(),
        ];
        for p in &profiles {
            let t = t_values(p, 12, 200).unwrap();
            for l in [0usize, 1, 5, 11] {
                let o = t_oracle(p, l);
                let v = to_f64(&t[l]);
                assert!(((v - o) / o).abs() < 1e-10, "{p:?} l={l} v={v} o={o}");
            }
        }
    }

    #[test]
    fn i1_table_matches_binary64() {
        for &(a, b) in &[(0.5, 3.0), (1.0, 1.1), (2.0, 0.95), (0.25, 1.0), (3.0, 0.2), (0.1, 30.0)] {
            let alpha = mp_f64(a, 200);
            let beta = mp_f64(b, 200);
            let z = &alpha * &beta;
            let mut ea = Vec::new();
            let tab = i1_table(
                &alpha,
                &beta,
                &z,
                12,
                &mut ea,
                200,
                &mut |wp| e1_scaled(&alpha, wp),
                &mut |wp| e1_scaled(&z, wp),
            );
            for g in 0..=12u32 {
                let o = integral_i1(a, b, g).unwrap();
                let v = to_f64(&tab[g as usize]);
                assert!(((v - o) / o).abs() < 1e-9, "a={a} b={b} g={g} v={v} o={o}");
            }
        }
    }

    #[test]
    fn expn_table_recurrence_directions_agree() {
        for &z in &[0.3, 5.5, 23.9, 24.0, 80.0] {
            let zm = mp_f64(z, 256);
            let tab = expn_table(&zm, 40, 256, &mut |wp| e1_scaled(&zm, wp));
            for n in [1usize, 7, 23, 40] {
                let cf = expn_scaled_cf(n as i64, &zm, 256);
                if z >= 1.0 {
                    assert!(log2_abs(&(&tab[n - 1] - &cf)) - log2_abs(&cf) < -230.0, "z={z} n={n}");
                }
            }
        }
    }

    #[test]
    fn verified_table_reports_precision() {
        let p = LinkProfile::from_scales(1.0, vec![0.5, 0.45]).unwrap();
        let t = g_table(&p, 40, 60).unwrap();
        assert!(t.rel_err < 2f64.powi(-60));
        assert!(t.g.len() >= 40);
    }
}
