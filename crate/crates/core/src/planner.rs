//! Smallest best-`M` feedback that keeps a given share of the full-feedback
//! sum rate.

use crate::asymptotics::sum_rate_asymptotic;
use crate::channel::LinkProfile;
use crate::error::{Error, Result};
use crate::exact_rate::sum_rate_exact;

/// Outcome of one ascending scan over `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackScan {
    /// Smallest `M` whose ratio reaches `eta`.
    pub m: u32,
    /// `C(M)/C(N)` at that `M`.
    pub ratio: f64,
    /// Every evaluated `(M, C(M)/C(N))`, infeasible `M` omitted.
    pub ratios: Vec<(u32, f64)>,
    /// Sum-rate evaluations performed, including `C(N)`.
    pub evaluations: usize,
    /// False if some evaluated ratio decreased with `M`.
    pub monotone: bool,
}

/// Both planners side by side.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    pub m_exact: Option<u32>,
    pub m_asymptotic: Option<u32>,
    pub eta: f64,
    /// Exact ratio at `m_exact`, or the asymptotic one when the exact scan
    /// is unavailable.
    pub ratio_at_m: f64,
    pub evaluations: usize,
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Precondition(format!("eta must lie in (0, 1], got {eta}")));
    }
    Ok(())
}

fn scan<F>(n: u32, eta: f64, label: &str, mut rate: F) -> Result<FeedbackScan>
where
    F: FnMut(u32) -> Result<Option<f64>>,
{
    check_eta(eta)?;
    if n == 0 {
        return Err(Error::Precondition("N must be at least 1".into()));
    }
    let full = rate(n)?.ok_or_else(|| Error::Precondition(format!("{label}: full-feedback rate unavailable")))?;
    let mut evaluations = 1;
    let mut ratios = Vec::new();
    let mut monotone = true;
    for m in 1..=n {
        let ratio = if m == n {
            1.0
        } else {
            evaluations += 1;
            match rate(m)? {
                Some(c) => c / full,
                None => continue,
            }
        };
        if let Some(&(pm, prev)) = ratios.last() {
            if ratio < prev {
                monotone = false;
                log::warn!("{label}: C(M)/C(N) decreases from {prev} at M = {pm} to {ratio} at M = {m}");
            }
        }
        ratios.push((m, ratio));
        if ratio >= eta {
            return Ok(FeedbackScan { m, ratio, ratios, evaluations, monotone });
        }
    }
    unreachable!("M = N always meets eta <= 1")
}

/// Smallest `M` with `C(M)/C(N) ≥ eta` under the exact rate.
pub fn min_feedback_exact(profiles: &[LinkProfile], n: u32, eta: f64) -> Result<FeedbackScan> {
    scan(n, eta, "exact", |m| Ok(Some(sum_rate_exact(profiles, n, m)?.sum_rate)))
}

/// Smallest `M` with `C(M)/C(N) ≥ eta` under the asymptotic rate; `M` with
/// `K·M/N ≤ 1` are skipped.
pub fn min_feedback_asymptotic(profiles: &[LinkProfile], n: u32, eta: f64) -> Result<FeedbackScan> {
    let k = profiles.len() as f64;
    if k <= 1.0 {
        return Err(Error::Precondition(format!(
            "asymptotic planning needs K*M/N > 1 for some M; K = {} users",
            profiles.len()
        )));
    }
    scan(n, eta, "asymptotic", |m| {
        if k * m as f64 / n as f64 <= 1.0 {
            return Ok(None);
        }
        sum_rate_asymptotic(profiles, n, m).map(Some)
    })
}

/// Runs both scans. A failing exact scan is reported as unavailable rather
/// than aborting the asymptotic answer, and vice versa.
pub fn plan_feedback(profiles: &[LinkProfile], n: u32, eta: f64) -> Result<PlanResult> {
    check_eta(eta)?;
    let exact = min_feedback_exact(profiles, n, eta);
    let asym = min_feedback_asymptotic(profiles, n, eta);
    if let (Err(e), Err(_)) = (&exact, &asym) {
        return Err(Error::Precondition(format!("no planner produced a result: {e}")));
    }
    let evaluations = exact.as_ref().map(|s| s.evaluations).unwrap_or(0) + asym.as_ref().map(|s| s.evaluations).unwrap_or(0);
    let ratio_at_m = match (&exact, &asym) {
        (Ok(s), _) => s.ratio,
        (Err(_), Ok(s)) => s.ratio,
        _ => unreachable!(),
    };
    Ok(PlanResult {
        m_exact: exact.ok().map(|s| s.m),
        m_asymptotic: asym.ok().map(|s| s.m),
        eta,
        ratio_at_m,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(k: usize) -> Vec<LinkProfile> {
        (0..k).map(|i| LinkProfile::from_scales(1.0 + 0.3 * i as f64, vec![0.2 + 0.01 * i as f64]).unwrap()).collect()
    }

    #[test]
    fn tiny_eta_gives_one() {
        let s = min_feedback_exact(&cell(6), 8, 1e-9).unwrap();
        assert_eq!(s.m, 1);
    }

    #[test]
    fn unit_eta_gives_n() {
        let s = min_feedback_exact(&cell(3), 8, 1.0).unwrap();
        assert_eq!(s.m, 8);
        assert!(s.monotone);
        assert_eq!(s.ratios.len(), 8);
    }

    #[test]
    fn result_is_minimal() {
        let ps = cell(6);
        for eta in [0.8, 0.95] {
            let s = min_feedback_exact(&ps, 8, eta).unwrap();
            assert!(s.ratio >= eta);
            if s.m > 1 {
                let prev = s.ratios.iter().find(|r| r.0 == s.m - 1).unwrap().1;
                assert!(prev < eta);
            }
        }
    }

    #[test]
    fn asymptotic_skips_infeasible() {
        let ps = cell(3);
        // K·M/N > 1 needs M ≥ 3 with K = 3, N = 8
        let s = min_feedback_asymptotic(&ps, 8, 1e-9).unwrap();
        assert_eq!(s.m, 3);
        assert!(min_feedback_asymptotic(&ps[..1], 8, 0.5).is_err());
    }

    #[test]
    fn bad_eta_rejected() {
        assert!(min_feedback_exact(&cell(2), 4, 0.0).is_err());
        assert!(plan_feedback(&cell(2), 4, 1.5).is_err());
    }

    #[test]
    fn plan_reports_both() {
        let r = plan_feedback(&cell(8), 8, 0.9).unwrap();
        assert!(r.m_exact.is_some() && r.m_asymptotic.is_some());
        assert!(r.ratio_at_m >= 0.9);
        assert!(r.evaluations >= 2);
    }
}
