//! Monte Carlo simulation of best-`M` feedback and per-block scheduling.
//!
//! Every drop gets its own ChaCha stream derived from the master seed and
//! the drop index; drops run in parallel and are reduced in index order, so
//! results do not depend on the thread count. Channel draws and tie-break
//! draws use separate streams, which keeps the fading realisations identical
//! across policies for paired comparisons.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{drop_users, fixed_user_links, LinkProfile, Scenario};
use crate::error::{Error, Result};
use crate::feedback::BestMPoly;

/// Scheduling rule applied on each resource block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Largest value of the owner's best-`M` CDF at the reported CQI.
    Cdf,
    /// Largest raw reported CQI.
    Greedy,
    /// Cyclic assignment that ignores feedback.
    RoundRobin,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Cdf, Policy::Greedy, Policy::RoundRobin];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Cdf => "cdf",
            Policy::Greedy => "greedy",
            Policy::RoundRobin => "round_robin",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cdf" => Ok(Policy::Cdf),
            "greedy" => Ok(Policy::Greedy),
            "round_robin" | "round-robin" | "rr" => Ok(Policy::RoundRobin),
            other => Err(Error::Config(format!("unknown policy `{other}` (cdf, greedy, round_robin)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub num_drops: usize,
    pub slots_per_drop: usize,
    pub policy: Policy,
    pub m: u32,
    pub master_seed: u64,
    /// Worker threads; 0 uses the rayon default.
    pub threads_hint: usize,
}

impl SimConfig {
    pub fn new(policy: Policy, m: u32) -> Self {
        Self { num_drops: 100, slots_per_drop: 1000, policy, m, master_seed: 0, threads_hint: 0 }
    }

    pub fn validate(&self, n: u32) -> Result<()> {
        if self.num_drops == 0 || self.slots_per_drop == 0 {
            return Err(Error::Config("num_drops and slots_per_drop must be at least 1".into()));
        }
        if self.m == 0 || self.m > n {
            return Err(Error::Config(format!("M = {} outside 1..={n}", self.m)));
        }
        Ok(())
    }
}

/// Running mean and variance, mergeable in a fixed order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

const FAIRNESS_BATCHES: usize = 20;

/// Accumulators of one drop.
#[derive(Clone, Debug, PartialEq)]
pub struct DropStats {
    pub per_user_rate_sum: Vec<f64>,
    pub assignment_counts: Vec<u64>,
    pub outage_rb_count: u64,
    pub slots: u64,
    pub num_rb: u32,
    /// Per-slot sum rate per resource block.
    pub slot_sum_rate: Moments,
    /// Per-slot fraction of blocks in outage.
    pub slot_outage: Moments,
    /// Per-slot rate of each user per resource block.
    pub slot_user_rate: Vec<Moments>,
    /// Assignment counts over contiguous slot batches (jackknife units).
    pub batch_counts: Vec<Vec<u64>>,
}

impl DropStats {
    fn new(k0: usize, n: u32, slots: usize) -> Self {
        let batches = FAIRNESS_BATCHES.min(slots);
        Self {
            per_user_rate_sum: vec![0.0; k0],
            assignment_counts: vec![0; k0],
            outage_rb_count: 0,
            slots: 0,
            num_rb: n,
            slot_sum_rate: Moments::default(),
            slot_outage: Moments::default(),
            slot_user_rate: vec![Moments::default(); k0],
            batch_counts: vec![vec![0; k0]; batches],
        }
    }

    fn blocks(&self) -> f64 {
        self.slots as f64 * self.num_rb as f64
    }

    pub fn sum_rate(&self) -> f64 {
        self.per_user_rate_sum.iter().sum::<f64>() / self.blocks()
    }

    pub fn outage_fraction(&self) -> f64 {
        self.outage_rb_count as f64 / self.blocks()
    }
}

/// Aggregate over drops. Standard errors come from the spread of drop means
/// when there are at least two drops and from slot-level (or slot-batch)
/// variation inside the single drop otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub policy: Policy,
    pub m: u32,
    pub num_rb: u32,
    pub num_drops: usize,
    pub slots_per_drop: usize,
    pub per_user_rate: Vec<f64>,
    pub per_user_rate_stderr: Vec<f64>,
    pub sum_rate: f64,
    pub sum_rate_stderr: f64,
    /// Normalized entropy of the assignment shares, jackknife
    /// bias-corrected over slot batches and clipped to `[0, 1]`; `None` with
    /// a single user.
    pub fairness_theta: Option<f64>,
    pub fairness_theta_stderr: Option<f64>,
    /// Uncorrected plug-in value, averaged over drops.
    pub fairness_theta_plugin: Option<f64>,
    pub outage_fraction: f64,
    pub outage_fraction_stderr: f64,
    /// Sum rate of each drop, in drop order.
    pub drop_sum_rates: Vec<f64>,
}

/// One small-scale fading coefficient, `CN(0, 1)`.
pub fn draw_small_scale<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// SINR on each of `n` resource blocks in one slot.
pub fn slot_sinr<R: Rng + ?Sized>(p: &LinkProfile, n: u32, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let s = p.rho0() * draw_small_scale(rng).norm_sqr();
            let i: f64 = p.rho_int().iter().map(|r| r * draw_small_scale(rng).norm_sqr()).sum();
            s / (i + 1.0)
        })
        .collect()
}

/// The `M` largest CQI values with their block indices, ties to the lower
/// index, in decreasing order of value.
pub fn best_m_select(cqi: &[f64], m: usize) -> Vec<(usize, f64)> {
    let mut idx: Vec<usize> = (0..cqi.len()).collect();
    let cmp = |a: &usize, b: &usize| cqi[*b].total_cmp(&cqi[*a]).then(a.cmp(b));
    let m = m.min(cqi.len());
    if m < idx.len() && m > 0 {
        idx.select_nth_unstable_by(m - 1, cmp);
        idx.truncate(m);
    }
    idx.sort_unstable_by(cmp);
    idx.truncate(m);
    idx.into_iter().map(|i| (i, cqi[i])).collect()
}

/// Winner and rate of every resource block in one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotOutcome {
    pub winner: Vec<Option<usize>>,
    pub rate: Vec<f64>,
}

/// Applies `policy` to one slot.
///
/// `feedback[k]` holds user `k`'s reported `(block, CQI)` pairs and
/// `actual[k]` its true SINR on every block (read only by round robin).
/// Round robin gives block `n` to user `(rr_counter + n) mod K`.
pub fn schedule_slot<R: Rng + ?Sized>(
    feedback: &[Vec<(usize, f64)>],
    actual: &[Vec<f64>],
    policy: Policy,
    profiles: &[LinkProfile],
    bestm: &BestMPoly,
    rr_counter: u64,
    tie_rng: &mut R,
) -> SlotOutcome {
    let n = bestm.n() as usize;
    let k0 = profiles.len();
    let mut winner = vec![None; n];
    let mut rate = vec![0.0; n];
    if policy == Policy::RoundRobin {
        for b in 0..n {
            let k = ((rr_counter + b as u64) % k0 as u64) as usize;
            winner[b] = Some(k);
            rate[b] = actual[k][b].ln_1p() / std::f64::consts::LN_2;
        }
        return SlotOutcome { winner, rate };
    }
    // best metric so far per block: smaller is better
    let mut best = vec![f64::INFINITY; n];
    let mut cqi = vec![0.0; n];
    let mut ties: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, fb) in feedback.iter().enumerate() {
        for &(b, y) in fb {
            let metric = match policy {
                Policy::Cdf => {
                    // argmax F_Y ⇔ argmin 1 − F_Y, which keeps tail resolution
                    let (f, s) = profiles[k].cdf_survival(y);
                    bestm.survival(f, s)
                }
                _ => -y,
            };
            if metric < best[b] {
                best[b] = metric;
                winner[b] = Some(k);
                cqi[b] = y;
                ties[b].clear();
            } else if metric == best[b] {
                if ties[b].is_empty() {
                    ties[b].push(winner[b].unwrap());
                }
                ties[b].push(k);
            }
        }
    }
    for b in 0..n {
        if ties[b].len() > 1 {
            let k = ties[b][tie_rng.random_range(0..ties[b].len())];
            winner[b] = Some(k);
            cqi[b] = feedback[k].iter().find(|e| e.0 == b).unwrap().1;
        }
        if winner[b].is_some() {
            rate[b] = cqi[b].ln_1p() / std::f64::consts::LN_2;
        }
    }
    SlotOutcome { winner, rate }
}

fn drop_rngs(master_seed: u64, drop_index: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut chan = ChaCha8Rng::seed_from_u64(master_seed);
    chan.set_stream(2 * drop_index as u64);
    let mut tie = ChaCha8Rng::seed_from_u64(master_seed);
    tie.set_stream(2 * drop_index as u64 + 1);
    (chan, tie)
}

/// Runs the slots of one drop for fixed profiles.
pub fn run_drop<R: Rng + ?Sized>(
    profiles: &[LinkProfile],
    n: u32,
    cfg: &SimConfig,
    chan_rng: &mut R,
    tie_rng: &mut R,
) -> Result<DropStats> {
    cfg.validate(n)?;
    if profiles.is_empty() {
        return Err(Error::Config("a drop needs at least one user".into()));
    }
    let bestm = BestMPoly::get(n, cfg.m)?;
    let k0 = profiles.len();
    let slots = cfg.slots_per_drop;
    let mut st = DropStats::new(k0, n, slots);
    let batches = st.batch_counts.len();
    let nf = n as f64;
    let mut user_slot = vec![0.0; k0];
    for slot in 0..slots {
        let actual: Vec<Vec<f64>> = profiles.iter().map(|p| slot_sinr(p, n, chan_rng)).collect();
        let feedback: Vec<Vec<(usize, f64)>> = match cfg.policy {
            Policy::RoundRobin => Vec::new(),
            _ => actual.iter().map(|c| best_m_select(c, cfg.m as usize)).collect(),
        };
        let out =
            schedule_slot(&feedback, &actual, cfg.policy, profiles, &bestm, (slot as u64) * n as u64, tie_rng);
        user_slot.iter_mut().for_each(|v| *v = 0.0);
        let mut outage = 0u64;
        let batch = slot * batches / slots;
        for (w, r) in out.winner.iter().zip(&out.rate) {
            match w {
                Some(k) => {
                    user_slot[*k] += r;
                    st.assignment_counts[*k] += 1;
                    st.batch_counts[batch][*k] += 1;
                }
                None => outage += 1,
            }
        }
        st.outage_rb_count += outage;
        st.slots += 1;
        let mut total = 0.0;
        for k in 0..k0 {
            st.per_user_rate_sum[k] += user_slot[k];
            st.slot_user_rate[k].push(user_slot[k] / nf);
            total += user_slot[k];
        }
        st.slot_sum_rate.push(total / nf);
        st.slot_outage.push(outage as f64 / nf);
    }
    Ok(st)
}

/// Normalized entropy `−Σ P_k ln P_k / ln K` of assignment counts.
pub fn fairness_theta(counts: &[u64]) -> Result<f64> {
    if counts.len() < 2 {
        return Err(Error::Precondition("fairness needs at least two users".into()));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Precondition("no resource blocks were assigned".into()));
    }
    Ok(normalized_entropy(counts, total))
}

/// Plug-in entropy over `ln K`; equal shares give exactly 1.
fn normalized_entropy(counts: &[u64], total: u64) -> f64 {
    if counts.iter().all(|&c| c == counts[0]) {
        return 1.0;
    }
    let t = total as f64;
    let h = -counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 / t * (c as f64 / t).ln()).sum::<f64>();
    h / (counts.len() as f64).ln()
}

/// Normalized entropy with the delete-one-batch jackknife bias correction
/// over slot batches, and its jackknife variance.
///
/// Slots are i.i.d. within a drop, so batches of slots are exchangeable
/// units even though wins inside a slot are not multinomial.
fn fairness_jackknife(batches: &[Vec<u64>]) -> Option<(f64, f64)> {
    let k = batches.first()?.len();
    let nb = batches.len();
    if k < 2 || nb < 2 {
        return None;
    }
    let mut total = vec![0u64; k];
    for b in batches {
        total.iter_mut().zip(b).for_each(|(t, c)| *t += c);
    }
    let sum: u64 = total.iter().sum();
    if sum == 0 {
        return None;
    }
    let full = normalized_entropy(&total, sum);
    let mut loo = Vec::with_capacity(nb);
    for b in batches {
        let rest: Vec<u64> = total.iter().zip(b).map(|(t, c)| t - c).collect();
        let s: u64 = rest.iter().sum();
        if s == 0 {
            return None;
        }
        loo.push(normalized_entropy(&rest, s));
    }
    let nf = nb as f64;
    let mean = loo.iter().sum::<f64>() / nf;
    let point = nf * full - (nf - 1.0) * mean;
    let var = (nf - 1.0) / nf * loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Some((point, var))
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let mut m = Moments::default();
    xs.iter().for_each(|&x| m.push(x));
    (m.mean, m.stderr())
}

/// Combines drops into a report, in drop order.
pub fn aggregate(cfg: &SimConfig, drops: &[DropStats]) -> Result<RateReport> {
    let first = drops.first().ok_or_else(|| Error::Config("no drops to aggregate".into()))?;
    let k0 = first.per_user_rate_sum.len();
    let n = first.num_rb;
    let drop_sum_rates: Vec<f64> = drops.iter().map(DropStats::sum_rate).collect();
    let single = drops.len() == 1;
    let (sum_rate, sum_rate_stderr) = if single {
        (first.sum_rate(), first.slot_sum_rate.stderr())
    } else {
        mean_and_stderr(&drop_sum_rates)
    };
    let outages: Vec<f64> = drops.iter().map(DropStats::outage_fraction).collect();
    let (outage_fraction, outage_fraction_stderr) =
        if single { (outages[0], first.slot_outage.stderr()) } else { mean_and_stderr(&outages) };
    let mut per_user_rate = Vec::with_capacity(k0);
    let mut per_user_rate_stderr = Vec::with_capacity(k0);
    for k in 0..k0 {
        if single {
            per_user_rate.push(first.per_user_rate_sum[k] / first.blocks());
            per_user_rate_stderr.push(first.slot_user_rate[k].stderr());
        } else {
            let v: Vec<f64> = drops.iter().map(|d| d.per_user_rate_sum[k] / d.blocks()).collect();
            let (m, s) = mean_and_stderr(&v);
            per_user_rate.push(m);
            per_user_rate_stderr.push(s);
        }
    }
    let (mut fairness_theta, mut fairness_theta_stderr, mut fairness_theta_plugin) = (None, None, None);
    if k0 >= 2 {
        let plugin: Vec<f64> = drops.iter().filter_map(|d| self::fairness_theta(&d.assignment_counts).ok()).collect();
        let jack: Vec<(f64, f64)> = drops.iter().filter_map(|d| fairness_jackknife(&d.batch_counts)).collect();
        if !jack.is_empty() {
            let (point, se) = if single {
                (jack[0].0, jack[0].1.sqrt())
            } else {
                mean_and_stderr(&jack.iter().map(|j| j.0).collect::<Vec<_>>())
            };
            fairness_theta = Some(point.clamp(0.0, 1.0));
            fairness_theta_stderr = Some(se);
        }
        if !plugin.is_empty() {
            fairness_theta_plugin = Some(mean_and_stderr(&plugin).0);
        }
    }
    Ok(RateReport {
        policy: cfg.policy,
        m: cfg.m,
        num_rb: n,
        num_drops: drops.len(),
        slots_per_drop: cfg.slots_per_drop,
        per_user_rate,
        per_user_rate_stderr,
        sum_rate,
        sum_rate_stderr,
        fairness_theta,
        fairness_theta_stderr,
        fairness_theta_plugin,
        outage_fraction,
        outage_fraction_stderr,
        drop_sum_rates,
    })
}

fn run_parallel<F>(cfg: &SimConfig, f: F) -> Result<Vec<DropStats>>
where
    F: Fn(usize) -> Result<DropStats> + Sync,
{
    let work = || (0..cfg.num_drops).into_par_iter().map(&f).collect::<Vec<_>>();
    let results = if cfg.threads_hint > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads_hint)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(work)
    } else {
        work()
    };
    results.into_iter().collect()
}

/// Simulates fixed link profiles; every drop redraws only the fading.
pub fn simulate_profiles(profiles: &[LinkProfile], n: u32, cfg: &SimConfig) -> Result<RateReport> {
    cfg.validate(n)?;
    let drops = run_parallel(cfg, |d| {
        let (mut chan, mut tie) = drop_rngs(cfg.master_seed, d);
        run_drop(profiles, n, cfg, &mut chan, &mut tie)
    })?;
    aggregate(cfg, &drops)
}

/// Simulates a scenario. With `random_users_per_drop` every drop places new
/// users (and shadowing) in the target cell; otherwise the listed users'
/// links are fixed and only the fading changes.
pub fn simulate(scenario: &Scenario, cfg: &SimConfig) -> Result<RateReport> {
    scenario.validate()?;
    let n = scenario.num_rb;
    cfg.validate(n)?;
    match scenario.random_users_per_drop {
        Some(k0) => {
            let drops = run_parallel(cfg, |d| {
                let (mut chan, mut tie) = drop_rngs(cfg.master_seed, d);
                let links = drop_users(scenario, k0, &mut chan)?;
                let profiles: Vec<LinkProfile> = links.into_iter().map(|l| l.profile).collect();
                run_drop(&profiles, n, cfg, &mut chan, &mut tie)
            })?;
            aggregate(cfg, &drops)
        }
        None => {
            let profiles: Vec<LinkProfile> = fixed_user_links(scenario)?.into_iter().map(|l| l.profile).collect();
            simulate_profiles(&profiles, n, cfg)
        }
    }
}

/// Mean and standard error of the per-drop difference `a − b` of two runs
/// that share the master seed (common random numbers).
pub fn paired_difference(a: &RateReport, b: &RateReport) -> Result<(f64, f64)> {
    if a.drop_sum_rates.len() != b.drop_sum_rates.len() || a.drop_sum_rates.len() < 2 {
        return Err(Error::Precondition("paired comparison needs two runs with the same number (>= 2) of drops".into()));
    }
    let d: Vec<f64> = a.drop_sum_rates.iter().zip(&b.drop_sum_rates).map(|(x, y)| x - y).collect();
    Ok(mean_and_stderr(&d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(policy: Policy, m: u32, drops: usize, slots: usize) -> SimConfig {
        SimConfig { num_drops: drops, slots_per_drop: slots, policy, m, master_seed: 7, threads_hint: 1 }
    }

    #[test]
    fn small_scale_is_unit_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut xs: Vec<f64> = (0..1_000_000).map(|_| draw_small_scale(&mut rng).norm_sqr()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 1.0).abs() < 0.01);
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = -(-x).exp_m1();
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.002, "KS distance {ks}");
    }

    #[test]
    fn blocks_are_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = LinkProfile::noise_limited(1.0).unwrap();
        let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let m = 100_000;
        for _ in 0..m {
            let v = slot_sinr(&p, 2, &mut rng);
            sx += v[0];
            sy += v[1];
            sxy += v[0] * v[1];
            sxx += v[0] * v[0];
            syy += v[1] * v[1];
        }
        let mf = m as f64;
        let cov = sxy / mf - sx * sy / mf / mf;
        let corr = cov / ((sxx / mf - (sx / mf).powi(2)) * (syy / mf - (sy / mf).powi(2))).sqrt();
        assert!(corr.abs() < 0.01, "{corr}");
    }

    #[test]
    fn slot_sinr_matches_cdf() {
        let p = LinkProfile::from_scales(2.0, vec![0.8, 0.3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let draws: Vec<f64> = (0..62_500).flat_map(|_| slot_sinr(&p, 16, &mut rng)).collect();
        let n = draws.len() as f64;
        for &x in &[0.1, 0.3, 0.6, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0] {
            let emp = draws.iter().filter(|&&v| v <= x).count() as f64 / n;
            let f = p.cdf(x);
            let se = (f * (1.0 - f) / n).sqrt();
            assert!((emp - f).abs() <= 3.0 * se, "x={x}: {emp} vs {f}");
        }
        assert!(draws.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn best_m_examples() {
        assert_eq!(best_m_select(&[3.0, 1.0, 2.0], 2), vec![(0, 3.0), (2, 2.0)]);
        assert_eq!(best_m_select(&[1.0, 1.0, 0.5], 1), vec![(0, 1.0)]);
        assert_eq!(best_m_select(&[1.0, 2.0], 2).len(), 2);
    }

    #[test]
    fn feedback_indicator_has_mean_m_over_n() {
        let p = LinkProfile::noise_limited(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (n, m, slots) = (16u32, 3usize, 100_000);
        let mut hits = 0u64;
        for _ in 0..slots {
            let c = slot_sinr(&p, n, &mut rng);
            if best_m_select(&c, m).iter().any(|e| e.0 == 5) {
                hits += 1;
            }
        }
        let q = m as f64 / n as f64;
        let se = (q * (1.0 - q) / slots as f64).sqrt();
        assert!((hits as f64 / slots as f64 - q).abs() <= 3.0 * se);
    }

    #[test]
    fn single_user_wins_everything() {
        let p = vec![LinkProfile::noise_limited(2.0).unwrap()];
        for policy in Policy::ALL {
            let r = simulate_profiles(&p, 8, &cfg(policy, 8, 1, 200)).unwrap();
            assert_eq!(r.outage_fraction, 0.0);
            assert!(r.fairness_theta.is_none());
        }
    }

    #[test]
    fn identical_users_split_evenly() {
        let p = vec![LinkProfile::interference_limited(2.0, 1.0).unwrap(); 2];
        let bestm = BestMPoly::get(4, 2).unwrap();
        let c = cfg(Policy::Cdf, 2, 1, 25_000);
        let mut chan = ChaCha8Rng::seed_from_u64(1);
        let mut tie = ChaCha8Rng::seed_from_u64(2);
        let st = run_drop(&p, 4, &c, &mut chan, &mut tie).unwrap();
        assert_eq!(bestm.n(), 4);
        let assigned: u64 = st.assignment_counts.iter().sum();
        let frac = st.assignment_counts[0] as f64 / assigned as f64;
        let se = (0.25 / assigned as f64).sqrt();
        assert!((frac - 0.5).abs() <= 3.0 * se, "{frac}");
        assert_eq!(assigned + st.outage_rb_count, 25_000 * 4);
    }

    #[test]
    fn heterogeneous_users_equiprobable_under_cdf() {
        let p = vec![
            LinkProfile::noise_limited(10.0).unwrap(),
            LinkProfile::noise_limited(0.5).unwrap(),
            LinkProfile::from_scales(3.0, vec![1.0]).unwrap(),
        ];
        let c = cfg(Policy::Cdf, 16, 1, 30_000);
        let mut chan = ChaCha8Rng::seed_from_u64(4);
        let mut tie = ChaCha8Rng::seed_from_u64(5);
        let st = run_drop(&p, 16, &c, &mut chan, &mut tie).unwrap();
        let total: u64 = st.assignment_counts.iter().sum();
        // per-block wins within a slot are independent under full feedback
        let se = ((1.0 / 3.0) * (2.0 / 3.0) / total as f64).sqrt();
        for &a in &st.assignment_counts {
            assert!((a as f64 / total as f64 - 1.0 / 3.0).abs() <= 3.0 * se, "{:?}", st.assignment_counts);
        }
    }

    #[test]
    fn fairness_examples() {
        assert!((fairness_theta(&[5, 5]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fairness_theta(&[4, 0]).unwrap(), 0.0);
        assert!((fairness_theta(&[3, 1]).unwrap() - 0.8113).abs() < 1e-4);
        assert!(fairness_theta(&[3]).is_err());
        assert!(fairness_theta(&[0, 0]).is_err());
    }

    #[test]
    fn round_robin_is_exactly_fair() {
        let p = vec![
            LinkProfile::noise_limited(10.0).unwrap(),
            LinkProfile::noise_limited(0.5).unwrap(),
            LinkProfile::noise_limited(2.0).unwrap(),
            LinkProfile::noise_limited(1.0).unwrap(),
        ];
        let r = simulate_profiles(&p, 16, &cfg(Policy::RoundRobin, 1, 3, 100)).unwrap();
        assert_eq!(r.fairness_theta, Some(1.0));
        assert_eq!(r.outage_fraction, 0.0);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let scn = Scenario::two_tier_hetnet(4, 3);
        let mut a = cfg(Policy::Cdf, 2, 6, 50);
        a.threads_hint = 1;
        let mut b = a.clone();
        b.threads_hint = 3;
        assert_eq!(simulate(&scn, &a).unwrap(), simulate(&scn, &b).unwrap());
    }

    #[test]
    fn outage_matches_empty_feedback_probability() {
        let p = vec![LinkProfile::noise_limited(1.0).unwrap(); 3];
        let r = simulate_profiles(&p, 16, &cfg(Policy::Greedy, 2, 1, 20_000)).unwrap();
        let q = (1.0f64 - 2.0 / 16.0).powi(3);
        assert!((r.outage_fraction - q).abs() <= 3.0 * r.outage_fraction_stderr, "{} vs {q}", r.outage_fraction);
    }

    #[test]
    fn config_validation() {
        let p = vec![LinkProfile::noise_limited(1.0).unwrap()];
        assert!(simulate_profiles(&p, 4, &cfg(Policy::Cdf, 5, 1, 10)).is_err());
        assert!(simulate_profiles(&p, 4, &cfg(Policy::Cdf, 1, 0, 10)).is_err());
        assert!("bogus".parse::<Policy>().is_err());
        assert_eq!("round_robin".parse::<Policy>().unwrap(), Policy::RoundRobin);
    }
}
