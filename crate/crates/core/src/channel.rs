//! Large-scale network model and the per-user SINR distribution.
//!
//! A user's SINR on one resource block is
//!
//! ```text
//! Z = ρ0·|H0|² / (Σ_b ρ_b·|H_b|² + 1)
//! ```
//!
//! with unit-mean exponential `|H|²`. The survival function has the product
//! form `P(Z > x) = e^(−x/ρ0) Π_b ρ0/(ρ0 + ρ_b x)`, whose partial-fraction
//! expansion gives the `ϖ`-weighted sums used by the closed-form rates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Base-station tier; selects the path-loss law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Macro,
    Pico,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub tier: Tier,
    pub position_m: [f64; 2],
    pub tx_power_dbm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserPlacement {
    pub position_m: [f64; 2],
    /// Fixed shadowing per cell; drawn from the scenario seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadowing_db: Option<Vec<f64>>,
}

impl UserPlacement {
    pub fn at(x: f64, y: f64) -> Self {
        Self { position_m: [x, y], shadowing_db: None }
    }
}

/// Network geometry, radio parameters and user placement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub cells: Vec<Cell>,
    pub users: Vec<UserPlacement>,
    pub noise_psd_dbm_per_hz: f64,
    pub bandwidth_hz: f64,
    pub num_rb: u32,
    pub shadowing_sigma_db: f64,
    pub macro_radius_m: f64,
    pub pico_radius_m: f64,
    pub seed: u64,
    /// Interferers weaker than this fraction of the strongest one are folded
    /// into the noise term.
    pub interferer_keep_threshold: f64,
    /// Cell whose users are analysed.
    pub target_cell: usize,
    /// When set, the simulator ignores `users` and drops this many users
    /// associated with `target_cell` uniformly in its macro disk each drop.
    pub random_users_per_drop: Option<usize>,
}

pub const DEFAULT_BANDWIDTH_HZ: f64 = 5e6;
pub const DEFAULT_NOISE_PSD_DBM_PER_HZ: f64 = -170.0;
pub const DEFAULT_NUM_RB: u32 = 16;
pub const DEFAULT_MACRO_POWER_DBM: f64 = 43.0;
pub const DEFAULT_PICO_POWER_DBM: f64 = 30.0;
pub const DEFAULT_SHADOWING_SIGMA_DB: f64 = 8.0;
pub const DEFAULT_MACRO_RADIUS_M: f64 = 500.0;
pub const DEFAULT_PICO_RADIUS_M: f64 = 100.0;
/// 20 dB below the strongest interferer.
pub const DEFAULT_KEEP_THRESHOLD: f64 = 0.01;

impl Scenario {
    /// Scenario with the given cells and users and default radio parameters.
    pub fn new(cells: Vec<Cell>, users: Vec<UserPlacement>) -> Self {
        Self {
            cells,
            users,
            noise_psd_dbm_per_hz: DEFAULT_NOISE_PSD_DBM_PER_HZ,
            bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
            num_rb: DEFAULT_NUM_RB,
            shadowing_sigma_db: DEFAULT_SHADOWING_SIGMA_DB,
            macro_radius_m: DEFAULT_MACRO_RADIUS_M,
            pico_radius_m: DEFAULT_PICO_RADIUS_M,
            seed: 0,
            interferer_keep_threshold: DEFAULT_KEEP_THRESHOLD,
            target_cell: 0,
            random_users_per_drop: None,
        }
    }

    /// Two macrocells 1 km apart, each with two picocells, and `k0` users
    /// dropped at random around macrocell 0 every drop.
    pub fn two_tier_hetnet(k0: usize, seed: u64) -> Self {
        let mk = |tier, x, y| Cell {
            tier,
            position_m: [x, y],
            tx_power_dbm: match tier {
                Tier::Macro => DEFAULT_MACRO_POWER_DBM,
                Tier::Pico => DEFAULT_PICO_POWER_DBM,
            },
        };
        let cells = vec![
            mk(Tier::Macro, 0.0, 0.0),
            mk(Tier::Macro, 1000.0, 0.0),
            mk(Tier::Pico, -180.0, 260.0),
            mk(Tier::Pico, 150.0, -300.0),
            mk(Tier::Pico, 820.0, 290.0),
            mk(Tier::Pico, 1240.0, -200.0),
        ];
        let mut s = Self::new(cells, Vec::new());
        s.seed = seed;
        s.random_users_per_drop = Some(k0);
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if self.cells.is_empty() {
            return bad("at least one cell is required (field `cells`)".into());
        }
        if self.num_rb < 1 {
            return bad("`num_rb` must be at least 1".into());
        }
        for (i, c) in self.cells.iter().enumerate() {
            if !c.tx_power_dbm.is_finite() {
                return bad(format!("cells[{i}].tx_power_dbm must be finite"));
            }
            if !(c.position_m[0].is_finite() && c.position_m[1].is_finite()) {
                return bad(format!("cells[{i}].position_m must be finite"));
            }
        }
        for (i, u) in self.users.iter().enumerate() {
            if !(u.position_m[0].is_finite() && u.position_m[1].is_finite()) {
                return bad(format!("users[{i}].position_m must be finite"));
            }
            if let Some(sh) = &u.shadowing_db {
                if sh.len() != self.cells.len() || sh.iter().any(|v| !v.is_finite()) {
                    return bad(format!("users[{i}].shadowing_db needs one finite value per cell"));
                }
            }
        }
        if !(self.shadowing_sigma_db >= 0.0) || !self.shadowing_sigma_db.is_finite() {
            return bad("`shadowing_sigma_db` must be a finite value >= 0".into());
        }
        if !(self.bandwidth_hz > 0.0) || !self.noise_psd_dbm_per_hz.is_finite() {
            return bad("`bandwidth_hz` must be positive and `noise_psd_dbm_per_hz` finite".into());
        }
        if !(self.macro_radius_m > 0.0 && self.pico_radius_m > 0.0) {
            return bad("cell radii must be positive".into());
        }
        if !(self.interferer_keep_threshold >= 0.0 && self.interferer_keep_threshold <= 1.0) {
            return bad("`interferer_keep_threshold` must lie in [0, 1]".into());
        }
        if self.target_cell >= self.cells.len() {
            return bad(format!("`target_cell` {} does not name a cell", self.target_cell));
        }
        if self.users.is_empty() && self.random_users_per_drop.is_none() {
            return bad("no users: give `users` or `random_users_per_drop`".into());
        }
        if self.random_users_per_drop == Some(0) {
            return bad("`random_users_per_drop` must be at least 1".into());
        }
        Ok(())
    }

    /// Noise power per resource block in dBm.
    pub fn noise_per_rb_dbm(&self) -> f64 {
        self.noise_psd_dbm_per_hz + 10.0 * (self.bandwidth_hz / self.num_rb as f64).log10()
    }

    /// One N(0, σ²) shadowing value per cell.
    pub fn draw_shadowing<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        if self.shadowing_sigma_db == 0.0 {
            return vec![0.0; self.cells.len()];
        }
        let normal = Normal::new(0.0, self.shadowing_sigma_db).expect("validated sigma");
        (0..self.cells.len()).map(|_| normal.sample(rng)).collect()
    }
}

/// Path loss in dB at distance `d` metres.
///
/// ```
/// use bestm_sched::channel::{path_loss_db, Tier};
/// assert!((path_loss_db(Tier::Macro, 10.0).unwrap() - 52.9).abs() < 1e-12);
/// ```
pub fn path_loss_db(tier: Tier, d: f64) -> Result<f64> {
    if !(d >= 1.0) || !d.is_finite() {
        return Err(domain("path_loss_db", format!("distance must be at least 1 m, got {d}")));
    }
    Ok(match tier {
        Tier::Macro => 15.3 + 37.6 * d.log10(),
        Tier::Pico => 30.6 + 36.7 * d.log10(),
    })
}

/// Which closed form applies to a profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    General,
    InterferenceLimited,
    NoiseLimited,
}

/// Large-scale state of one user: serving scale `ρ0` and interferer scales.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkProfile {
    rho0: f64,
    rho_int: Vec<f64>,
    kind: ProfileKind,
    varpi: Vec<f64>,
}

const DISTINCT_REL: f64 = 1e-9;

impl LinkProfile {
    /// General profile; interferer scales are sorted descending. An empty
    /// list yields a noise-limited profile.
    pub fn from_scales(rho0: f64, rho_int: Vec<f64>) -> Result<Self> {
        check_scale("rho0", rho0)?;
        let mut rho_int = rho_int;
        for &r in &rho_int {
            check_scale("rho_int", r)?;
        }
        if rho_int.is_empty() {
            return Self::noise_limited(rho0);
        }
        rho_int.sort_by(|a, b| b.total_cmp(a));
        for w in rho_int.windows(2) {
            if (w[0] - w[1]) / w[0] < DISTINCT_REL {
                return Err(Error::Distinctness(w[0], w[1]));
            }
        }
        let varpi = (0..rho_int.len())
            .map(|b| {
                let rb = rho_int[b];
                rho_int
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != b)
                    .map(|(_, &ri)| rb / (rb - ri))
                    .product()
            })
            .collect();
        Ok(Self { rho0, rho_int, kind: ProfileKind::General, varpi })
    }

    pub fn noise_limited(rho0: f64) -> Result<Self> {
        check_scale("rho0", rho0)?;
        Ok(Self { rho0, rho_int: Vec::new(), kind: ProfileKind::NoiseLimited, varpi: Vec::new() })
    }

    /// One dominant interferer with the noise neglected.
    pub fn interference_limited(rho0: f64, rho1: f64) -> Result<Self> {
        check_scale("rho0", rho0)?;
        check_scale("rho1", rho1)?;
        Ok(Self {
            rho0,
            rho_int: vec![rho1],
            kind: ProfileKind::InterferenceLimited,
            varpi: vec![1.0],
        })
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn rho_int(&self) -> &[f64] {
        &self.rho_int
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    /// Number of retained interferers `J`.
    pub fn num_interferers(&self) -> usize {
        self.rho_int.len()
    }

    /// `ϖ_b = Π_{i≠b} ρ_b/(ρ_b − ρ_i)` for 1-based `b`.
    pub fn varpi(&self, b: usize) -> Result<f64> {
        if b == 0 || b > self.varpi.len() {
            return Err(Error::Range(format!("interferer index {b} outside 1..={}", self.varpi.len())));
        }
        Ok(self.varpi[b - 1])
    }

    pub(crate) fn varpi_all(&self) -> &[f64] {
        &self.varpi
    }

    /// Same geometry with all interferer scales multiplied by `factor`.
    pub fn with_interference_scaled(&self, factor: f64) -> Result<Self> {
        let r = self.rho_int.iter().map(|v| v * factor).collect();
        match self.kind {
            ProfileKind::InterferenceLimited => Self::interference_limited(self.rho0, self.rho_int[0] * factor),
            _ => Self::from_scales(self.rho0, r),
        }
    }

    /// `(F(x), 1 − F(x))`, each computed without cancellation.
    pub fn cdf_survival(&self, x: f64) -> (f64, f64) {
        if !(x > 0.0) {
            return (0.0, 1.0);
        }
        let s = self.survival(x);
        let f = match self.kind {
            ProfileKind::NoiseLimited => -(-x / self.rho0).exp_m1(),
            ProfileKind::InterferenceLimited => {
                let t = self.rho_int[0] * x;
                t / (t + self.rho0)
            }
            ProfileKind::General => {
                // 1 − e^(−u) Π 1/(1+v_b) = −expm1(−u − Σ ln1p(v_b))
                let mut l = -x / self.rho0;
                for &r in &self.rho_int {
                    l -= (r * x / self.rho0).ln_1p();
                }
                -l.exp_m1()
            }
        };
        (f, s)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf_survival(x).0
    }

    pub fn survival(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 1.0;
        }
        match self.kind {
            ProfileKind::NoiseLimited => (-x / self.rho0).exp(),
            ProfileKind::InterferenceLimited => self.rho0 / (self.rho_int[0] * x + self.rho0),
            ProfileKind::General => {
                let mut s = (-x / self.rho0).exp();
                for &r in &self.rho_int {
                    s *= self.rho0 / (self.rho0 + r * x);
                }
                s
            }
        }
    }

    /// `ln P(Z > x)`, finite far into the tail.
    pub fn ln_survival(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        match self.kind {
            ProfileKind::NoiseLimited => -x / self.rho0,
            ProfileKind::InterferenceLimited => -(self.rho_int[0] * x / self.rho0).ln_1p(),
            ProfileKind::General => {
                -x / self.rho0 - self.rho_int.iter().map(|r| (r * x / self.rho0).ln_1p()).sum::<f64>()
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let x = x.max(0.0);
        match self.kind {
            ProfileKind::NoiseLimited => (-x / self.rho0).exp() / self.rho0,
            ProfileKind::InterferenceLimited => {
                let d = self.rho_int[0] * x + self.rho0;
                self.rho0 * self.rho_int[0] / (d * d)
            }
            ProfileKind::General => {
                let hazard: f64 =
                    1.0 / self.rho0 + self.rho_int.iter().map(|r| r / (self.rho0 + r * x)).sum::<f64>();
                self.survival(x) * hazard
            }
        }
    }

    /// Hazard-rate reciprocal `(1 − F)/f`.
    pub fn mills_ratio(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self.kind {
            ProfileKind::NoiseLimited => self.rho0,
            ProfileKind::InterferenceLimited => (self.rho_int[0] * x + self.rho0) / self.rho_int[0],
            ProfileKind::General => {
                1.0 / (1.0 / self.rho0 + self.rho_int.iter().map(|r| r / (self.rho0 + r * x)).sum::<f64>())
            }
        }
    }

    /// CDF through the `ϖ`-weighted partial-fraction sum.
    pub fn cdf_mixture_form(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        match self.kind {
            ProfileKind::General => {
                let e = (-x / self.rho0).exp();
                1.0 - self
                    .rho_int
                    .iter()
                    .zip(&self.varpi)
                    .map(|(r, w)| w * e * self.rho0 / (self.rho0 + r * x))
                    .sum::<f64>()
            }
            _ => self.cdf(x),
        }
    }

    /// PDF through the `ϖ`-weighted partial-fraction sum.
    pub fn pdf_mixture_form(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self.kind {
            ProfileKind::General => {
                let e = (-x / self.rho0).exp();
                let r0 = self.rho0;
                self.rho_int
                    .iter()
                    .zip(&self.varpi)
                    .map(|(r, w)| {
                        let d = r0 + r * x;
                        w * e * (1.0 / d + r0 * r / (d * d))
                    })
                    .sum()
            }
            _ => self.pdf(x),
        }
    }

    /// Quantile: the `x` with `F(x) = q`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(domain("sinr_cdf_inv", format!("probability must lie in (0,1), got {q}")));
        }
        self.quantile_from_ln_survival((-q).ln_1p())
    }

    /// The `x` with `ln P(Z > x) = target` (`target < 0`).
    pub fn quantile_from_ln_survival(&self, target: f64) -> Result<f64> {
        if !(target < 0.0) || !target.is_finite() {
            return Err(domain("sinr_cdf_inv", format!("log-survival target must be negative, got {target}")));
        }
        match self.kind {
            ProfileKind::NoiseLimited => Ok(-self.rho0 * target),
            ProfileKind::InterferenceLimited => Ok(self.rho0 / self.rho_int[0] * (-target).exp_m1()),
            ProfileKind::General => {
                // g(x) = −ln S(x) + target is increasing and concave, so
                // Newton from the left approaches the root monotonically.
                let g = |x: f64| -self.ln_survival(x) + target;
                let dg = |x: f64| 1.0 / self.mills_ratio(x);
                let mut x = 0.0f64;
                for _ in 0..200 {
                    let step = -g(x) / dg(x);
                    let next = x + step;
                    if !(next.is_finite()) {
                        break;
                    }
                    if (next - x).abs() <= 4.0 * f64::EPSILON * next.abs() {
                        return Ok(next);
                    }
                    x = next;
                }
                // bisection safeguard
                let mut lo = 0.0;
                let mut hi = self.rho0.max(1.0);
                while g(hi) < 0.0 {
                    hi *= 2.0;
                    if !hi.is_finite() {
                        return Err(Error::Convergence { what: "sinr_cdf_inv bracketing", estimate: f64::NAN });
                    }
                }
                for _ in 0..2000 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        return Ok(mid);
                    }
                    if g(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Err(Error::Convergence { what: "sinr_cdf_inv bisection", estimate: hi - lo })
            }
        }
    }

    /// Mixture representation of the aggregate interference density.
    pub fn mixture(&self) -> Option<AggregateInterferenceMixture> {
        if self.rho_int.is_empty() {
            return None;
        }
        Some(AggregateInterferenceMixture {
            weights: self.rho_int.iter().zip(&self.varpi).map(|(r, w)| w / r).collect(),
            rates: self.rho_int.iter().map(|r| 1.0 / r).collect(),
        })
    }
}

fn check_scale(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(domain("LinkProfile", format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Density of `Σ_b ρ_b|H_b|²` as `Σ weights[b]·e^(−rates[b]·ζ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateInterferenceMixture {
    pub weights: Vec<f64>,
    pub rates: Vec<f64>,
}

impl AggregateInterferenceMixture {
    pub fn pdf(&self, zeta: f64) -> f64 {
        if zeta < 0.0 {
            return 0.0;
        }
        self.weights.iter().zip(&self.rates).map(|(w, r)| w * (-r * zeta).exp()).sum()
    }
}

/// SINR density (general kind: the `ϖ`-weighted form).
pub fn sinr_pdf(p: &LinkProfile, x: f64) -> f64 {
    p.pdf(x)
}

pub fn sinr_cdf(p: &LinkProfile, x: f64) -> f64 {
    p.cdf(x)
}

pub fn sinr_cdf_inv(p: &LinkProfile, q: f64) -> Result<f64> {
    p.quantile(q)
}

/// Association and link-budget details behind a [`LinkProfile`].
#[derive(Clone, Debug, PartialEq)]
pub struct UserLink {
    pub serving_cell: usize,
    pub profile: LinkProfile,
    /// Cells kept as interferers, in the order of `profile.rho_int()`.
    pub interferer_cells: Vec<usize>,
    /// Mean interference folded into the noise term, relative to the noise.
    pub folded_power: f64,
    /// Number of interferers folded into the noise term.
    pub folded_count: usize,
    /// Strongest interferer's mean power relative to the noise.
    pub strongest_interferer: f64,
}

/// Associates a user by large-scale received power and builds its profile.
///
/// Distances below 1 m are clamped to 1 m.
pub fn build_link_profile(scn: &Scenario, user_index: usize, shadowing_db: &[f64]) -> Result<UserLink> {
    let user = scn
        .users
        .get(user_index)
        .ok_or_else(|| Error::Range(format!("user index {user_index} of {}", scn.users.len())))?;
    link_at(scn, user.position_m, shadowing_db)
}

/// As [`build_link_profile`] for an arbitrary position.
pub fn link_at(scn: &Scenario, pos: [f64; 2], shadowing_db: &[f64]) -> Result<UserLink> {
    if shadowing_db.len() != scn.cells.len() {
        return Err(Error::Range(format!(
            "{} shadowing values for {} cells",
            shadowing_db.len(),
            scn.cells.len()
        )));
    }
    let noise = scn.noise_per_rb_dbm();
    let mut rho = Vec::with_capacity(scn.cells.len());
    for (c, cell) in scn.cells.iter().enumerate() {
        let d = ((pos[0] - cell.position_m[0]).powi(2) + (pos[1] - cell.position_m[1]).powi(2)).sqrt();
        let rx = cell.tx_power_dbm - path_loss_db(cell.tier, d.max(1.0))? + shadowing_db[c];
        rho.push(10f64.powf((rx - noise) / 10.0));
    }
    let mut serving = 0;
    for c in 1..rho.len() {
        if rho[c] > rho[serving] {
            serving = c;
        }
    }
    let mut others: Vec<(usize, f64)> =
        rho.iter().enumerate().filter(|&(c, _)| c != serving).map(|(c, &r)| (c, r)).collect();
    others.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let strongest = others.first().map(|o| o.1).unwrap_or(0.0);
    let cut = scn.interferer_keep_threshold * strongest;
    let (kept, folded): (Vec<_>, Vec<_>) = others.into_iter().partition(|o| o.1 >= cut);
    let folded_power: f64 = folded.iter().map(|o| o.1).sum();
    let scale = 1.0 + folded_power;
    let mut scales: Vec<f64> = kept.iter().map(|o| o.1 / scale).collect();
    for i in 1..scales.len() {
        if (scales[i - 1] - scales[i]) / scales[i - 1] < DISTINCT_REL {
            log::warn!("interferer scales {} and {} tie; perturbing by 1e-6 relative", scales[i - 1], scales[i]);
            scales[i] = scales[i - 1] * (1.0 - 1e-6);
        }
    }
    let profile = LinkProfile::from_scales(rho[serving] / scale, scales)?;
    Ok(UserLink {
        serving_cell: serving,
        profile,
        interferer_cells: kept.iter().map(|o| o.0).collect(),
        folded_power,
        folded_count: folded.len(),
        strongest_interferer: strongest,
    })
}

/// Uniform point in the disk of radius `r` around `center`.
pub fn uniform_in_disk<R: Rng + ?Sized>(rng: &mut R, center: [f64; 2], r: f64) -> [f64; 2] {
    let rad = r * rng.random::<f64>().sqrt();
    let th = std::f64::consts::TAU * rng.random::<f64>();
    [center[0] + rad * th.cos(), center[1] + rad * th.sin()]
}

/// Drops users uniformly in the target macro disk until `k0` of them are
/// served by the target cell, then returns their links.
pub fn drop_users<R: Rng + ?Sized>(scn: &Scenario, k0: usize, rng: &mut R) -> Result<Vec<UserLink>> {
    let center = scn.cells[scn.target_cell].position_m;
    let radius = match scn.cells[scn.target_cell].tier {
        Tier::Macro => scn.macro_radius_m,
        Tier::Pico => scn.pico_radius_m,
    };
    let mut out = Vec::with_capacity(k0);
    let mut attempts = 0usize;
    while out.len() < k0 {
        attempts += 1;
        if attempts > 1000 * k0 + 10_000 {
            return Err(Error::Scenario(format!(
                "could not place {k0} users served by cell {} (acceptance too low)",
                scn.target_cell
            )));
        }
        let pos = uniform_in_disk(rng, center, radius);
        let sh = scn.draw_shadowing(rng);
        let link = link_at(scn, pos, &sh)?;
        if link.serving_cell == scn.target_cell {
            out.push(link);
        }
    }
    Ok(out)
}

/// Links of the scenario's listed users that the target cell serves.
///
/// Missing shadowing values are drawn from a stream seeded by
/// `scenario.seed`, one vector per listed user in order, so the result is
/// fixed by the file alone.
pub fn fixed_user_links(scn: &Scenario) -> Result<Vec<UserLink>> {
    let mut rng = ChaCha8Rng::seed_from_u64(scn.seed);
    let mut out = Vec::new();
    for (i, u) in scn.users.iter().enumerate() {
        let drawn = scn.draw_shadowing(&mut rng);
        let sh = u.shadowing_db.clone().unwrap_or(drawn);
        let link = build_link_profile(scn, i, &sh)?;
        if link.serving_cell == scn.target_cell {
            out.push(link);
        } else {
            log::warn!("user {i} is served by cell {} rather than the target cell; skipped", link.serving_cell);
        }
    }
    if out.is_empty() {
        return Err(Error::Scenario(format!("no listed user is served by target cell {}", scn.target_cell)));
    }
    Ok(out)
}
