//! Smallest best-M feedback that keeps 90% and 99% of the full-feedback
//! sum rate, exact and asymptotic, for growing cells.

use bestm_sched::channel::{drop_users, LinkProfile, Scenario};
use bestm_sched::planner::{min_feedback_exact, plan_feedback};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bestm_sched::Result<()> {
    let n = 16;
    println!("{:>4} {:>5} {:>4} {:>4} {:>9}", "K0", "eta", "M*", "M~*", "M*·K0");
    for k0 in [10usize, 20, 30] {
        let scn = Scenario::two_tier_hetnet(k0, 1);
        let links = drop_users(&scn, k0, &mut ChaCha8Rng::seed_from_u64(11))?;
        let cell: Vec<LinkProfile> = links.into_iter().map(|l| l.profile).collect();
        for eta in [0.9, 0.99] {
            let r = plan_feedback(&cell, n, eta)?;
            let show = |m: Option<u32>| m.map_or("-".to_string(), |v| v.to_string());
            println!(
                "{k0:>4} {eta:>5} {:>4} {:>4} {:>9}",
                show(r.m_exact),
                show(r.m_asymptotic),
                show(r.m_exact.map(|m| m * k0 as u32))
            );
        }
    }

    let cell = vec![LinkProfile::noise_limited(10.0)?; 8];
    let scan = min_feedback_exact(&cell, n, 0.95)?;
    println!("\nK0=8 noise limited, eta=0.95: ratios {:?}", scan.ratios);
    Ok(())
}
