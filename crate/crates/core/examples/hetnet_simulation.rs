//! Two macrocells with two picocells each: users are re-dropped every drop
//! and the three policies are compared for growing cells.

use bestm_sched::channel::Scenario;
use bestm_sched::simulator::{simulate, Policy, SimConfig};

fn main() -> bestm_sched::Result<()> {
    println!("{:>4} {:>12} {:>10} {:>10} {:>10}", "K0", "policy", "sum rate", "stderr", "fairness");
    for k0 in [10usize, 20, 30] {
        let scn = Scenario::two_tier_hetnet(k0, 42);
        for policy in Policy::ALL {
            let cfg = SimConfig { num_drops: 20, slots_per_drop: 300, policy, m: 4, master_seed: 42, threads_hint: 0 };
            let r = simulate(&scn, &cfg)?;
            println!(
                "{k0:>4} {:>12} {:>10.5} {:>10.2e} {:>10.5}",
                policy.as_str(),
                r.sum_rate,
                r.sum_rate_stderr,
                r.fairness_theta.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
