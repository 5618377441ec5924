//! Extreme-value approximation of the sum rate next to the exact value as
//! the cell grows.

use bestm_sched::asymptotics::{normalizing_constants, sum_rate_asymptotic, tail_convergence_diagnostic};
use bestm_sched::channel::LinkProfile;
use bestm_sched::exact_rate::sum_rate_exact;

fn main() -> bestm_sched::Result<()> {
    let n = 16;
    let p = LinkProfile::noise_limited(10.0)?;
    let c = normalizing_constants(&p, 64.0, n, 2)?;
    println!("K=64, M=2: a = {:.8}, b = {:.8}", c.a, c.b);

    println!("\n{:>5} {:>3} {:>12} {:>12} {:>9}", "K", "M", "exact", "asymptotic", "rel");
    for k in [20usize, 50, 100, 200] {
        for m in [1u32, 2, 4] {
            let cell = vec![p.clone(); k];
            let e = sum_rate_exact(&cell, n, m)?.sum_rate;
            let a = sum_rate_asymptotic(&cell, n, m)?;
            println!("{k:>5} {m:>3} {e:>12.6} {a:>12.6} {:>+8.2}%", 100.0 * (a - e) / e);
        }
    }

    let general = LinkProfile::from_scales(30.0, vec![5.0, 1.0])?;
    let d = tail_convergence_diagnostic(&general, n, 2)?;
    println!("\ntail of a general profile: {:?}, limit ≈ {:.6}, converging {}", d.attraction, d.limit_estimate, d.converging);
    Ok(())
}
