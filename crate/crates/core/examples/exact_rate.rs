//! Closed-form rates for the three profile kinds, the quadrature oracle
//! next to them, and a full cell breakdown.

use bestm_sched::channel::LinkProfile;
use bestm_sched::exact_rate::{g_k_evaluated, g_k_quadrature, sum_rate_exact, user_rate_exact};

fn main() -> bestm_sched::Result<()> {
    let profiles = [
        ("noise limited", LinkProfile::noise_limited(20.0)?),
        ("interference limited", LinkProfile::interference_limited(20.0, 4.0)?),
        ("general, J=3", LinkProfile::from_scales(200.0, vec![40.0, 9.0, 2.0])?),
    ];
    for (name, p) in &profiles {
        println!("{name}");
        for eps in [1, 8, 64] {
            let g = g_k_evaluated(p, eps)?;
            println!(
                "  G({eps:>2}) = {:.14}  quadrature {:.14}  route {:?}",
                g.value,
                g_k_quadrature(p, eps)?,
                g.route
            );
        }
        println!("  user rate K0=5, N=16, M=2: {:.10}", user_rate_exact(p, 5, 16, 2)?);
    }

    let cell: Vec<LinkProfile> = profiles.iter().map(|(_, p)| p.clone()).collect();
    let r = sum_rate_exact(&cell, 16, 4)?;
    println!("\ncell of 3, M=4: per user {:?}, sum {:.10} ({} closed-form term groups)", r.per_user, r.sum_rate, r.terms_audit);
    Ok(())
}
