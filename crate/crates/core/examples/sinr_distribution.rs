//! Per-block SINR statistics of one user: the product-form CDF against the
//! mixture form and a Monte Carlo histogram.

use bestm_sched::channel::{sinr_cdf, sinr_cdf_inv, LinkProfile};
use bestm_sched::simulator::slot_sinr;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bestm_sched::Result<()> {
    let p = LinkProfile::from_scales(40.0, vec![6.0, 1.5, 0.4])?;
    let mix = p.mixture().expect("general profile");
    println!("interferer weights {:?}", mix.weights);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws: Vec<f64> = (0..20_000).flat_map(|_| slot_sinr(&p, 16, &mut rng)).collect();
    println!("\n{:>8} {:>14} {:>14} {:>14}", "x", "product form", "mixture form", "empirical");
    for x in [0.5, 2.0, 5.0, 10.0, 40.0] {
        let emp = draws.iter().filter(|&&z| z <= x).count() as f64 / draws.len() as f64;
        println!("{x:>8} {:>14.8} {:>14.8} {emp:>14.8}", sinr_cdf(&p, x), p.cdf_mixture_form(x));
    }

    let median = sinr_cdf_inv(&p, 0.5)?;
    println!("\nmedian SINR {median:.6}, (1 − F)/f there {:.6}, tail limit ρ0 = {}", p.mills_ratio(median), p.rho0());
    Ok(())
}
