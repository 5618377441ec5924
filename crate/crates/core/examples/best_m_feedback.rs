//! Best-M feedback: the scheduler-side CQI CDF as a polynomial in the
//! per-block CDF, and how many users report on a block.

use bestm_sched::channel::LinkProfile;
use bestm_sched::feedback::{bestm_cdf, feedback_count_pmf, xi1, xi2, BestMPoly};

fn main() -> bestm_sched::Result<()> {
    let n = 16;
    for m in [1u32, 2, 4] {
        let coeffs: Vec<f64> = (0..m).map(|i| xi1(n, m, i)).collect::<Result<_, _>>()?;
        println!("N={n} M={m}: xi1 = {coeffs:?}");
    }
    println!("xi2(16, 2, 2, ·) = {:?}", (0..3).map(|i| xi2(16, 2, 2, i)).collect::<Result<Vec<_>, _>>()?);

    let p = LinkProfile::noise_limited(10.0)?;
    println!("\n{:>6} {:>12} {:>12} {:>12} {:>12}", "x", "F", "M=1", "M=4", "M=16");
    for x in [2.0, 5.0, 10.0, 20.0, 40.0] {
        let row: Vec<f64> = [1, 4, 16].iter().map(|&m| bestm_cdf(&p, n, m, x)).collect::<Result<_, _>>()?;
        println!("{x:>6} {:>12.8} {:>12.8} {:>12.8} {:>12.8}", p.cdf(x), row[0], row[1], row[2]);
    }

    let poly = BestMPoly::get(n, 4)?;
    println!("\nM=4 quantile at q=0.9 in F-space: {:.10}", poly.invert(0.9).0);

    let k = 10;
    println!("\nreports per block, K0={k}, M=4:");
    for tau in 0..=4 {
        println!("  P(τ = {tau}) = {:.6}", feedback_count_pmf(k, 4, n, tau)?);
    }
    Ok(())
}
