//! Exponential integral, Beta function and `2F1(1,1;c;z)`, each checked
//! against direct quadrature of its integral definition.

use bestm_sched::specfun::{
    adaptive_quad, adaptive_quad_halfline, beta_fn, exp_integral_e1, hyp2f1_unit_params, QuadratureConfig,
};

fn main() -> bestm_sched::Result<()> {
    let cfg = QuadratureConfig::relative(1e-12);
    println!("{:>6} {:>22} {:>22}", "x", "E1(x)", "quadrature");
    for x in [0.01, 0.5, 1.0, 5.0, 20.0] {
        // E1(x) = ∫_0^∞ e^(−x(1+t))/(1+t) dt
        let q = adaptive_quad_halfline(|t| (-x * (1.0 + t)).exp() / (1.0 + t), &cfg)?;
        println!("{x:>6} {:>22.15e} {:>22.15e}", exp_integral_e1(x)?, q);
    }

    println!("\nB(2.5, 3.5) = {:.15}", beta_fn(2.5, 3.5)?);

    println!("\n{:>4} {:>6} {:>20} {:>20}", "c", "z", "2F1(1,1;c;z)", "Euler integral");
    for (c, z) in [(2u32, 0.3), (5, 0.9), (17, -4.0)] {
        let q = adaptive_quad(|t| (c - 1) as f64 * (1.0 - t).powi(c as i32 - 2) / (1.0 - z * t), 0.0, 1.0, &cfg)?;
        println!("{c:>4} {z:>6} {:>20.15} {:>20.15}", hyp2f1_unit_params(c, z)?, q);
    }
    Ok(())
}
