// Empirical constants of the six two-dimensional vector inequalities, with a
// refinement and a joint-scaling check.
//
//     cargo run --example elementary_inequalities

use ckn_lab::critical::{elementary_c_estimate, elementary_ratio_scaled};

fn main() -> ckn_lab::Result<()> {
    for case in 1..=6u8 {
        let exponent = if case % 2 == 1 { 2.5 } else { 3.5 };
        let coarse = elementary_c_estimate(case, exponent, 100)?;
        let fine = elementary_c_estimate(case, exponent, 200)?;
        let scaled = elementary_ratio_scaled(&fine, 7.0);
        println!(
            "case {case} exponent {exponent}: C {:.8} (coarse {:.8}), scaled ratio {:.8}, at |y| {:.3} angle {:.3}",
            fine.c, coarse.c, scaled, fine.rho, fine.theta
        );
    }
    Ok(())
}
