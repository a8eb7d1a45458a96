// The change of variables r -> r^k that removes the gradient weight preserves the
// q-energy exactly and turns the weighted gradient energy into a k-modified one.
// On non-radial fields dropping the modification can only lower the energy.
//
//     cargo run --example weight_transform

use std::sync::Arc;

use ckn_lab::bubble::default_grid;
use ckn_lab::transforms::{horiuchi_map, transform_identity_check, Direction};
use ckn_lab::{derive_params, AngularRule, AxisymField, Field};

fn main() -> ckn_lab::Result<()> {
    let prm = derive_params(4, 2.5, 0.2, 0.5)?;
    let grid = default_grid(&prm);
    let ang = Arc::new(AngularRule::new(prm.n, 48)?);
    let u = Field::Axisym(AxisymField::from_fn(grid, ang, |r, psi| {
        let s = r.ln();
        let e = (-s * s / 2.0).exp();
        let m = 1.0 + 0.5 * psi.cos();
        (e * m, -e * s / r * m, -0.5 * e * psi.sin())
    }));

    let rep = transform_identity_check(&u, &prm)?;
    println!("k = {:.4}", prm.k);
    println!("q-energy:  {:.12} -> {:.12}  (residual {:.1e})", rep.q_lhs, rep.q_rhs, rep.q_norm_residual);
    println!("gradient:  {:.12} -> {:.12}  (residual {:.1e})", rep.grad_lhs, rep.grad_rhs, rep.grad_identity_residual);
    println!("drop from removing the k-modification: {:.6}", rep.grad_drop_gap);

    let back = horiuchi_map(&horiuchi_map(&u, &prm, Direction::Forward)?, &prm, Direction::Inverse)?;
    let err = back.values().iter().zip(u.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    println!("forward then inverse: max error {err:.1e}");
    Ok(())
}
