// Maps a field between two weight pairs on the same scaling line and checks that
// the gradient energy can only decrease, with equality for radial fields.
//
//     cargo run --example monotonicity_chain

use std::sync::Arc;

use ckn_lab::grid::RadialGrid;
use ckn_lab::stability::monotonicity_chain_check;
use ckn_lab::{derive_hat_params, AngularRule, AxisymField, Field};

fn main() -> ckn_lab::Result<()> {
    let hp = derive_hat_params(4, 2.5, 0.1, 0.4, 0.3, 0.6)?;
    let grid = Arc::new(RadialGrid::for_params(&hp.target));
    let ang = Arc::new(AngularRule::new(4, 48)?);
    for tilt in [0.0, 0.4, 0.8] {
        let u = Field::Axisym(AxisymField::from_fn(grid.clone(), ang.clone(), |r, psi| {
            let s = r.ln() - 0.3;
            let e = (-s * s / 0.8).exp();
            let m = 1.0 + tilt * psi.cos();
            (e * m, -2.0 * e * s / (0.8 * r) * m, -tilt * e * psi.sin())
        }));
        let rec = monotonicity_chain_check(&u, &hp)?;
        println!("tilt {tilt}: gradient gap {:+.3e}, q-norm residual {:.1e}", rec.grad_chain_gap, rec.qnorm_residual);
    }
    Ok(())
}
