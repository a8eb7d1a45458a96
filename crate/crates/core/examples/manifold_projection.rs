// Projects a perturbed bubble onto the manifold of extremals and recovers the
// amplitude and scale it started from.
//
//     cargo run --example manifold_projection

use ckn_lab::bubble::{default_grid, Bubble};
use ckn_lab::functionals::d_norm;
use ckn_lab::manifold::{manifold_projection, mu_rho_decompose};
use ckn_lab::stability::normalized_bump;
use ckn_lab::derive_params;

fn main() -> ckn_lab::Result<()> {
    let prm = derive_params(4, 2.5, 0.2, 0.5)?;
    let grid = default_grid(&prm);
    let truth = Bubble::new(Bubble::canonical(&prm, 1.7)?.amplitude * 0.8, 1.7, 0.0)?;
    let v = truth.field(&prm, &grid, None)?;
    let u = v.add_scaled(0.05 * d_norm(&v, &prm)?, &normalized_bump(&prm, &grid, 2.0, 0.5)?)?;

    let proj = manifold_projection(&u, &prm)?;
    println!("true bubble:      amplitude {:.6} scale {:.6}", truth.amplitude, truth.scale);
    println!("nearest bubble:   amplitude {:.6} scale {:.6}", proj.bubble.amplitude, proj.bubble.scale);
    println!("distance {:.6e} ({} of {} restarts agree)", proj.distance, proj.agreeing, proj.restarts);

    let dec = mu_rho_decompose(&u, &proj.bubble, &prm)?;
    println!("{dec:#?}");
    Ok(())
}
