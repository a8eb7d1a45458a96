// Quantities along u = V + eps*rho: the two energy gaps scale like eps^2 and
// eps^p, and the Euler-Lagrange residual times |rho| like eps^2.
//
//     cargo run --release --example near_manifold_scalings

use ckn_lab::bubble::{default_grid, Bubble};
use ckn_lab::critical::thm5_sweep;
use ckn_lab::manifold::orthogonalize;
use ckn_lab::stability::normalized_bump;
use ckn_lab::derive_params;

fn main() -> ckn_lab::Result<()> {
    let prm = derive_params(4, 3.0, 0.2, 0.4)?;
    let grid = default_grid(&prm);
    let rho = orthogonalize(&normalized_bump(&prm, &grid, 0.0, 0.6)?, &Bubble::canonical(&prm, 1.0)?, &prm)?;
    let eps = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1];
    let sweep = thm5_sweep(&prm, &eps, &rho, 12)?;
    for i in 0..sweep.eps.len() {
        println!(
            "eps {:.0e}: Q {:.3e}  N {:.3e}  residual*rho {:.3e}",
            sweep.eps[i], sweep.q[i], sweep.n[i], sweep.residual_times_rho[i]
        );
    }
    println!("slopes: Q {:.3}  N {:.3}  residual {:.3}", sweep.q_slope, sweep.n_slope, sweep.residual_slope);
    Ok(())
}
