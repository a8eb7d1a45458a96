// Log-log slope of the deficit against the relative distance along u = V + eps*phi.
// Bumps near the core give the quadratic rate. For p > 2 a bump pushed far into
// the tail of the bubble gives the slower rate p, so the worst case is max{2, p}.
//
//     cargo run --release --example exponent_slope

use ckn_lab::bubble::{default_grid, Bubble};
use ckn_lab::functionals::d_norm;
use ckn_lab::manifold::orthogonalize;
use ckn_lab::stability::{exponent_slope_fit, normalized_bump};
use ckn_lab::derive_params;

fn main() -> ckn_lab::Result<()> {
    let eps: Vec<f64> = (0..6).map(|i| 10f64.powf(-2.5 + 0.3 * i as f64)).collect();
    for ((n, p, a, b), center) in [((3, 2.0, 0.0, 0.0), 0.0), ((4, 2.5, 0.2, 0.5), 0.0), ((4, 2.5, 0.2, 0.5), 40.0)] {
        let prm = derive_params(n, p, a, b)?;
        let grid = default_grid(&prm);
        let z = normalized_bump(&prm, &grid, center, 0.5)?;
        let zo = orthogonalize(&z, &Bubble::canonical(&prm, 1.0)?, &prm)?;
        let phi = zo.scaled(d_norm(&z, &prm)? / d_norm(&zo, &prm)?);
        let fit = exponent_slope_fit(&prm, &eps, &phi)?;
        println!("({n}, {p}, {a}, {b}) bump at log r = {center}: slope {:.4}", fit.slope);
        for ((e, d), f) in fit.eps.iter().zip(&fit.relative_distance).zip(&fit.deficit) {
            println!("    eps {e:.2e}  distance {d:.3e}  deficit {f:.3e}");
        }
    }
    Ok(())
}
