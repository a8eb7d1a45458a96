// Bubbles have zero deficit; a small bump added to one does not.
//
//     cargo run --example bubble_deficit

use ckn_lab::bubble::{default_grid, Bubble};
use ckn_lab::functionals::{d_norm, deficit, raw_deficit};
use ckn_lab::manifold::orthogonalize;
use ckn_lab::stability::normalized_bump;
use ckn_lab::derive_params;

fn main() -> ckn_lab::Result<()> {
    let prm = derive_params(4, 2.5, 0.2, 0.5)?;
    let grid = default_grid(&prm);
    for (factor, scale) in [(1.0, 1.0), (0.3, 0.5), (4.0, 2.0)] {
        let canon = Bubble::canonical(&prm, scale)?;
        let v = Bubble::new(canon.amplitude * factor, scale, 0.0)?.field(&prm, &grid, None)?;
        println!("bubble amplitude x{factor} scale {scale}: deficit {:.3e}", raw_deficit(&v, &prm)?);
    }

    let canon = Bubble::canonical(&prm, 1.0)?;
    let v = canon.field(&prm, &grid, None)?;
    let bump = orthogonalize(&normalized_bump(&prm, &grid, 0.5, 0.6)?, &canon, &prm)?;
    for eps in [1e-3, 1e-2, 1e-1] {
        let u = v.add_scaled(eps * d_norm(&v, &prm)?, &bump)?;
        println!("bubble + {eps:e} bump: deficit {:.3e}", deficit(&u, &prm)?);
    }
    Ok(())
}
