// Ratio of the second variation to the weighted L2 pairing on directions
// orthogonal to the tangent space. Values above one mean a spectral gap.
//
//     cargo run --release --example spectral_gap

use ckn_lab::bubble::{default_grid, Bubble};
use ckn_lab::critical::spectral_gap_ratio;
use ckn_lab::manifold::orthogonalize;
use ckn_lab::stability::normalized_bump;
use ckn_lab::derive_params;

fn main() -> ckn_lab::Result<()> {
    let prm = derive_params(4, 3.0, 0.2, 0.4)?;
    let grid = default_grid(&prm);
    let v = Bubble::canonical(&prm, 1.0)?;
    let mut min = f64::INFINITY;
    for i in 0..9 {
        let c = -3.0 + 0.75 * i as f64;
        let rho = orthogonalize(&normalized_bump(&prm, &grid, c, 0.6)?, &v, &prm)?;
        let rep = spectral_gap_ratio(&v, &rho, &prm)?;
        min = min.min(rep.ratio);
        println!("probe at log r = {c:+.2}: ratio {:.5}", rep.ratio);
    }
    println!("minimum ratio {min:.5}");
    Ok(())
}
