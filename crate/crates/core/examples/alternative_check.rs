// Classifies a field by its normalized pairing with the nearest bubble and
// reports the residual-over-distance ratio on the selected branch.
//
//     cargo run --release --example alternative_check

use ckn_lab::bubble::{default_grid, Bubble};
use ckn_lab::critical::{alternative_check, AlternativeBranch};
use ckn_lab::functionals::d_norm;
use ckn_lab::stability::normalized_bump;
use ckn_lab::derive_params;

fn main() -> ckn_lab::Result<()> {
    let prm = derive_params(4, 2.5, 0.2, 0.5)?;
    let grid = default_grid(&prm);
    let v = Bubble::canonical(&prm, 1.0)?.field(&prm, &grid, None)?;
    let u = v.add_scaled(0.05 * d_norm(&v, &prm)?, &normalized_bump(&prm, &grid, 1.0, 0.5)?)?;
    for (c1, big_c1) in [(0.5, 2.0), (1.0, 1.2)] {
        let rep = alternative_check(&u, &prm, c1, big_c1)?;
        print!("c1 {c1}, C1 {big_c1}: A_u {:.4} in [{:.3}, {:.3}]? ", rep.a_u, rep.interval.0, rep.interval.1);
        match rep.branch {
            AlternativeBranch::Degenerate => println!("degenerate"),
            AlternativeBranch::Uniform { kappa, .. } => println!("no, kappa {kappa:.4e}"),
            AlternativeBranch::Interpolated { eta, kappa_min, .. } => {
                println!("yes, eta {eta:.3e}, min kappa {kappa_min:.4e}")
            }
        }
    }
    Ok(())
}
