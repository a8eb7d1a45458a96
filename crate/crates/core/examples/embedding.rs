// Implied constants of the weak-Lebesgue embeddings for mollified bubbles
// supported in the unit ball. The constant does not change when u is rescaled.
//
//     cargo run --example embedding

use ckn_lab::bubble::{default_grid, Bubble};
use ckn_lab::derive_params;
use ckn_lab::stability::{embedding_check, mollify, EmbeddingVariant};

fn main() -> ckn_lab::Result<()> {
    let prm = derive_params(4, 2.5, 0.2, 0.5)?;
    let grid = default_grid(&prm);
    for scale in [0.2, 1.0, 5.0] {
        let v = Bubble::canonical(&prm, scale)?.field(&prm, &grid, None)?;
        let u = mollify(&v, 1.0);
        for variant in [EmbeddingVariant::Grad, EmbeddingVariant::Value] {
            let a = embedding_check(&u, &prm, 1.0, variant)?;
            let b = embedding_check(&u.scaled(3.0), &prm, 1.0, variant)?;
            println!("scale {scale} {variant:?}: K {:.6}, after u -> 3u {:.6}", a.kbar, b.kbar);
        }
    }
    Ok(())
}
