// Prints the derived exponents and the sharp constant for a few parameter tuples,
// next to the Rayleigh quotient of the extremal computed by quadrature.
//
//     cargo run --example sharp_constants

use ckn_lab::bubble::{default_grid, Bubble};
use ckn_lab::functionals::functional_report;
use ckn_lab::{derive_params, sharp_constant};

fn main() -> ckn_lab::Result<()> {
    println!("{:>3} {:>5} {:>5} {:>5} {:>10} {:>8} {:>8} {:>14} {:>10}", "n", "p", "a", "b", "q", "gamma", "k", "S", "rel.err");
    for (n, p, a, b) in [(3, 2.0, 0.0, 0.0), (4, 2.5, 0.2, 0.5), (5, 2.0, 0.5, 1.0), (8, 3.0, 0.0, 0.0)] {
        let prm = derive_params(n, p, a, b)?;
        let s = sharp_constant(&prm);
        let v = Bubble::canonical(&prm, 1.0)?.field(&prm, &default_grid(&prm), None)?;
        let rep = functional_report(&v, &prm)?;
        let quotient = rep.grad_term.powf(1.0 / p) / rep.q_term.powf(1.0 / prm.q);
        println!(
            "{n:>3} {p:>5} {a:>5} {b:>5} {:>10.6} {:>8.4} {:>8.4} {s:>14.10} {:>10.2e}",
            prm.q,
            prm.gamma,
            prm.k,
            (quotient - s).abs() / s
        );
    }
    Ok(())
}
