// Scans a random perturbation family and reports the smallest stability ratio,
// an upper bound on the stability constant.
//
//     cargo run --release --example stability_scan

use ckn_lab::derive_params;
use ckn_lab::stability::{k_upper_scan, FamilySpec};

fn main() -> ckn_lab::Result<()> {
    for (n, p, a, b) in [(3, 2.0, 0.0, 0.0), (4, 2.5, 0.2, 0.5)] {
        let prm = derive_params(n, p, a, b)?;
        let scan = k_upper_scan(&FamilySpec::random(11), &prm, 12)?;
        println!("({n}, {p}, {a}, {b}) exponent {}: upper bound {:.4} from sample {}", scan.records[0].alpha, scan.upper_bound, scan.argmin);
        for r in &scan.records {
            println!("    relative distance {:.3e}  deficit {:.3e}  ratio {:.4}", r.relative_distance, r.deficit, r.ratio);
        }
    }
    Ok(())
}
