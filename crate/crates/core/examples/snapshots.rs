// Fields are saved and loaded bit for bit, grid included.
//
//     cargo run --example snapshots

use ckn_lab::bubble::{default_grid, Bubble};
use ckn_lab::derive_params;
use ckn_lab::snapshot::{load_snapshot, save_snapshot};

fn main() -> ckn_lab::Result<()> {
    let prm = derive_params(3, 2.0, 0.0, 0.0)?;
    let v = Bubble::canonical(&prm, 1.0)?.field(&prm, &default_grid(&prm), None)?;
    let path = std::env::temp_dir().join("ckn-bubble.field");
    save_snapshot(&v, &path)?;
    let back = load_snapshot(&path)?;
    println!("{} values written to {}, identical after reload: {}", v.values().len(), path.display(), back == v);
    Ok(())
}
