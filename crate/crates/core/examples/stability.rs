//! How much of each index's top-8 survives when fewer samples are explained.

use gam_distill::harness::{run_stability, Cache, StabilityConfig};
use gam_distill::synthetic::gen_fourier_sparse;

fn main() -> gam_distill::Result<()> {
    let task = gen_fourier_sparse(10, 5, 0.1, 600, 50, 11)?;
    let cfg = StabilityConfig {
        sample_sizes: vec![25, 50, 100],
        reference_size: 100,
        ..StabilityConfig::default()
    };
    for row in run_stability(&task.train, &cfg, &Cache::disabled())? {
        let cells: Vec<String> = row
            .entries
            .iter()
            .map(|e| format!("{}:{:.2}{}", e.budget, e.overlap, if e.flagged { "*" } else { "" }))
            .collect();
        println!("{:<7} {}", row.method, cells.join("  "));
    }
    Ok(())
}
