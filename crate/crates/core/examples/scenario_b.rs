//! Tree-teacher fidelity: GAM students trained on a depth-D tree's labels,
//! additive-only versus distilled versus FAST interactions.

use gam_distill::harness::{run_scenario_b, summarize_scenario_b, Cache, ScenarioBConfig};

fn main() -> gam_distill::Result<()> {
    let cfg = ScenarioBConfig {
        depths: vec![1, 4, 8],
        seeds: vec![0, 1],
        ..ScenarioBConfig::fast()
    };
    let rows = run_scenario_b(&cfg, &Cache::disabled())?;
    for s in summarize_scenario_b(&rows) {
        println!("depth {:>2} {:<10} fidelity {:.4}", s.depth, s.student, s.accuracy);
    }
    Ok(())
}
