//! Sparse-parity recovery: does distillation of a GBT teacher find the
//! generating interactions? Runs a few seeds of the k = 4 setting and then a
//! reduced learner comparison over the Exp2 noise grid.

use gam_distill::distill::DistillConfig;
use gam_distill::harness::{run_scenario_a, scenario_a_recovery, summarize_scenario_a, Cache, ScenarioAConfig};
use gam_distill::learners::GbtConfig;
use gam_distill::synthetic::{gen_fourier_sparse, scenario_a_grids};

fn main() -> gam_distill::Result<()> {
    let cfg = DistillConfig { n_int: 3, ..DistillConfig::default() };
    for seed in 0..3 {
        let task = gen_fourier_sparse(10, 4, 0.1, 500, 200, seed)?;
        let r = scenario_a_recovery(&task, &GbtConfig::default(), &cfg)?;
        println!(
            "seed {seed}: generating {:?}, top-3 {:?}, hits {}, teacher R2 {:.3}",
            r.generating.iter().map(|s| s.indices()).collect::<Vec<_>>(),
            r.ranking.top(3).iter().map(|s| s.indices()).collect::<Vec<_>>(),
            r.hits,
            r.teacher_r2
        );
    }

    let exp2 = &scenario_a_grids()[1];
    let run = ScenarioAConfig { seeds: vec![0, 1], ..ScenarioAConfig::default() };
    let rows = run_scenario_a(exp2, &run, &Cache::disabled())?;
    for s in summarize_scenario_a(&rows) {
        println!("{}={:<4} {:<7} R2 {:.3} ± {:.3}", s.x_name, s.x_value, s.learner, s.mean, s.std);
    }
    Ok(())
}
