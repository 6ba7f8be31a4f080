//! A small ranking benchmark: several generated datasets, every selection
//! method, interaction budgets 1..4, written to a report directory.

use gam_distill::distill::DistillConfig;
use gam_distill::harness::{run_benchmark, write_benchmark, BenchConfig, BenchDataset, Cache, Metric};
use gam_distill::synthetic::gen_fourier_sparse;

fn main() -> gam_distill::Result<()> {
    let datasets: Vec<BenchDataset> = (0..3)
        .map(|i| {
            let t = gen_fourier_sparse(8, 3, 0.2, 300, 50, 100 + i)?;
            Ok(BenchDataset { name: format!("parity{i}"), data: t.train })
        })
        .collect::<gam_distill::Result<_>>()?;
    let cfg = BenchConfig {
        n_ints: vec![1, 2, 3, 4],
        distill: DistillConfig { n_explain: Some(30), ..DistillConfig::default() },
        ..BenchConfig::default()
    };
    let report = run_benchmark(&datasets, &cfg, &Cache::disabled())?;
    println!("{}", report.header());
    for n_int in &cfg.n_ints {
        let mut row: Vec<(String, f64)> = report
            .ranks
            .rows
            .iter()
            .filter(|r| r.metric == Metric::R2 && r.n_int == *n_int)
            .map(|r| (r.method.clone(), r.average_rank))
            .collect();
        row.sort_by(|a, b| a.1.total_cmp(&b.1));
        println!("N_int {n_int}: {row:?}");
    }
    let dir = std::env::temp_dir().join("gam-distill-benchmark");
    write_benchmark(&dir, &report)?;
    println!("report written to {}", dir.display());
    Ok(())
}
