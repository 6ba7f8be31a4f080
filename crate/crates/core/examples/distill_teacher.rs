//! Distil the interaction structure of a gradient-boosted teacher trained on
//! data with two planted interactions.

use gam_distill::data::{Dataset, Matrix, Task};
use gam_distill::distill::{distill, DistillConfig};
use gam_distill::indices::IndexKind;
use gam_distill::learners::{train_gbt, GbtConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> gam_distill::Result<()> {
    let (n, p) = (1500, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        // x0*x1 and x2*x3*x4 interact; x5 is additive.
        y.push(2.0 * row[0] * row[1] + 3.0 * row[2] * row[3] * row[4] + row[5] + 0.05 * rng.random::<f64>());
        x.extend(row);
    }
    let data = Dataset::from_parts(Matrix::new(n, p, x)?, y, Task::Regression)?;
    let teacher = train_gbt(&data, &GbtConfig::default())?;

    for index in [IndexKind::Fbii, IndexKind::Sii, IndexKind::Bii] {
        let cfg = DistillConfig {
            index,
            n_int: 4,
            n_explain: Some(60),
            ..DistillConfig::default()
        };
        let out = distill(&data, &teacher, &cfg)?;
        println!("{} (mean surrogate holdout R2 {:.3})", index.name(), out.mean_holdout_r2().unwrap_or(f64::NAN));
        for r in &out.ranking.interactions {
            println!("  {:<12} count {:>3} mass {:.3}", format!("{:?}", r.subset.indices()), r.count, r.mass);
        }
    }
    Ok(())
}
