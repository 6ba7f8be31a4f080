//! The FAST pair heuristic: rank pairs by how much a joint binned fit of the
//! additive model's residuals beats either feature alone.

use gam_distill::data::{Dataset, Matrix, Task};
use gam_distill::gam::{fast_select_pairs, fit_gam, GamTrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> gam_distill::Result<()> {
    let (n, p) = (1000, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        y.push(row[0] + (row[2] * row[4]).signum() + 0.1 * rng.random::<f64>());
        x.extend(row);
    }
    let data = Dataset::from_parts(Matrix::new(n, p, x)?, y, Task::Regression)?;
    let additive = fit_gam(&data, &[], &GamTrainConfig::default())?;
    for s in fast_select_pairs(&data, &additive, 5, 8)? {
        println!("{:?} {:.3}", s.pair.indices(), s.score);
    }
    Ok(())
}
