//! A GAM on XOR-labelled data, with and without the pair term, and its
//! per-term shape tables.

use gam_distill::data::{split, Dataset, Matrix, Task};
use gam_distill::fourier::FeatureSet;
use gam_distill::gam::{fit_gam, GamTrainConfig};
use gam_distill::harness::{metrics, Metric};
use gam_distill::learners::Predictor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> gam_distill::Result<()> {
    let n = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let row: Vec<f64> = (0..4).map(|_| rng.random_range(0..2) as f64).collect();
        y.push(((row[0] as u8) ^ (row[1] as u8)) as f64);
        x.extend(row);
    }
    let data = Dataset::from_parts(Matrix::new(n, 4, x)?, y, Task::Binary)?;
    let (train, test) = split(&data, 0.7, 0)?;
    let cfg = GamTrainConfig::default();

    for interactions in [vec![], vec![FeatureSet::of(&[0, 1])]] {
        let model = fit_gam(&train, &interactions, &cfg)?;
        let scores = metrics(&model.predict(&test.features)?, &test.target, Task::Binary)?;
        println!(
            "interactions {:?}: test accuracy {:.3}, best rounds {:?}",
            interactions.iter().map(|s| s.indices()).collect::<Vec<_>>(),
            scores[&Metric::Accuracy],
            model.log.best_rounds
        );
        if let Some(t) = model.terms.iter().position(|t| t.features.len() == 2) {
            print!("{}", model.term_table_csv(t)?);
        }
    }
    Ok(())
}
