//! End to end on a CSV file: load, distil, fit the GAM with the selected
//! interactions, and save the model and its term tables.

use std::fs;

use gam_distill::data::{load_csv, split};
use gam_distill::distill::{distill, DistillConfig};
use gam_distill::gam::{fit_gam, GamModel, GamTrainConfig};
use gam_distill::harness::metrics;
use gam_distill::learners::{LearnerSpec, Predictor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> gam_distill::Result<()> {
    let dir = std::env::temp_dir().join("gam-distill-csv");
    fs::create_dir_all(&dir).expect("temp dir");
    let path = dir.join("houses.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut text = String::from("area,rooms,district,age,price\n");
    for _ in 0..800 {
        let area: f64 = rng.random_range(40.0..200.0);
        let rooms = rng.random_range(1..6);
        let district = ["north", "south", "centre"][rng.random_range(0..3)];
        let age: f64 = rng.random_range(0.0..80.0);
        let premium = if district == "centre" { 2.0 * area } else { 0.0 };
        let price = 3.0 * area + 10.0 * rooms as f64 + premium - 0.5 * age + rng.random_range(-5.0..5.0);
        text.push_str(&format!("{area:.1},{rooms},{district},{age:.0},{price:.1}\n"));
    }
    fs::write(&path, text).expect("write csv");

    let data = load_csv(&path, "price", None)?;
    let (train, test) = split(&data, 0.7, 0)?;
    let teacher = LearnerSpec::from_name("gbt")?.fit(&train)?;
    let cfg = DistillConfig { n_int: 2, n_explain: Some(50), ..DistillConfig::default() };
    let out = distill(&train, teacher.as_ref(), &cfg)?;
    let names = data.feature_names();
    for r in &out.ranking.interactions {
        let label: Vec<&str> = r.subset.iter().map(|j| names[j].as_str()).collect();
        println!("{} (count {})", label.join(" x "), r.count);
    }

    let model = fit_gam(&train, &out.ranking.subsets(), &GamTrainConfig::default())?;
    println!("{:?}", metrics(&model.predict(&test.features)?, &test.target, data.task)?);
    fs::write(dir.join("model.json"), model.to_json()?).expect("write model");
    let back = GamModel::from_json(&fs::read_to_string(dir.join("model.json")).expect("read model"))?;
    assert_eq!(back.terms.len(), model.terms.len());
    for (i, t) in model.terms.iter().enumerate() {
        fs::write(dir.join(format!("term{i}.csv")), model.term_table_csv(i)?).expect("write table");
        println!("term {i}: {} ({} cells)", t.name(&names), t.n_cells());
    }
    Ok(())
}
