mod common;

use common::*;
use gam_distill::fourier::{FeatureSet, FourierSurrogate};
use gam_distill::indices::{
    bii, bii_scores, fbii_from_fourier, fsii, mobius, mobius_table, shapley_values, sii_scores, stii, zeta_table,
};
use proptest::prelude::*;
use rand::Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn bii_is_scaled_fourier_coefficient() {
    let mut r = rng(1);
    for n in 3..=7 {
        let table = random_table(n, &mut r);
        let f = set_function(&table);
        let c = naive_wht(&table);
        for s in 1..table.len() {
            let want = (-2.0f64).powi(s.count_ones() as i32) * c[s];
            let got = bii(&f, FeatureSet::from_bits(s as u64)).unwrap();
            assert!(close(got, want, 1e-9), "n={n} S={s:b}: {got} vs {want}");
        }
        for (s, v) in bii_scores(&f, n).ranked() {
            assert!(close(v, (-2.0f64).powi(s.len() as i32) * c[s.bits() as usize], 1e-9));
        }
    }
}

#[test]
fn shapley_efficiency_and_direct_formula() {
    let mut r = rng(2);
    for n in 3..=8 {
        let table = random_table(n, &mut r);
        let f = set_function(&table);
        let full = table[table.len() - 1] - table[0];
        let sii = sii_scores(&f, 1);
        let sum: f64 = sii.ranked().iter().map(|(_, v)| v).sum();
        assert!(close(sum, full, 1e-10));
        let direct = direct_shapley(&table);
        for (i, v) in shapley_values(&f).iter().enumerate() {
            assert!(close(*v, direct[i], 1e-10));
        }
    }
}

#[test]
fn stii_is_efficient_for_small_orders() {
    let mut r = rng(3);
    for n in 3..=7 {
        let table = random_table(n, &mut r);
        let f = set_function(&table);
        let full = table[table.len() - 1] - table[0];
        for k in 1..=3 {
            let sum: f64 = stii(&f, k).unwrap().ranked().iter().map(|(_, v)| v).sum();
            assert!(close(sum, full, 1e-10), "n={n} k={k}: {sum} vs {full}");
        }
    }
}

#[test]
fn fsii_order_one_is_shapley() {
    let mut r = rng(4);
    for n in 3..=7 {
        let table = random_table(n, &mut r);
        let scores = fsii(&set_function(&table), 1).unwrap();
        let direct = direct_shapley(&table);
        for (i, want) in direct.iter().enumerate() {
            let got = scores.get(FeatureSet::of(&[i])).unwrap();
            assert!(close(got, *want, 1e-8), "n={n} i={i}: {got} vs {want}");
        }
    }
}

#[test]
fn fbii_matches_least_squares_oracle() {
    let mut r = rng(5);
    for n in 3..=7 {
        let table = random_table(n, &mut r);
        let s = exact_surrogate(&table);
        for k in 1..=3.min(n) {
            let oracle = fbii_wls_oracle(&table, k);
            let got = fbii_from_fourier(&s, k).unwrap();
            for (set, want) in &oracle {
                let g = got.get(*set).unwrap_or(0.0);
                assert!(close(g, *want, 1e-8), "n={n} k={k} S={:?}: {g} vs {want}", set.indices());
            }
            assert!(got.ranked().iter().all(|(set, _)| oracle.contains_key(set)));
        }
    }
}

#[test]
fn sparse_surrogate_fbii_matches_oracle_on_64_masks() {
    // 4-sparse surrogate on p=6, degree <= 2 fit over all 64 masks.
    let mut r = rng(6);
    for _ in 0..10 {
        let mut terms = vec![(FeatureSet::EMPTY, r.random_range(-1.0..1.0))];
        while terms.len() < 4 {
            let bits = r.random_range(1u64..64);
            if FeatureSet::from_bits(bits).len() <= 3 && terms.iter().all(|t| t.0.bits() != bits) {
                terms.push((FeatureSet::from_bits(bits), r.random_range(-1.0..1.0)));
            }
        }
        let s = FourierSurrogate::new(6, 3, terms).unwrap();
        let table: Vec<f64> = (0..64u64)
            .map(|m| s.eval(gam_distill::fourier::Mask::new(m, 6).unwrap()).unwrap())
            .collect();
        let oracle = fbii_wls_oracle(&table, 2);
        let got = fbii_from_fourier(&s, 2).unwrap();
        for (set, want) in &oracle {
            assert!(close(got.get(*set).unwrap_or(0.0), *want, 1e-8));
        }
    }
}

#[test]
fn mobius_matches_definition_and_round_trips() {
    let mut r = rng(7);
    for n in 3..=8 {
        let table = random_table(n, &mut r);
        let m = mobius_table(&table);
        let naive = naive_mobius(&table);
        for (a, b) in m.iter().zip(&naive) {
            assert!(close(*a, *b, 1e-12));
        }
        for (a, b) in zeta_table(&m).iter().zip(&table) {
            assert!(close(*a, *b, 1e-12));
        }
        let scores = mobius(&set_function(&table)).unwrap();
        for (set, v) in scores.ranked() {
            assert!(close(v, naive[set.bits() as usize], 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn efficiency_holds_for_arbitrary_games(n in 3usize..=6, seed in any::<u64>()) {
        let table = random_table(n, &mut rng(seed));
        let f = set_function(&table);
        let full = table[table.len() - 1] - table[0];
        let sh: f64 = shapley_values(&f).iter().sum();
        prop_assert!(close(sh, full, 1e-10));
        let st: f64 = stii(&f, 2).unwrap().ranked().iter().map(|(_, v)| v).sum();
        prop_assert!(close(st, full, 1e-10));
    }

    #[test]
    fn indices_are_linear_in_the_game(n in 3usize..=5, seed in any::<u64>(), a in -3.0f64..3.0) {
        let mut r = rng(seed);
        let t1 = random_table(n, &mut r);
        let t2 = random_table(n, &mut r);
        let mix: Vec<f64> = t1.iter().zip(&t2).map(|(x, y)| a * x + y).collect();
        let (f1, f2, fm) = (set_function(&t1), set_function(&t2), set_function(&mix));
        for (s, v) in bii_scores(&fm, 2).ranked() {
            let want = a * bii(&f1, s).unwrap() + bii(&f2, s).unwrap();
            prop_assert!(close(v, want, 1e-9));
        }
        let (g1, g2, gm) = (fsii(&f1, 2).unwrap(), fsii(&f2, 2).unwrap(), fsii(&fm, 2).unwrap());
        for (s, v) in gm.ranked() {
            let want = a * g1.get(s).unwrap_or(0.0) + g2.get(s).unwrap_or(0.0);
            prop_assert!(close(v, want, 1e-8));
        }
    }
}
