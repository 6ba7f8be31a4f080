//! Every interaction index on one small game, computed both from the full
//! value table and from a Fourier representation.

use gam_distill::fourier::{brute_force_wht, FeatureSet, FourierSurrogate};
use gam_distill::indices::{
    bii_scores, fbii_from_fourier, fsii, index_from_surrogate, mobius, shapley_values, sii_scores, stii, IndexKind,
    SetFunction,
};

fn show(title: &str, scores: &gam_distill::indices::IndexScores) {
    println!("{title}");
    for (s, v) in scores.ranked().into_iter() {
        println!("  {:>10} {v:+.4}", format!("{:?}", s.indices()));
    }
}

fn main() -> gam_distill::Result<()> {
    // A 3-player game: player 0 alone is worth 1; 1 and 2 are only worth
    // something together.
    let f = SetFunction::from_fn(vec![0, 1, 2], |s: FeatureSet| {
        let mut v = 0.0;
        if s.contains(0) {
            v += 1.0;
        }
        if s.contains(1) && s.contains(2) {
            v += 2.0;
        }
        v
    })?;

    println!("Shapley values {:?}", shapley_values(&f));
    show("Moebius", &mobius(&f)?);
    show("BII (order 2)", &bii_scores(&f, 2));
    show("SII (order 2)", &sii_scores(&f, 2));
    show("STII (k = 2)", &stii(&f, 2)?);
    show("FSII (k = 2)", &fsii(&f, 2)?);

    // The same game in the parity basis.
    let coef = brute_force_wht(f.values())?;
    let terms: Vec<(FeatureSet, f64)> = coef
        .iter()
        .enumerate()
        .filter(|(_, c)| c.abs() > 1e-12)
        .map(|(b, c)| (FeatureSet::from_bits(b as u64), *c))
        .collect();
    let s = FourierSurrogate::new(3, 3, terms)?;
    show("FBII from the spectrum (k = 2)", &fbii_from_fourier(&s, 2)?);
    for kind in IndexKind::ALL {
        let top = index_from_surrogate(kind, &s, 2)?.ranked().into_iter().find(|(s, _)| s.len() == 2);
        println!("{:<6} top pair {:?}", kind.name(), top.map(|(s, v)| (s.indices(), v)));
    }
    Ok(())
}
