//! Fit a sparse Fourier surrogate to a masked value function and compare the
//! recovered spectrum with the generating one.

use gam_distill::fourier::{fit_surrogate, parity, FeatureSet, FnValue, Mask, SurrogateConfig};

fn main() -> gam_distill::Result<()> {
    let p = 10;
    let truth = [
        (FeatureSet::EMPTY, 0.5),
        (FeatureSet::of(&[1]), 1.0),
        (FeatureSet::of(&[2, 5]), -0.75),
        (FeatureSet::of(&[0, 3, 7]), 0.4),
    ];
    let f = FnValue::new(p, |m: Mask| {
        truth.iter().map(|(s, c)| c * parity(*s, m).expect("mask width matches")).sum()
    });

    let s = fit_surrogate(&f, &SurrogateConfig::default())?;
    println!("queries {} of a {}-term basis", s.diagnostics.queries, s.diagnostics.basis_size);
    println!("holdout R2 {:?}", s.diagnostics.holdout_r2);
    for (set, c) in s.terms() {
        println!("{:>12} {c:+.6}", format!("{:?}", set.indices()));
    }
    let m = Mask::from_bools(&[true, false, true, true, false, true, false, true, true, false])?;
    println!("f(m) = {:.6}, surrogate(m) = {:.6}", (f.f)(m), s.eval(m)?);
    Ok(())
}
