//! Kraus and Choi forms, composition and tensor products.
use qrecover::channels::{
    choi_from_kraus, compose, depolarizing_channel, kraus_from_choi, partial_trace_channel, random_channel,
    tensor_channels,
};
use qrecover::linalg::SubsystemLayout;
use qrecover::rng::rng_from_seed;

fn main() -> qrecover::Result<()> {
    let qubit = SubsystemLayout::new(["A"], &[2])?;
    let dep = depolarizing_channel(&qubit, 0.3)?;
    let choi = choi_from_kraus(dep.kraus(), 2, 2);
    let kraus = kraus_from_choi(&choi, 2, 2)?;
    println!("depolarizing: {} Kraus ops, back from Choi {}", dep.kraus().len(), kraus.len());

    let mut rng = rng_from_seed(1);
    let t = random_channel(&mut rng, &qubit, &qubit, 2)?;
    let both = tensor_channels(&dep, &t.with_in_labels(&["B"])?.with_out_labels(&["B"])?)?;
    println!("tensor product {} -> {}", both.in_dim(), both.out_dim());

    let tr_b = partial_trace_channel(both.out_layout(), &["A"])?;
    let chain = compose(&both, &tr_b)?;
    println!("composed {} -> {}, TP deviation {:.1e}", chain.in_dim(), chain.out_dim(), chain.trace_preservation_deviation());
    Ok(())
}
