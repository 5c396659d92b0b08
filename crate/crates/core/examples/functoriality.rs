//! Normalization, tensor and composition properties of the Petz map.
use qrecover::channels::random_channel;
use qrecover::conjectures::{check_functoriality, Axiom, FunctorialityInstance};
use qrecover::linalg::SubsystemLayout;
use qrecover::rng::rng_from_seed;
use qrecover::states::{random_state, Ensemble, StateEnsembleSpec};

fn main() -> qrecover::Result<()> {
    let mut rng = rng_from_seed(2);
    let a = SubsystemLayout::new(["A"], &[2])?;
    let b = SubsystemLayout::new(["B"], &[2])?;
    let state = |seed, label| random_state(&StateEnsembleSpec::new(Ensemble::HilbertSchmidtMixed, &[2], seed).with_labels(&[label]));

    let norm = [FunctorialityInstance::Normalization { tau: state(1, "A")? }];
    let tensor = [FunctorialityInstance::Tensor {
        first: (random_channel(&mut rng, &a, &a, 2)?, state(2, "A")?),
        second: (random_channel(&mut rng, &b, &b, 2)?, state(3, "B")?),
    }];
    let comp = [FunctorialityInstance::Composition {
        first: random_channel(&mut rng, &a, &a, 2)?,
        second: random_channel(&mut rng, &a, &a, 2)?,
        sigma: state(4, "A")?,
    }];
    for (axiom, inst) in [(Axiom::Normalization, &norm[..]), (Axiom::Tensor, &tensor[..]), (Axiom::Composition, &comp[..])] {
        let r = check_functoriality(axiom, inst, 8, 0)?;
        println!("{axiom:?}: deviation {:.2e} over {} probes", r.deviation, r.probes);
    }
    Ok(())
}
