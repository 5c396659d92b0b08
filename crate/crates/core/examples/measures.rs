//! Entanglement of formation, a squashed-entanglement upper bound and the
//! separable state built from a formation witness.
use qrecover::measures::{entanglement_of_formation, separable_from_formation, squashed_entanglement_upper_bound, Witness};
use qrecover::states::{antisymmetric_state, named_state, random_state, Ensemble, NamedState, StateEnsembleSpec};

fn main() -> qrecover::Result<()> {
    let bell = named_state(NamedState::Bell)?;
    println!("E_F(Bell) = {:.4}", entanglement_of_formation(&bell, &["A"], &["B"], 4, 2)?.value);

    let rho = random_state(&StateEnsembleSpec::new(Ensemble::HilbertSchmidtMixed, &[2, 2], 2))?;
    let ef = entanglement_of_formation(&rho, &["A"], &["B"], 4, 4)?;
    let esq = squashed_entanglement_upper_bound(&rho, &["A"], &["B"], 4, 4)?;
    println!("random: E_F <= {:.4}, E_sq <= {:.4}", ef.value, esq.value);
    if let Witness::Decomposition(dec) = &ef.witness {
        let s = separable_from_formation(&rho, dec)?;
        println!("separable approximation at {:.4} (bound {:.4})", s.distance, s.bound);
    }

    let alpha = antisymmetric_state(3, 2)?;
    let esq = squashed_entanglement_upper_bound(&alpha, &["A"], &["B"], 3, 2)?;
    println!("antisymmetric 3x3: E_sq <= {:.4}", esq.value);
    Ok(())
}
