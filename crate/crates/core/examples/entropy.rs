//! Entropies, CMI and the conditional multi-information chain rule.
use qrecover::info::{
    conditional_multi_information, conditional_multi_information_chain, conditional_mutual_information, entropy,
    mutual_information,
};
use qrecover::states::{named_state, random_state, Ensemble, NamedState, StateEnsembleSpec};

fn main() -> qrecover::Result<()> {
    let bell = named_state(NamedState::Bell)?;
    println!("Bell: S(A) = {:.4}, I(A:B) = {:.4}", entropy(&bell, &["A"])?, mutual_information(&bell, &["A"], &["B"])?);

    let rho = random_state(&StateEnsembleSpec::tripartite(Ensemble::HilbertSchmidtMixed, [2, 2, 2], 3))?;
    let cmi = conditional_mutual_information(&rho, &["A"], &["B"], &["E"])?;
    println!("random AEB: I(A:B|E) = {cmi:.6}");

    let four = random_state(&StateEnsembleSpec::new(Ensemble::HilbertSchmidtMixed, &[2, 2, 2, 2], 4))?;
    let parts = [vec!["A"], vec!["B"], vec!["C"]];
    let direct = conditional_multi_information(&four, &parts, &["D"])?;
    let chain = conditional_multi_information_chain(&four, &parts, &["D"])?;
    println!("multi-information {direct:.8} vs chain {chain:.8}");
    Ok(())
}
