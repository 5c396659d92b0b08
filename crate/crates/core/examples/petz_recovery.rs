//! Petz recovery of a noisy state.
use qrecover::channels::{depolarizing_channel, petz_map, recovery_fidelity};
use qrecover::info::relative_entropy;
use qrecover::states::{random_state, Ensemble, StateEnsembleSpec};

fn main() -> qrecover::Result<()> {
    let rho = random_state(&StateEnsembleSpec::new(Ensemble::HilbertSchmidtMixed, &[2], 11))?;
    let sigma = random_state(&StateEnsembleSpec::new(Ensemble::HilbertSchmidtMixed, &[2], 12))?;
    for p in [0.1, 0.5, 0.9] {
        let t = depolarizing_channel(rho.layout(), p)?;
        let r = petz_map(&t, &sigma)?;
        let recovered = r.channel.apply(&t.apply(&rho)?)?;
        let loss = relative_entropy(&rho, &sigma)? - relative_entropy(&t.apply(&rho)?, &t.apply(&sigma)?)?;
        println!(
            "p = {p}: D loss {loss:.4}, F(ρ, R T ρ) = {:.4}, anchor deviation {:.1e}",
            recovery_fidelity(&rho, &recovered)?,
            r.anchor_deviation()?
        );
    }
    Ok(())
}
