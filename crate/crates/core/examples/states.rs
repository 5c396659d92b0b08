//! Fixtures, marginals and purifications.
use qrecover::states::{named_state, purify_compact, random_state, Ensemble, NamedState, StateEnsembleSpec};

fn main() -> qrecover::Result<()> {
    let ghz = named_state(NamedState::Ghz(3))?;
    println!("ghz labels {:?}, purity {:.3}", ghz.labels(), ghz.purity());
    let ab = ghz.marginal(&["A", "B"])?;
    println!("ghz^AB purity {:.3}", ab.purity());

    let rho = random_state(&StateEnsembleSpec::new(Ensemble::RankLimited(2), &[2, 3], 7))?;
    println!("rank-2 state eigenvalues {:.4?}", rho.eigenvalues()?);
    let psi = purify_compact(&rho, "R")?;
    println!("purified on {:?} (dim {}), purity {:.6}", psi.labels(), psi.dim(), psi.purity());
    let back = psi.marginal(&["A", "B"])?;
    println!("max entry change {:.1e}", qrecover::extend::max_entry_deviation(&back, &rho));
    Ok(())
}
