//! Symmetric k-extension of a nearly Markov state and the resulting
//! distance-to-separable estimate.
use qrecover::channels::default_swivel_grid;
use qrecover::extend::{build_k_extension, corollary_k_choice, separable_distance_bound, ExtensionStrategy};
use qrecover::states::{random_state, Ensemble, StateEnsembleSpec};

fn main() -> qrecover::Result<()> {
    let rho = random_state(&StateEnsembleSpec::new(Ensemble::HilbertSchmidtMixed, &[2, 2], 9))?;
    for k in 2..=4 {
        let ext = build_k_extension(&rho, &["A"], &["B"], k, &ExtensionStrategy::Purification, &default_swivel_grid())?;
        let r = &ext.report;
        println!(
            "k = {k}: marginals within {:.4} (measured bound {:.4}, theorem bound {:.4}), symmetry {:.1e}",
            r.max_marginal_distance(),
            r.measured_bound,
            r.theorem_bound,
            r.symmetry_residual
        );
        let cert = separable_distance_bound(r, 2);
        println!("        separable within {:.3}", cert.certificate);
    }
    let choice = corollary_k_choice(1e-4, 2)?;
    println!("eps = 1e-4, |B| = 2 -> k = {}", choice.k);
    Ok(())
}
