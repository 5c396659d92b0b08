//! Random search for violations of the relative-entropy recovery bound with
//! the plain Petz map. Quantum instances violate it, classical ones do not.
use qrecover::conjectures::{search_counterexample, InequalityId, MapVariant, SearchConfig};

fn main() -> qrecover::Result<()> {
    let quantum = SearchConfig::new(&[2, 2, 2], 2000, 7);
    let classical = quantum.clone().classical();
    for (name, config) in [("quantum", quantum), ("classical", classical)] {
        let out = search_counterexample(InequalityId::Theorem5Quantum, MapVariant::PetzT0, &config)?;
        let s = &out.summary;
        println!(
            "{name}: {:?}, best gap {:+.4e} at seed {} ({} sampled violations, {} refinement moves)",
            s.status, s.best.gap, s.best.instance_seed, s.sampled_violations, s.refine_accepted
        );
    }
    Ok(())
}
