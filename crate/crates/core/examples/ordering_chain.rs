//! Evaluate every recovery inequality on one instance and check their ordering.
use qrecover::conjectures::{check_ordering_chain, evaluate, InequalityId, Instance, MapVariant};
use qrecover::states::{random_state, Ensemble, StateEnsembleSpec};

fn main() -> qrecover::Result<()> {
    let rho = random_state(&StateEnsembleSpec::tripartite(Ensemble::HilbertSchmidtMixed, [2, 2, 2], 17))?;
    let inst = Instance::tripartite(&rho)?;
    for id in InequalityId::ALL {
        match evaluate(id, &inst, MapVariant::BestScan) {
            Ok(r) => println!("{id}: lhs {:.4} rhs {:.4} gap {:+.4}", r.lhs, r.rhs, r.gap),
            Err(e) => println!("{id}: {e}"),
        }
    }
    let chain = check_ordering_chain(&inst, MapVariant::PetzT0)?;
    println!("{chain:?}");
    Ok(())
}
