//! Classical recovery: data processing with the transpose channel, and the
//! Markov projection of a three-variable distribution.
use qrecover::classical::{check_theorem4, check_theorem5, random_distribution, random_stochastic_map};
use qrecover::linalg::SubsystemLayout;
use qrecover::rng::rng_from_seed;

fn main() -> qrecover::Result<()> {
    let mut rng = rng_from_seed(5);
    let x = SubsystemLayout::new(["X"], &[4])?;
    for _ in 0..3 {
        let p = random_distribution(&mut rng, x.clone());
        let q = random_distribution(&mut rng, x.clone());
        let t = random_stochastic_map(&mut rng, 3, 4);
        let c = check_theorem5(&p, &q, &t)?;
        println!("lhs {:.5} rhs {:.5} gap {:+.2e}", c.lhs, c.rhs, c.gap);
    }
    let xyz = SubsystemLayout::new(["X", "Y", "Z"], &[2, 3, 2])?;
    let p = random_distribution(&mut rng, xyz);
    let c = check_theorem4(&p)?;
    println!("I(X:Z|Y) {:.5} = D {:.5}; l1 {:.4} <= {:.4}", c.cmi, c.divergence, c.l1, c.pinsker_bound);
    Ok(())
}
