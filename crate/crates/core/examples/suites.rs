//! Invariant suites, as run by `qrecover check`.
use std::collections::BTreeMap;

use qrecover::cli::suites::{run_suite, Suite};

fn main() -> qrecover::Result<()> {
    for suite in [Suite::Info, Suite::Pinsker, Suite::ChainIdentity] {
        let report = run_suite(suite, 200, 1, &BTreeMap::new())?;
        for p in &report.properties {
            println!("{suite:?} {}: worst {:+.2e} (tol {:.0e}) {}", p.name, p.worst_deviation, p.tolerance, if p.passed() { "ok" } else { "FAIL" });
        }
    }
    Ok(())
}
