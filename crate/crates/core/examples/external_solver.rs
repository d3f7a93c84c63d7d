//! Solving through an external MIP solver.
//!
//! Set `LIMID_RJT_SOLVER` to a command template, for example
//! `python3 scripts/highs_solve.py {lp} {sol}`.

use limid_rjt::prelude::*;
use limid_rjt::solve::SOLVER_ENV;

fn main() -> Result<()> {
    let Some(solver) = ExternalSolver::from_env() else {
        println!("{SOLVER_ENV} is not set; nothing to do");
        return Ok(());
    };
    let d = pig_farm(&PigFarmSpec::default());
    let p = prepare(&d, &PrepareOptions::default())?;
    let c = compare("pig3", &p, &Problem::meu(), &[Backend::Reference, Backend::External(solver)], &Settings::default())?;
    for b in &c.backends {
        println!("{:<10} {} {:?}", b.backend, b.status, b.objective);
    }
    println!("oracle     {:?}, gap {:e}, agree {}", c.oracle.objective, c.gap, c.agree);
    Ok(())
}
