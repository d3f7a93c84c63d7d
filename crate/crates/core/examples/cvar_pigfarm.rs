//! Conditional value-at-risk of the lower tail, on the merged pig farm.

use limid_rjt::prelude::*;

fn main() -> Result<()> {
    let d = pig_farm(&PigFarmSpec::default().seeded(3));
    let (m, _) = merge_value_nodes(&d)?;
    let t = build_rjt(&m, &m.topological_order()?)?;

    for alpha in [0.05, 0.15, 0.5, 1.0] {
        let model = build_model(&m, &t, &Objective::cvar(alpha), &[])?;
        let sol = solve_reference(&model, &m, &t)?;
        let decoded = decode(&sol, &model, &m)?;
        let dist = decoded.distribution.expect("cvar models carry a distribution");
        let (var, cvar) = cvar_of_distribution(&dist, alpha)?;
        println!(
            "alpha {alpha:<4}  CVaR {:>9.3}  VaR {var:>7.1}  E[U] {:>8.3}  (recomputed {cvar:.3})",
            sol.objective.unwrap(),
            dist.expected()
        );
    }

    // Expected utility subject to a floor on the tail.
    let floor = RiskSpec::Cvar {
        alpha: 0.5,
        mode: CvarMode::AtLeast(400.0),
        value_node: None,
    };
    let model = build_model(&m, &t, &Objective::Meu, &[floor])?;
    let sol = solve_reference(&model, &m, &t)?;
    println!("MEU with CVaR_0.5 >= 400: {:?} {:?}", sol.status, sol.objective);
    Ok(())
}
