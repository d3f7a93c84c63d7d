//! Maximum expected utility on the pig farm problem.

use limid_rjt::prelude::*;

fn main() -> Result<()> {
    let periods = std::env::args().nth(1).map_or(3, |a| a.parse().expect("periods"));
    let d = pig_farm(&PigFarmSpec::with_periods(periods));
    let t = build_rjt(&d, &d.topological_order()?)?;
    let model = build_model(&d, &t, &Objective::Meu, &[])?;
    let stats = model_stats(&model);
    println!("{} variables ({} binary), {} rows", stats.variables, stats.binaries, stats.rows);

    let sol = solve_reference(&model, &d, &t)?;
    let decoded = decode(&sol, &model, &d)?;
    println!("MEU {:.4}", sol.objective.unwrap());
    println!("{}", strategy_to_json(&d, &decoded.strategy)?);
    println!("check by direct evaluation: {:.4}", expected_utility(&d, &decoded.strategy)?);
    Ok(())
}
