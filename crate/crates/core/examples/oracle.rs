//! Exhaustive optimization straight on the diagram.

use limid_rjt::inference::{oracle_optimize_with, OracleOptions};
use limid_rjt::prelude::*;

fn main() -> Result<()> {
    let d = pig_farm(&PigFarmSpec::with_periods(2));
    let opts = OracleOptions {
        keep_log: true,
        ..Default::default()
    };
    let out = oracle_optimize_with(&d, &Objective::Meu, &[], &opts)?;
    let r = out.optimal().expect("no constraints");
    println!("{} strategies, best {:.4}, {} tied", r.evaluated, r.objective, r.optimal_set.len());
    let mut log = r.log.clone();
    log.sort_by(|a, b| b.objective.total_cmp(&a.objective));
    for e in log.iter().take(5) {
        println!("{:>10.4}  {}", e.objective, strategy_to_json(&d, &e.strategy)?.replace(['\n', ' '], ""));
    }
    Ok(())
}
