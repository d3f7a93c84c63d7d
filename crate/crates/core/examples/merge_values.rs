//! Merging value nodes keeps the utility distribution of every strategy.

use limid_rjt::inference::enumerate_strategies;
use limid_rjt::prelude::*;

fn main() -> Result<()> {
    let d = pig_farm(&PigFarmSpec::with_periods(2));
    let (m, map) = merge_value_nodes(&d)?;
    println!("{} value nodes merged into one with {} states", d.value_nodes().len(), map.size());

    let mut worst: f64 = 0.0;
    for s in enumerate_strategies(&d)? {
        let a = evaluate_strategy(&d, &s)?;
        let b = evaluate_strategy(&m, &s.for_diagram(&m)?)?;
        for (x, y) in a.atoms().iter().zip(b.atoms()) {
            worst = worst.max((x.0 - y.0).abs()).max((x.1 - y.1).abs());
        }
        assert_eq!(a.atoms().len(), b.atoms().len());
    }
    println!("largest atom difference over all strategies: {worst:e}");
    Ok(())
}
