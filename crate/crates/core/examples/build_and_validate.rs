//! Builds a small diagram by hand, validates it, and round-trips it through JSON.

use limid_rjt::io::{diagram_from_json, diagram_to_json};
use limid_rjt::prelude::*;

fn main() -> Result<()> {
    let mut b = DiagramBuilder::new();
    b.chance("Weather", ["dry", "wet"], [], vec![0.7, 0.3]);
    b.chance("Forecast", ["sunny", "rainy"], ["Weather"], vec![0.8, 0.2, 0.25, 0.75]);
    b.decision("Umbrella", ["take", "leave"], ["Forecast"]);
    // Value nodes are deterministic: one outcome state per parent configuration.
    let identity = (0..16).map(|i| (i % 5 == 0) as u8 as f64).collect();
    b.value(
        "Comfort",
        ["dry_take", "dry_leave", "wet_take", "wet_leave"],
        ["Weather", "Umbrella"],
        identity,
        vec![70.0, 100.0, 60.0, 0.0],
    );
    let d = b.build()?;

    let violations = d.validate();
    println!("{} nodes, {} violations", d.len(), violations.len());

    let order: Vec<&str> = d.topological_order()?.into_iter().map(|j| d.name(j)).collect();
    println!("order: {}", order.join(" "));

    let back = diagram_from_json(&diagram_to_json(&d))?;
    assert_eq!(back, d);
    println!("json round trip ok");

    let out = oracle_optimize(&d, &Objective::Meu, &[])?;
    let best = out.optimal().expect("unconstrained");
    println!("best rule {} with expected comfort {:.2}", strategy_to_json(&d, &best.best)?, best.objective);
    Ok(())
}
