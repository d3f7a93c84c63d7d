//! Forbidding state combinations and capping a cost.

use std::collections::BTreeMap;

use limid_rjt::prelude::*;

fn main() -> Result<()> {
    let d = pig_farm(&PigFarmSpec::default());
    let p = prepare(&d, &PrepareOptions::default())?;
    let base = run("pig3", &p, &Problem::meu(), &Backend::Reference, &Settings::default())?;
    println!("unconstrained: {:?}", base.report.objective);

    // No treatment in the last period after a positive test.
    let rule = RiskSpec::logical("T3=positive&D3=treat")?;
    let r = run("pig3", &p, &Problem::meu().with(rule), &Backend::Reference, &Settings::default())?;
    println!("no late treatment after a positive test: {:?}", r.report.objective);

    // Injections in periods 2 and 3 cost 1 each and the budget is 0.
    let costs = BTreeMap::from([
        ("D2".to_string(), BTreeMap::from([("treat".to_string(), 1.0)])),
        ("D3".to_string(), BTreeMap::from([("treat".to_string(), 1.0)])),
    ]);
    let budget = RiskSpec::Budget {
        cluster: None,
        costs,
        limit: 0.0,
    };
    let q = prepare(
        &d,
        &PrepareOptions {
            modify: vec!["D2".into(), "D3".into()],
            ..Default::default()
        },
    )?;
    let r = run("pig3", &q, &Problem::meu().with(budget), &Backend::Reference, &Settings::default())?;
    println!("no injections in periods 2 and 3: {:?} {:?}", r.report.objective, r.report.strategy);
    Ok(())
}
