//! The rooted junction trees of the pig farm problem, before and after
//! merging the value nodes.

use limid_rjt::prelude::*;

fn main() -> Result<()> {
    let d = pig_farm(&PigFarmSpec::default());
    let t = build_rjt(&d, &d.topological_order()?)?;
    println!("multi-value tree ({} clusters, width {}):", t.len(), t.width());
    print!("{}", t.describe(&d));

    let (m, _) = merge_value_nodes(&d)?;
    let tm = build_rjt(&m, &m.topological_order()?)?;
    println!("\nmerged tree ({} clusters, width {}):", tm.len(), tm.width());
    print!("{}", tm.describe(&m));

    assert!(validate_rjt(&t, &d).is_empty() && validate_rjt(&tm, &m).is_empty());
    println!("\ngraphviz:\n{}", t.to_dot(&d));
    Ok(())
}
