//! Seeded N-monitoring instances solved and checked against the oracle.

use limid_rjt::prelude::*;

fn main() -> Result<()> {
    for n in 1..=3 {
        let d = n_monitoring(&NMonitoringSpec::new(n, 11));
        let p = prepare(&d, &PrepareOptions::default())?;
        let c = compare(&format!("nmon{n}"), &p, &Problem::meu(), &[Backend::Reference], &Settings::default())?;
        println!(
            "N={n}: {} nodes, width {}, {} strategies, MEU {:.4}, agree {}",
            d.len(),
            p.tree.width(),
            d.strategy_count(),
            c.oracle.objective.unwrap_or(f64::NAN),
            c.agree
        );
    }
    Ok(())
}
