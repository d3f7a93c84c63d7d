//! Bounding the probability that the pig is ever ill.

use limid_rjt::prelude::*;

fn main() -> Result<()> {
    let d = pig_farm(&PigFarmSpec::default());
    let opts = PrepareOptions {
        modify: ["H1", "H2", "H3", "H4"].map(String::from).to_vec(),
        ..Default::default()
    };
    let p = prepare(&d, &opts)?;
    println!("C_H4 = {:?}", p.tree.cluster(d.id("H4")?).members.iter().map(|&j| d.name(j)).collect::<Vec<_>>());

    for bound in [1.0, 0.5, 0.4, 0.3] {
        let spec = RiskSpec::chance("H1=ill|H2=ill|H3=ill|H4=ill", Sense::Le, bound)?.with_cluster("H4");
        let problem = Problem::meu().with(spec);
        let r = run("pig3", &p, &problem, &Backend::Reference, &Settings::default())?;
        println!(
            "P(ever ill) <= {bound}: {} {:?} verified={:?}",
            r.report.status, r.report.objective, r.report.verified
        );
    }
    Ok(())
}
