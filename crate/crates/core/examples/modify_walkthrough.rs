//! Reshaping a tree so one cluster holds a chosen node set, stage by stage.

use limid_rjt::prelude::*;
use limid_rjt::rjt::modify_rjt_traced;

fn main() -> Result<()> {
    let mut b = DiagramBuilder::new();
    b.chance("A", ["0", "1"], [], vec![0.5, 0.5]);
    b.chance("B", ["0", "1"], ["A"], vec![0.5; 4]);
    b.chance("C", ["0", "1"], ["A", "B"], vec![0.5; 8]);
    b.chance("D", ["0", "1"], ["B"], vec![0.5; 4]);
    b.chance("E", ["0", "1"], ["B", "C"], vec![0.5; 8]);
    b.chance("F", ["0", "1"], ["B"], vec![0.5; 4]);
    let d = b.build()?;
    let t = RootedJunctionTree::from_names(
        &d,
        &["A", "B", "C", "D", "E", "F"],
        &[
            ("A", &["A"]),
            ("B", &["A", "B"]),
            ("C", &["A", "B", "C"]),
            ("D", &["B", "D"]),
            ("E", &["B", "C", "E"]),
            ("F", &["B", "F"]),
        ],
        &[("A", "B"), ("B", "C"), ("B", "D"), ("C", "E"), ("D", "F")],
    )?;
    println!("initial:\n{}", t.describe(&d));

    let targets: Vec<NodeId> = ["A", "E", "F"].iter().map(|n| d.id(n)).collect::<Result<_>>()?;
    let (out, steps) = modify_rjt_traced(&t, &d, &targets)?;
    for s in &steps {
        println!("after {:?} for {}:\n{}", s.stage, d.name(s.node), s.tree.describe(&d));
    }
    assert!(validate_rjt(&out, &d).is_empty());
    println!("C_F now holds A, E and F: {:?}", out.cluster(d.id("F")?).members.iter().map(|&j| d.name(j)).collect::<Vec<_>>());

    // The same operation on the pig farm gathers every health node in C_H4.
    let pig = pig_farm(&PigFarmSpec::default());
    let tp = build_rjt(&pig, &pig.topological_order()?)?;
    let hs: Vec<NodeId> = ["H1", "H2", "H3", "H4"].iter().map(|n| pig.id(n)).collect::<Result<_>>()?;
    println!("pig farm:\n{}", modify_rjt(&tp, &pig, &hs)?.describe(&pig));
    Ok(())
}
