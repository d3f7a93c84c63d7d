//! Byte-for-byte LP regressions. Set `LIMID_RJT_BLESS=1` to rewrite them.

use std::path::PathBuf;

use limid_rjt::prelude::*;

fn check(name: &str, lp: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("LIMID_RJT_BLESS").is_some() {
        std::fs::write(&path, lp).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap();
    if want != lp {
        let line = want.lines().zip(lp.lines()).position(|(a, b)| a != b).unwrap_or(0);
        panic!(
            "{name} differs at line {}:\n  want {:?}\n  got  {:?}",
            line + 1,
            want.lines().nth(line),
            lp.lines().nth(line)
        );
    }
}

fn lp_for(d: &InfluenceDiagram) -> String {
    let t = build_rjt(d, &d.topological_order().unwrap()).unwrap();
    export_lp(&build_model(d, &t, &Objective::Meu, &[]).unwrap())
}

#[test]
fn single_chance_node() {
    let mut b = DiagramBuilder::new();
    // 1 - 0.7 is 0.30000000000000004 in binary floating point.
    b.chance("X", ["a", "b"], [], vec![0.3, 0.7]);
    check("single_chance_node.lp", &lp_for(&b.build().unwrap()));
}

#[test]
fn pig_farm_two_periods_meu() {
    check("pig_farm_n2_meu.lp", &lp_for(&pig_farm(&PigFarmSpec::with_periods(2))));
}

#[test]
fn export_is_deterministic_across_builds() {
    let d = pig_farm(&PigFarmSpec::with_periods(2));
    assert_eq!(lp_for(&d), lp_for(&d));
}
