//! Writing a model in LP format for any MIP solver.

use limid_rjt::prelude::*;

fn main() -> Result<()> {
    let d = pig_farm(&PigFarmSpec::with_periods(1));
    let t = build_rjt(&d, &d.topological_order()?)?;
    let model = build_model(&d, &t, &Objective::Meu, &[])?;
    let lp = export_lp(&model);
    let path = std::env::temp_dir().join("pig1.lp");
    std::fs::write(&path, &lp)?;
    println!("wrote {} ({} lines)\n", path.display(), lp.lines().count());
    print!("{}", lp.lines().take(24).collect::<Vec<_>>().join("\n"));
    println!("\n...");
    Ok(())
}
