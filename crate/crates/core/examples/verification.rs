//! Richness checks on the families: perturbation, direct connectivity,
//! resolvence, and the two negative families.

use equiflow::control_families::{Activation, Family, LayerShape};
use equiflow::perm_group::{PermGroup, Permutation};
use equiflow::seed;
use equiflow::verify::{
    check_counterexamples, check_direct_connectivity, check_resolves, find_perturbation, DEFAULT_SEARCH_BUDGET,
};

fn main() -> equiflow::Result<()> {
    let conv1 = LayerShape::new(Family::Conv1, &[3], Activation::Tanh)?;

    // x and y share the value 1 in their first coordinate
    let (x, y) = ([1.0, 2.0, 3.0], [1.0, 5.0, 4.0]);
    let mut rng = seed::rng(1);
    if let Some(Some(w)) = find_perturbation(&conv1, &x, &y, 1000, &mut rng)? {
        println!("perturbation for {x:?}, {y:?}: {w}");
    }

    // Q_a = {x1 > x2 > x3} and Q_b = {x2 > x1 > x3} meet where x1 = x2
    let a = Permutation::identity(3);
    let b = Permutation::parse_cycles(3, "(1 2)")?;
    let (report, witness) = check_direct_connectivity(&conv1, &a, &b, 1000, 2)?;
    let witness = witness.expect("conv1 separates the boundary");
    println!("direct connectivity: {}  z = {:.3?}  f = {}", report.verdict, witness.z, witness.layer);

    let cases = [
        (Family::Conv1, vec![4], "translation_1d 4"),
        (Family::Conv2, vec![2, 3], "translation_nd 2 3"),
        (Family::Fs1, vec![4], "symmetric 4"),
        (Family::Janossy2, vec![3], "symmetric 3"),
        (Family::Prod2d1, vec![2, 3], "product 2 3"),
        (Family::Gamma1, vec![3], "translation_1d 3"),
    ];
    for (family, dims, group) in cases {
        let shape = LayerShape::new(family, &dims, Activation::Tanh)?;
        let g: PermGroup = group.parse::<equiflow::perm_group::GroupSpec>()?.build()?;
        let r = check_resolves(&shape, &g, 50, DEFAULT_SEARCH_BUDGET, 3)?;
        let reach = r.notes.iter().find(|n| n.starts_with("transversal")).cloned().unwrap_or_default();
        println!("{family:<9} resolves {group:<20} {:<5} {reach}", r.verdict.to_string());
    }

    let r = check_counterexamples(50, 4)?;
    println!("\n{}", r.summary_line());
    for note in &r.notes {
        println!("  {note}");
    }
    Ok(())
}
