//! Permutation groups, coset representatives and cross sections.

use equiflow::perm_group::{
    locate_cross_section, partition_check, GroupSpec, PermGroup, Permutation,
};

fn main() -> equiflow::Result<()> {
    // (1 2 3) sends index 1 to 2; acting on vectors it reads x[p(i)].
    let p = Permutation::parse_cycles(3, "(1 2 3)")?;
    println!("{p} acting on [10, 20, 30] -> {:?}", p.act_vector(&[10.0, 20.0, 30.0])?);
    println!("{p} composed with its inverse is the identity: {}", p.compose(&p.inverse())?.is_identity());

    for spec in ["symmetric 3", "translation_1d 3", "translation_nd 2 3", "product 2 3"] {
        let g: PermGroup = spec.parse::<GroupSpec>()?.build()?;
        let stab = g.stabilizer(1)?;
        let t = g.right_transversal()?;
        println!(
            "{spec:<20} order {:>3}  |orbit(1)| {}  |Stab(1)| {:>2}  transversal size {:>3}  transitive {}",
            g.order(),
            g.orbit(1)?.len(),
            stab.order(),
            t.reps.len(),
            g.is_transitive()
        );
    }

    // The cyclic group on three coordinates leaves two cosets in S_3; their
    // cross sections tile the space up to ties.
    let c3 = PermGroup::translation_1d(3)?;
    let t = c3.right_transversal()?;
    let reps: Vec<String> = t.reps.iter().map(|r| r.to_string()).collect();
    println!("translation_1d 3 representatives: {}", reps.join(", "));
    let x = [0.3, -0.7, 0.9];
    println!("{x:?} lies in Q_a for a = {}", locate_cross_section(&x)?.expect("general position"));
    let report = partition_check(&c3, &t, 10_000, 7)?;
    println!("{}", report.summary_line());
    Ok(())
}
