//! One-dimensional and symmetric invariant well functions.

use equiflow::well_functions::{
    check_1d_well, check_symmetric_invariant_well, sym_well_coordwise, sym_well_sum, well_bump_fn, Grid,
    ScalarFunction, SymmetricWellCandidate,
};

fn main() -> equiflow::Result<()> {
    let grid = Grid::new(-5.0, 5.0, 2001)?;
    let (report, zeros) = check_1d_well(&well_bump_fn(), grid);
    println!("relu(x-1) + relu(-x-1): {}  zero set {zeros:?}", report.verdict);

    // x^2 vanishes at a single point only, so it is not a well function
    let (report, _) = check_1d_well(&ScalarFunction::new(10.0, |x| x * x), grid);
    println!("x^2: {} ({})", report.verdict, report.witnesses[0].detail);

    for n in [2, 3, 5] {
        let (report, outcome) = check_symmetric_invariant_well(&sym_well_coordwise(well_bump_fn(), n), 500, 1)?;
        println!(
            "sum_i h(x_i), n = {n}: {}  escape radius {:?}",
            report.verdict, outcome.escape_radius
        );
    }

    // h(sum x_i) qualifies even though its zero set, which holds (t, -t, 0)
    // for every t, is unbounded
    let tau = sym_well_sum(well_bump_fn(), 3);
    let (report, _) = check_symmetric_invariant_well(&tau, 500, 1)?;
    println!("h(sum_i x_i), n = 3: {}  tau(100, -100, 0) = {}", report.verdict, tau.eval(&[100.0, -100.0, 0.0]));

    // prod h(x_i) is zero as soon as one coordinate sits in [-1, 1]
    let h = well_bump_fn();
    let tau = SymmetricWellCandidate::new(3, (-1.0, 1.0), move |x| x.iter().map(|&v| h.eval(v)).product());
    let (report, _) = check_symmetric_invariant_well(&tau, 500, 1)?;
    println!("prod_i h(x_i), n = 3: {}", report.verdict);
    Ok(())
}
