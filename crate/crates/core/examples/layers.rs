//! The control families: evaluation, declared symmetry and the first-coordinate
//! representative.

use equiflow::control_families::{default_dims, Activation, ControlLayer, Family, LayerShape};
use equiflow::seed;
use equiflow::verify::check_layer_equivariance;

fn main() -> equiflow::Result<()> {
    let x = [0.5, -1.0, 2.0];

    // conv1 with w = e_2, v = 1, b = 0 reads the right-hand neighbour
    let conv = ControlLayer::new(Family::Conv1, &[3], Activation::Relu, vec![0.0, 1.0, 0.0, 1.0, 0.0])?;
    println!("{conv}\n  f({x:?}) = {:?}", conv.eval(&x)?);

    // fs1: v sigma(a x_i + w sum x + b)
    let fs1 = ControlLayer::new(Family::Fs1, &[3], Activation::Tanh, vec![1.0, 0.5, 1.0, 0.0])?;
    println!("{fs1}\n  f({x:?}) = {:?}", fs1.eval(&x)?);
    println!("  coor f = {:.6}", fs1.coor_representative().eval(&x)?);

    // layers round-trip through their text form
    let parsed: ControlLayer = fs1.to_string().parse()?;
    assert_eq!(parsed, fs1);

    let mut rng = seed::rng(3);
    println!("\n{:<10} {:>6} {:>7}  {:<22} equivariance", "family", "dims", "params", "declared group");
    for family in Family::CATALOG {
        let dims = default_dims(family, 4);
        let shape = LayerShape::new(family, &dims, Activation::Tanh)?;
        let layer = shape.random(1.0, &mut rng)?;
        let group = shape.declared_group().build()?;
        let report = check_layer_equivariance(&shape, &group, 200, 1e-12, 1)?;
        println!(
            "{:<10} {:>6} {:>7}  {:<22} {} (worst {:.1e})",
            family.name(),
            format!("{dims:?}"),
            layer.params().len(),
            shape.declared_group().to_string(),
            report.verdict,
            report.worst_violation
        );
    }
    Ok(())
}
