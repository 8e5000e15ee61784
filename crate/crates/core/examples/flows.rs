//! Flow maps of layer schedules: integration, inversion and step refinement.

use equiflow::control_families::{Activation, ControlLayer, Family};
use equiflow::flow::{integrate, inverse_integrate, refinement_study, refinement_study_exact, Integrator, Schedule};

fn main() -> equiflow::Result<()> {
    // dx/dt = x for unit time, exact solution x e
    let linear = ControlLayer::new(Family::Linear, &[2], Activation::Tanh, vec![1.0])?;
    let x = [1.0, -0.5];
    let exact: Vec<f64> = x.iter().map(|v| v * 1f64.exp()).collect();
    for integrator in [Integrator::Euler, Integrator::Rk4] {
        let s = Schedule::new(vec![(linear.clone(), 1.0)], 10, integrator)?;
        let study = refinement_study_exact(&s, &x, 4, &exact)?;
        print!("{}", study.to_csv());
        println!("observed order {:.3}\n", study.observed_order().unwrap_or(f64::NAN));
    }

    // A two-layer fs1 flow; no closed form, so orders come from successive differences.
    let a = ControlLayer::new(Family::Fs1, &[3], Activation::Tanh, vec![0.8, -0.3, 1.2, 0.1])?;
    let b = ControlLayer::new(Family::Fs1, &[3], Activation::Sigmoid, vec![-0.5, 0.4, 0.9, -0.2])?;
    let s = Schedule::new(vec![(a, 0.7), (b, 1.3)], 8, Integrator::Rk4)?;
    let x = [0.2, -0.4, 0.9];
    let y = integrate(&s, &x)?.y;
    let back = inverse_integrate(&s, &y)?;
    println!("fs1 flow: {x:?} -> {y:.6?}, inverted back to {back:.6?}");
    let study = refinement_study(&s, &x, 5)?;
    print!("{}", study.to_csv());

    // schedules serialize to TOML
    println!("\n{}", s.to_toml()?);
    Ok(())
}
