//! Fitting a translation-invariant target with conv1 flows, against the
//! S_3-invariant fs1 family that cannot represent it.
//!
//! Run with `--release`; pass an iteration count to train longer (the
//! shipped experiment uses 5000).

use equiflow::control_families::{Activation, Family};
use equiflow::flow::Integrator;
use equiflow::hypothesis::{self, group_average, Model, Samples, Terminal, TrainConfig};
use equiflow::perm_group::PermGroup;

fn main() -> equiflow::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(150);
    let target = hypothesis::target("t3_antisym", &[3])?;

    // Averaging over S_3 cancels t3_antisym completely.
    let avg = group_average(&target, &PermGroup::symmetric(3)?)?;
    let probe = Samples::draw(&target, 1.0, 1000, 5);
    let worst = probe.xs.iter().map(|x| avg.eval(x).abs()).fold(0.0, f64::max);
    println!("max |S_3 average of t3_antisym| on 1000 points: {worst:.2e}");

    let config = TrainConfig {
        train_samples: 1024,
        test_samples: 2000,
        iterations,
        log_every: (iterations / 5).max(1),
        seed: 1,
        ..TrainConfig::default()
    };
    for family in [Family::Conv1, Family::Fs1] {
        let model = Model::random(family, &[3], Activation::Tanh, 20, Terminal::Sum, 0.5, 1, Integrator::Euler, 1)?;
        println!("\n{family}, 20 layers, group {}", model.group());
        let (_, history) = hypothesis::train(&model, &target, &config)?;
        print!("{}", history.to_csv());
    }
    Ok(())
}
