//! Driving the batch commands from code: a partition run and a short
//! training run written to a scratch directory, then the pass/fail matrix.

use equiflow::cli::{cmd_partition, cmd_report, cmd_train, Output};
use equiflow::config::Config;

const CONFIG: &str = r#"
schema_version = 1
seed = 11

[partition]
group = "translation_nd 2 3"
samples = 2000

[train]
family = "fs1"
dims = [3]
layers = 2
target = "t3_antisym"
steps_per_unit_time = 1
seeds = [1, 2]
expect = "obstruction"
threshold = 0.9

[train.optimizer]
train_samples = 256
test_samples = 1000
iterations = 40
log_every = 10
"#;

fn main() -> equiflow::Result<()> {
    let config = Config::parse(CONFIG)?;
    let root = std::env::temp_dir().join(format!("equiflow-experiment-{}", std::process::id()));
    let (partition, train) = (root.join("partition"), root.join("train"));
    let exit = cmd_partition(&config, &Output::new(&partition, false));
    println!("partition exit {}", exit.code());
    let exit = cmd_train(&config, &Output::new(&train, false));
    println!("train exit {}\n", exit.code());
    let exit = cmd_report(&[partition, train.clone()], None);
    println!("report exit {}", exit.code());
    println!("\n{}", std::fs::read_to_string(train.join("summary.toml")).unwrap_or_default());
    let _ = std::fs::remove_dir_all(root);
    Ok(())
}
