use std::path::PathBuf;
use std::process::Command;

const EXAMPLES: &[(&str, &[&str])] = &[
    ("groups", &[]),
    ("well_functions", &[]),
    ("layers", &[]),
    ("flows", &[]),
    ("training", &["20"]),
    ("verification", &[]),
    ("experiment", &[]),
];

fn examples_dir() -> PathBuf {
    // target/<profile>/deps/<test> -> target/<profile>/examples
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().join("examples")
}

#[test]
fn examples_run() {
    let dir = examples_dir();
    for (name, args) in EXAMPLES {
        let path = dir.join(format!("{name}{}", std::env::consts::EXE_SUFFIX));
        if !path.exists() {
            eprintln!("skipping {name}: not built at {}", path.display());
            continue;
        }
        let out = Command::new(&path).args(*args).output().unwrap();
        assert!(
            out.status.success(),
            "{name} failed:\n{}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stdout.is_empty(), "{name} printed nothing");
    }
}
