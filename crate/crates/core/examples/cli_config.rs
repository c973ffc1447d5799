//! Drives `solve`, `verify` and `report` from a JSON config, as the `ktcy` binary does.

use ktcy::runner::{run, Command, RunError};

fn main() -> Result<(), RunError> {
    let dir = std::env::temp_dir().join("ktcy-cli-config");
    std::fs::create_dir_all(&dir)?;
    let config = dir.join("config.json");
    std::fs::write(
        &config,
        r#"{
  "scenario": "t-cosine",
  "theta": 0.9553166181245093,
  "grids": [[16, 16, 32]],
  "epsilon_sweep": [0.2, 0.1]
}"#,
    )?;
    let out = dir.join("out");
    for cmd in [Command::Solve, Command::Verify, Command::Report] {
        println!("== {}", cmd.name());
        print!("{}", run(cmd, &config, &out)?);
    }
    println!("artifacts in {}", out.display());
    Ok(())
}
