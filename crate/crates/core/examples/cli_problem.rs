//! Load a bundled problem file and run a command on it, as the binary does.

use std::path::Path;

use trichotomy::cli::{load_problem, run, Command, Flags};

fn main() -> Result<(), trichotomy::Error> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    let out = std::env::temp_dir().join("trichotomy-example");
    let flags = Flags {
        out,
        ..Flags::default()
    };
    for (cmd, file) in [(Command::SolveLinear, "diag_cos.json"), (Command::CheckTrichotomy, "arctan.json")] {
        let problem = load_problem(dir.join(file))?;
        let outcome = run(cmd, &problem, &flags)?;
        print!("{file}: exit {}\n{}", outcome.code, outcome.summary);
        for a in &outcome.artifacts {
            println!("  wrote {}", a.display());
        }
    }
    Ok(())
}
