use std::io::Write;

use clap::Parser;
use gwlab_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(out) => {
            // a closed stdout (e.g. piped into `head`) is not an error
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(
                stdout,
                "{}",
                serde_json::to_string_pretty(&out.summary).expect("summary serialises")
            );
            for f in &out.files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            for f in &out.failures {
                eprintln!("error: {f}");
            }
            i32::from(!out.failures.is_empty())
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
