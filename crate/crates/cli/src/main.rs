use clap::Parser;
use henon_cli::commands::{run, Cli};
use henon_cli::{exit, init_threads};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = init_threads().and_then(|_| run(cli)).unwrap_or_else(|f| {
        eprintln!("henon: {f}");
        f.code()
    });
    std::process::exit(code);
}
