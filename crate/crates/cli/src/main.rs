use clap::error::ErrorKind;
use clap::Parser;

fn main() {
    let cli = match hcat_cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let text = e.render().to_string();
            eprintln!("hcat: usage: {}", text.trim_start_matches("error: ").trim_end());
            std::process::exit(2);
        }
    };
    if let Err(e) = hcat_cli::run(cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
