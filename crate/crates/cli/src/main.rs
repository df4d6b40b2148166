use std::io;

use clap::Parser;

fn main() {
    let cli = smsauth_cli::Cli::parse();
    let code = smsauth_cli::run(cli, &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
