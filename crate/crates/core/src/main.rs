use clap::Parser;

fn main() {
    let cli = liststego::cli::Cli::parse();
    let code = liststego::cli::run(cli, &mut std::io::stdout().lock());
    std::process::exit(code);
}
