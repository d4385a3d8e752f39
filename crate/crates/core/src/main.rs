use clap::Parser;

fn main() {
    let cli = hardycalc::cli::Cli::parse();
    let code = hardycalc::cli::execute(cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
