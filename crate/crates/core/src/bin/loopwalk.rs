use clap::Parser;

fn main() {
    let args = loopwalk::cli::Args::parse();
    std::process::exit(loopwalk::cli::execute(&args));
}
