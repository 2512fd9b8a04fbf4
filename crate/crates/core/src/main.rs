fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(chainflow::cli::run_cli(&argv));
}
