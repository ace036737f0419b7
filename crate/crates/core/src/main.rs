fn main() { std::process::exit(qonline::cli::cli_main(std::env::args_os())) }
