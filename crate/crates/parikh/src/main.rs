fn main() { std::process::exit(parikh::cli::run()) }
