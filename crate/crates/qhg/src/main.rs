fn main() { std::process::exit(qhg::cli::run()); }
