fn main() {
    std::process::exit(cache_regret::cli::run(std::env::args_os()));
}
