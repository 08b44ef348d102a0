fn main() {
    std::process::exit(mating_trees::cli::run(std::env::args_os()));
}
