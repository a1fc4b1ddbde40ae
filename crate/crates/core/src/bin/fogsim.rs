fn main() {
    std::process::exit(fogsim::cli::main());
}
