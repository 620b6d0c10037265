fn main() {
    std::process::exit(vidsr::cli::main());
}
