fn main() {
    std::process::exit(gaussmech::cli::main())
}
