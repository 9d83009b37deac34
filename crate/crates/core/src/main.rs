fn main() {
    std::process::exit(hollowflow::cli::run(std::env::args_os()));
}
