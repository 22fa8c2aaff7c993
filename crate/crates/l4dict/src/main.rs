fn main() {
    std::process::exit(l4dict::cli::run(std::env::args_os()));
}
