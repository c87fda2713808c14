fn main() {
    std::process::exit(hhop::cli::run(std::env::args_os()));
}
