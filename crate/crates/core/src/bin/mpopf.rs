fn main() {
    std::process::exit(mpopf::cli::run(std::env::args_os()));
}
