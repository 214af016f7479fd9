fn main() {
    std::process::exit(ptx_twin::cli::run(std::env::args_os()));
}
