fn main() {
    std::process::exit(edm::cli::dispatch(std::env::args_os()));
}
