fn main() {
    std::process::exit(l1admm_cli::run(std::env::args_os()));
}
