fn main() {
    std::process::exit(netplan::cli::run_from(std::env::args_os()));
}
