fn main() {
    std::process::exit(lattice_aco::cli::run_cli(std::env::args_os()));
}
