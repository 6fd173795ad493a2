fn main() {
    std::process::exit(levy_spde_cli::run_from(std::env::args_os()));
}
