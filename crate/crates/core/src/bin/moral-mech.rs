fn main() {
    std::process::exit(moral_mech::cli::run_from(std::env::args_os()));
}
