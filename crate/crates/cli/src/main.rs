fn main() {
    std::process::exit(epiforecast_cli::run(std::env::args_os()));
}
