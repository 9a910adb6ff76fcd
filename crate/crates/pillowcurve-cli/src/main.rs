fn main() {
    std::process::exit(pillowcurve_cli::run(std::env::args_os()));
}
