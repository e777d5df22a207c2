fn main() {
    std::process::exit(volterra_young::cli::run(std::env::args_os()));
}
