fn main() {
    std::process::exit(splidar::cli::run(std::env::args_os()));
}
