fn main() {
    std::process::exit(halludetect::cli::run(std::env::args_os()));
}
