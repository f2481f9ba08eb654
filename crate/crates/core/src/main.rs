fn main() {
    std::process::exit(noma_power::cli::run(std::env::args_os()));
}
