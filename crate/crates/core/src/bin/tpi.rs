fn main() {
    std::process::exit(tensor_power::harness::cli::run(std::env::args_os()));
}
