fn main() {
    std::process::exit(dlo::cli::main_with_args(std::env::args_os()));
}
