fn main() {
    std::process::exit(pendellosung::cli::main_with_args(std::env::args_os()));
}
