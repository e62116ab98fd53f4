fn main() {
    std::process::exit(phasesaddle::cli::main_with(std::env::args_os()));
}
