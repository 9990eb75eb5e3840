fn main() {
    std::process::exit(hessian_core::cli::main_with(std::env::args_os()));
}
