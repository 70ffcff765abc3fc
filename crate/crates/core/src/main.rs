fn main() {
    std::process::exit(reactfem::cli::main_with_args(std::env::args_os()));
}
