fn main() {
    std::process::exit(sift_rls::cli::main_with_args(std::env::args_os()));
}
