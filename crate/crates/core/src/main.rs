fn main() {
    std::process::exit(kernel_classify::cli::run(std::env::args_os()));
}
