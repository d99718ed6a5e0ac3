fn main() {
    std::process::exit(diffusion_ffls::cli::main_with_args(std::env::args_os()));
}
