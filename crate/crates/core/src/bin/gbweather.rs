fn main() {
    std::process::exit(gbuffer_weather::cli::main_with_args(std::env::args_os()));
}
