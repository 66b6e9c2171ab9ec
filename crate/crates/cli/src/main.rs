fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GRAIN_LOG", "error"))
        .format_timestamp(None)
        .init();
    std::process::exit(grain_cli::run_cli(std::env::args_os()));
}
