fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ROUTHKIT_LOG", "warn")).init();
    std::process::exit(routhkit_cli::run(std::env::args_os()));
}
