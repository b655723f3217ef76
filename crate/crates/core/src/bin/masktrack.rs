fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("MASKTRACK_LOG")).init();
    std::process::exit(masktrack::cli::run(std::env::args_os()));
}
