use env_logger::Env;

fn main() {
    env_logger::Builder::from_env(Env::default().filter_or("PEAKPOWER_LOG", "warn")).init();
    std::process::exit(peakpower::cli::main_with_args(std::env::args_os()));
}
