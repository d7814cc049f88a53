use std::io::Write;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if let Err(e) = lsttm::cli::run(std::env::args_os(), &mut out) {
        let _ = out.flush();
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
