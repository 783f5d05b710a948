fn main() {
    std::process::exit(pitchstyle_cli::run(std::env::args_os()));
}
