fn main() {
    std::process::exit(fsmt_cli::run(std::env::args_os()));
}
