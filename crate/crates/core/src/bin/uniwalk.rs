fn main() {
    std::process::exit(uniwalk::cli::run(std::env::args_os()));
}
