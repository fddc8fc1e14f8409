fn main() {
    std::process::exit(fzpipe::cli::run(std::env::args_os()));
}
