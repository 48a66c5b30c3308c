fn main() {
    std::process::exit(halfheat_lab::cli::run(std::env::args_os()));
}
