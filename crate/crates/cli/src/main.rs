fn main() {
    std::process::exit(modresp::run(std::env::args_os()));
}
