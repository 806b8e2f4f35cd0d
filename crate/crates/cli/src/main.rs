fn main() {
    std::process::exit(hcolor_cli::execute(std::env::args_os()));
}
