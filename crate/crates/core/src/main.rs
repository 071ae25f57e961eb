fn main() {
    std::process::exit(manet_compose::cli::main_entry(std::env::args_os()));
}
