fn main() {
    std::process::exit(virelay_cli::main_with(std::env::args_os()));
}
