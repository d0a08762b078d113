fn main() {
    std::process::exit(heatcontent_cli::main_with_args(std::env::args_os()));
}
