fn main() {
    std::process::exit(mislogit_cli::main_with_args(std::env::args_os()));
}
