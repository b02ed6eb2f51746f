fn main() {
    std::process::exit(ckthermo::cli::main_with_args(std::env::args_os()));
}
