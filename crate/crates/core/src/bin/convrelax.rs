fn main() {
    std::process::exit(convrelax::cli::main_with(std::env::args_os()));
}
