fn main() {
    std::process::exit(kreinspec_cli::main_with_env());
}
