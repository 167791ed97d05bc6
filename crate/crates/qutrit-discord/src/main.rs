fn main() {
    std::process::exit(qutrit_discord::cli::main_with_args(std::env::args_os()));
}
