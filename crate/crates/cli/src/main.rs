fn main() {
    std::process::exit(smc_forget_cli::main_with_args(std::env::args_os()));
}
