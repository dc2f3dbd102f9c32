fn main() {
    std::process::exit(sparsegap_cli::cli_main(std::env::args_os()));
}
