fn main() {
    std::process::exit(chiral_cat::cli::run_cli(std::env::args_os()));
}
