fn main() {
    std::process::exit(fairmatch_cli::run(std::env::args_os()));
}
