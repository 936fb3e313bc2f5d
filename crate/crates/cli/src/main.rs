fn main() {
    std::process::exit(toxmoral_cli::run(std::env::args_os()));
}
