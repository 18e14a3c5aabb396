fn main() {
    std::process::exit(roni_saw::cli::run(std::env::args_os()));
}
