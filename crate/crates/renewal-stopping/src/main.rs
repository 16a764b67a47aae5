fn main() {
    std::process::exit(renewal_stopping::cli::run_main());
}
