fn main() {
    std::process::exit(donation_forensics::cli::run(std::env::args_os()));
}
