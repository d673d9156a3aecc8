fn main() {
    std::process::exit(molcap::cli::run());
}
