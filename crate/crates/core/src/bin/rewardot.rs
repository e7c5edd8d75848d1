fn main() {
    std::process::exit(rewardot::cli::run(std::env::args_os()));
}
