fn main() {
    std::process::exit(gam_distill::cli::run(std::env::args_os()));
}
