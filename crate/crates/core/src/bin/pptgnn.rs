use pptgnn::cli::{run, SEED_ENV};

fn main() {
    std::process::exit(run(std::env::args_os(), std::env::var(SEED_ENV).ok()));
}
