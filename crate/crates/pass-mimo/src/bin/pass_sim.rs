//! Command-line front end for the Monte-Carlo experiment harness.

fn main() {
    std::process::exit(pass_mimo::harness::cli_main(std::env::args_os()));
}
