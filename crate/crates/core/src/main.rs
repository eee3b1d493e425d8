//! Thin command-line front end over the library; see the README for usage.

fn main() {
    eprintln!("CLI wiring lands after the library modules; use the examples for now.");
    std::process::exit(2);
}
