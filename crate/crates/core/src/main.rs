fn main() {
    // dying quietly on a closed pipe (`biogate qrs ... | head`) is the
    // expected unix behavior, not a panic
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(biogate::cli::run(&args));
}
