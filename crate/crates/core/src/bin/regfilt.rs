fn main() -> std::process::ExitCode {
    regfilt::cli::main_entry()
}
