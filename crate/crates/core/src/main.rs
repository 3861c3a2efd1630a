fn main() -> std::process::ExitCode {
    mtc::cli::main()
}
