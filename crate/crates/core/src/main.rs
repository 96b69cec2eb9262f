fn main() -> std::process::ExitCode {
    pbench::cli::main()
}
