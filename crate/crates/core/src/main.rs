fn main() -> std::process::ExitCode {
    commsplit::cli::main()
}
