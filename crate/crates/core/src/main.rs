fn main() -> std::process::ExitCode {
    slatbp::cli::main()
}
