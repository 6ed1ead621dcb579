fn main() -> std::process::ExitCode {
    rlid::cli::main()
}
