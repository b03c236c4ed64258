fn main() -> std::process::ExitCode {
    agentnas::cli::main()
}
