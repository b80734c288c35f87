fn main() -> std::process::ExitCode {
    ddporo::cli::main()
}
