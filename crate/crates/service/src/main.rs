fn main() -> std::process::ExitCode {
    faultfabric_service::cli::main()
}
