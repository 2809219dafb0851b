fn main() -> std::process::ExitCode {
    smpr_cli::main_entry()
}
