fn main() -> std::process::ExitCode {
    mmu_planner::cli::main_entry()
}
