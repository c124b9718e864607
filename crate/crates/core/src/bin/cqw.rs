fn main() {
    std::process::exit(cq_workbench::cli::run(std::env::args_os()));
}
