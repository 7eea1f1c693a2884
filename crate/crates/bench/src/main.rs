fn main() {
    std::process::exit(setpinn_bench::cli::main_from(std::env::args_os()));
}
