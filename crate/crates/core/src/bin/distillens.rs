fn main() {
    std::process::exit(distillens::cli::run(std::env::args_os()));
}
