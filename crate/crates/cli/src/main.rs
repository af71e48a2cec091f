fn main() {
    std::process::exit(iqc_cli::run(std::env::args_os()));
}
