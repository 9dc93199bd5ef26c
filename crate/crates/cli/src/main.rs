fn main() {
    std::process::exit(pdbench::run(std::env::args_os()));
}
