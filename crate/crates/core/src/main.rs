fn main() {
    std::process::exit(gevrey_kit::cli::run(std::env::args_os()));
}
