fn main() {
    std::process::exit(mmcm::cli::main_entry());
}
