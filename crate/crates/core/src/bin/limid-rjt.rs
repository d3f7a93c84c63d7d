fn main() {
    limid_rjt::cli::main();
}
