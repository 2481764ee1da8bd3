fn main() {
    std::process::exit(emohlc::run(std::env::args_os()));
}
