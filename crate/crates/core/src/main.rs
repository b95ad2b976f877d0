fn main() {
    let result = gridcast::cli::run(std::env::args_os().skip(1).collect());
    if let Err(e) = &result {
        eprintln!("gridcast: {e}");
    }
    std::process::exit(gridcast::cli::exit_code(&result));
}
