fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = proxlith_cli::execute(&args, &mut stdout) {
        eprintln!("{}", e.render());
        std::process::exit(e.exit_code());
    }
}
