fn main() { std::process::exit(latent_reach::cli::run(std::env::args_os())); }
