use clap::Parser;

fn main() {
    let cli = rkbs_svm::cli::Cli::parse();
    std::process::exit(rkbs_svm::cli::run(cli));
}
