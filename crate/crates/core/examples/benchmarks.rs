//! Headline information gains over standard HOM for a 4.6/ps source.

fn main() -> hom_metrology::Result<()> {
    let report = hom_metrology::cli::benchmark_report()?;
    print!("{}", hom_metrology::cli::format_report(&report));
    Ok(())
}
