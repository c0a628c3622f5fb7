//! Column means and correlations of a results table, here the published
//! sixteen-row comparison of flat and hierarchical classifiers.
//!
//! ```text
//! cargo run --example report [results.tsv]
//! ```

use std::path::PathBuf;

use htc::cli::cmd_report;

fn main() -> anyhow::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/published_results.tsv")
    });
    print!("{}", cmd_report(&path)?);
    Ok(())
}
