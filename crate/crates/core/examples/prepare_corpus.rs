//! RCV1-style XML to single-labeled documents, a holdout split, and the
//! per-parent training sets of the local classifiers.
//!
//! ```text
//! cargo run --example prepare_corpus
//! ```

use std::fs;
use std::path::Path;

use htc::corpus::{
    decode_latin1, hierarchical_split, holdout_split, ingest_rcv1_xml, local_dataset_stats,
    reduce_to_single_label,
};
use htc::Taxonomy;

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let tax = Taxonomy::read(fs::read_to_string(fixtures.join("rcv1_hierarchy.txt"))?.as_bytes())?;

    let mut files: Vec<_> = fs::read_dir(fixtures.join("xml"))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.sort();
    let raw = files
        .iter()
        .map(|f| Ok(ingest_rcv1_xml(&decode_latin1(&fs::read(f)?))?))
        .collect::<anyhow::Result<Vec<_>>>()?;

    // Each document keeps only its least frequent topic code.
    let docs = reduce_to_single_label(&raw, &tax)?;
    for (r, d) in raw.iter().zip(&docs) {
        println!("{}: {:?} -> {}", r.doc_id, r.topic_codes, d.label);
    }

    let split = holdout_split(&docs, 0.25, 42)?;
    println!("\n{} train / {} test", split.train.len(), split.test.len());

    println!("\nlocal datasets:");
    for ds in hierarchical_split(&split.train, &tax)? {
        let labels: Vec<&str> = ds.examples.iter().map(|(_, l)| l.as_str()).collect();
        match local_dataset_stats(&ds) {
            Ok(s) => println!("  {:<5} {labels:?} (imbalance {:.1}:1)", ds.parent, s.imbalance),
            Err(_) => println!("  {:<5} (empty)", ds.parent),
        }
    }
    Ok(())
}
