//! TF-IDF vectors and averaged word embeddings.
//!
//! ```text
//! cargo run --example features
//! ```

use htc::corpus::normalize;
use htc::features::{average_doc_vector, build_vocabulary, load_embeddings, tfidf_vector, VocabularyOptions};

fn main() -> anyhow::Result<()> {
    let docs: Vec<Vec<String>> = [
        "Tylan stock jumps; weighs sale of company.",
        "The stock of Tylan General jumped Tuesday.",
        "Central bank holds the key rate steady.",
        "Consumer prices edge up in July.",
    ]
    .iter()
    .map(|t| normalize(t))
    .collect();

    let options = VocabularyOptions {
        stem: true,
        ..Default::default()
    }
    .with_english_stopwords();
    let vocab = build_vocabulary(&docs, options)?;
    println!("{} terms over {} documents", vocab.len(), vocab.n_docs());
    for d in &docs {
        // Sparse `index:weight` lines; terms in every document weigh zero.
        println!("{}", tfidf_vector(d, &vocab));
    }

    // The first line holds the word count and dimension; it is optional.
    let table = load_embeddings("3 2\nstock 1 0\njumps 0 1\nbank -1 0.5\n".as_bytes())?;
    for d in &docs[..3] {
        println!("{:?} -> {:?}", d, average_doc_vector(d, &table));
    }
    Ok(())
}
