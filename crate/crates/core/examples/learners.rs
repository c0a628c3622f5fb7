//! The two base learners: a softmax linear model over fixed features and a
//! joint-embedding model that learns its own word and bigram vectors.
//!
//! ```text
//! cargo run --release --example learners
//! ```

use htc::features::{average_doc_vector, build_vocabulary, tfidf_vector, VocabularyOptions};
use htc::learner::{
    extract_embeddings, train_joint_embedding, train_softmax_linear, Labels, TrainConfig,
};
use htc::synthetic::{balanced_taxonomy, signal_corpus, SignalCorpusConfig};

fn main() -> anyhow::Result<()> {
    let tax = balanced_taxonomy(3);
    let docs = signal_corpus(&tax, &SignalCorpusConfig { n_docs: 3000, ..Default::default() });
    let tokens: Vec<&[String]> = docs.iter().map(|d| d.tokens.as_slice()).collect();
    let labels: Vec<&str> = docs.iter().map(|d| d.label.as_str()).collect();
    let labels = Labels::new(&labels, None)?;
    let config = TrainConfig {
        dimension: 10,
        bigram_buckets: 100_000,
        learning_rate: 0.5,
        epochs: 20,
        ..Default::default()
    };
    let accuracy = |predict: &dyn Fn(usize) -> usize| {
        let hits = (0..docs.len()).filter(|&i| predict(i) == labels.targets()[i]).count();
        hits as f64 / docs.len() as f64
    };

    let joint = train_joint_embedding(&tokens, &labels, &config)?;
    println!("joint embedding, loss per epoch: {:.3?}", joint.epoch_losses);
    let model = &joint.model;
    println!("  training accuracy {:.3}", accuracy(&|i| model.predict_proba(tokens[i]).argmax()));

    let vocab = build_vocabulary(&tokens, VocabularyOptions::default())?;
    let x: Vec<_> = tokens.iter().map(|d| tfidf_vector(d, &vocab)).collect();
    let linear = train_softmax_linear(&x, &labels, vocab.len(), &config)?;
    println!("softmax over tf-idf ({} terms), loss per epoch: {:.3?}", vocab.len(), linear.epoch_losses);
    let m = &linear.model;
    println!("  training accuracy {:.3}", accuracy(&|i| m.predict_proba(&x[i]).unwrap().argmax()));

    // Supervised word vectors from the joint model, reused as fixed features.
    let table = extract_embeddings(model);
    let x: Vec<_> = tokens.iter().map(|d| average_doc_vector(d, &table)).collect();
    let linear = train_softmax_linear(&x, &labels, table.dimension(), &config)?;
    let m = &linear.model;
    println!(
        "softmax over averaged learned embeddings: training accuracy {:.3}",
        accuracy(&|i| m.predict_proba(&x[i]).unwrap().argmax())
    );
    Ok(())
}
