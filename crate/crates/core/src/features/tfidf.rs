use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use super::FeatureError;

/// A short English stopword list for the TF-IDF pipeline.
pub const ENGLISH_STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been",
    "but", "by", "can", "could", "did", "do", "does", "for", "from", "had", "has", "have", "he",
    "her", "his", "i", "if", "in", "into", "is", "it", "its", "more", "most", "no", "not", "of",
    "on", "one", "or", "other", "our", "out", "over", "said", "she", "so", "some", "than",
    "that", "the", "their", "them", "then", "there", "these", "they", "this", "to", "up", "was",
    "we", "were", "what", "when", "which", "who", "will", "with", "would", "you",
];

/// Harman's S-stemmer: strips English plural endings only.
pub fn s_stem(word: &str) -> String {
    if let Some(stem) = word.strip_suffix("ies") {
        if !stem.ends_with('e') && !stem.ends_with('a') {
            return format!("{stem}y");
        }
    }
    if let Some(stem) = word.strip_suffix("es") {
        if !stem.ends_with('a') && !stem.ends_with('e') && !stem.ends_with('o') {
            return format!("{stem}e");
        }
    }
    if let Some(stem) = word.strip_suffix('s') {
        if !stem.ends_with('u') && !stem.ends_with('s') {
            return stem.to_string();
        }
    }
    word.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabularyOptions {
    pub stopwords: Option<HashSet<String>>,
    pub stem: bool,
    pub min_df: u32,
}

impl Default for VocabularyOptions {
    fn default() -> Self {
        VocabularyOptions {
            stopwords: None,
            stem: false,
            min_df: 1,
        }
    }
}

impl VocabularyOptions {
    pub fn with_english_stopwords(mut self) -> Self {
        self.stopwords = Some(ENGLISH_STOPWORDS.iter().map(|s| s.to_string()).collect());
        self
    }

    /// Applies the stopword filter (on the raw token) and then stemming.
    pub fn process<'a>(&'a self, tokens: &'a [String]) -> impl Iterator<Item = String> + 'a {
        tokens
            .iter()
            .filter(move |t| self.stopwords.as_ref().is_none_or(|s| !s.contains(t.as_str())))
            .map(move |t| if self.stem { s_stem(t) } else { t.clone() })
    }
}

/// Term index and document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
    df: Vec<u32>,
    n_docs: u32,
    pub options: VocabularyOptions,
}

pub fn build_vocabulary<D: AsRef<[String]>>(
    docs: &[D],
    options: VocabularyOptions,
) -> Result<Vocabulary, FeatureError> {
    if docs.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let mut df: BTreeMap<String, u32> = BTreeMap::new();
    for doc in docs {
        let unique: HashSet<String> = options.process(doc.as_ref()).collect();
        for t in unique {
            *df.entry(t).or_default() += 1;
        }
    }
    df.retain(|_, n| *n >= options.min_df);
    Ok(Vocabulary::from_parts(
        df.into_iter().collect(),
        docs.len() as u32,
        options,
    ))
}

impl Vocabulary {
    fn from_parts(entries: Vec<(String, u32)>, n_docs: u32, options: VocabularyOptions) -> Self {
        let mut terms = Vec::with_capacity(entries.len());
        let mut df = Vec::with_capacity(entries.len());
        for (t, n) in entries {
            terms.push(t);
            df.push(n);
        }
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            terms,
            index,
            df,
            n_docs,
            options,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> u32 {
        self.n_docs
    }

    pub fn index_of(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: u32) -> &str {
        &self.terms[index as usize]
    }

    pub fn df(&self, term: &str) -> Option<u32> {
        self.index_of(term).map(|i| self.df[i as usize])
    }

    pub fn idf(&self, index: u32) -> f64 {
        (self.n_docs as f64 / self.df[index as usize] as f64).ln()
    }

    /// Writes `n_docs` on the first line, then `term<TAB>df` lines.
    ///
    /// Filtering options are not stored.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.n_docs)?;
        for (t, df) in self.terms.iter().zip(&self.df) {
            writeln!(out, "{t}\t{df}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R, options: VocabularyOptions) -> Result<Self, FeatureError> {
        let parse_err = |line, reason: &str| FeatureError::Parse {
            line,
            reason: reason.to_string(),
        };
        let mut lines = reader.lines();
        let n_docs: u32 = lines
            .next()
            .ok_or(FeatureError::EmptyFile)?
            .map_err(|e| FeatureError::Io(e.to_string()))?
            .trim()
            .parse()
            .map_err(|_| parse_err(1, "expected document count"))?;
        let mut entries = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| FeatureError::Io(e.to_string()))?;
            let (t, df) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(i + 2, "expected term<TAB>df"))?;
            let df: u32 = df.parse().map_err(|_| parse_err(i + 2, "bad df"))?;
            entries.push((t.to_string(), df));
        }
        Ok(Self::from_parts(entries, n_docs, options))
    }
}

/// Sparse TF-IDF weights, sorted by term index, zero weights omitted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TfIdfVector {
    entries: Vec<(u32, f64)>,
}

impl TfIdfVector {
    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Debug form: space-separated `index:weight` entries.
impl fmt::Display for TfIdfVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (i, w)) in self.entries.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{i}:{w}")?;
        }
        Ok(())
    }
}

/// `tf(t, d) * ln(N / df(t))` for every in-vocabulary term of `doc`.
pub fn tfidf_vector(doc: &[String], vocab: &Vocabulary) -> TfIdfVector {
    let mut tf: BTreeMap<u32, u32> = BTreeMap::new();
    for t in vocab.options.process(doc) {
        if let Some(i) = vocab.index_of(&t) {
            *tf.entry(i).or_default() += 1;
        }
    }
    let entries = tf
        .into_iter()
        .map(|(i, n)| (i, n as f64 * vocab.idf(i)))
        .filter(|&(_, w)| w != 0.0)
        .collect();
    TfIdfVector { entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn counts_and_filters() {
        let docs = vec![toks("a b"), toks("b c")];
        let v = build_vocabulary(&docs, VocabularyOptions::default()).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!((v.df("a"), v.df("b"), v.df("c")), (Some(1), Some(2), Some(1)));
        assert_eq!(v.n_docs(), 2);
        assert_eq!(v.index_of("a"), Some(0));
        assert_eq!(v.index_of("c"), Some(2));

        let stop = VocabularyOptions {
            stopwords: Some(["b".to_string()].into_iter().collect()),
            ..Default::default()
        };
        let v = build_vocabulary(&docs, stop).unwrap();
        assert_eq!(v.index_of("b"), None);
        assert_eq!(v.len(), 2);

        let min_df = VocabularyOptions {
            min_df: 2,
            ..Default::default()
        };
        let v = build_vocabulary(&docs, min_df).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.index_of("b"), Some(0));

        assert_eq!(
            build_vocabulary::<Vec<String>>(&[], VocabularyOptions::default()),
            Err(FeatureError::EmptyCorpus)
        );
    }

    #[test]
    fn weights() {
        // N = 100; "t" occurs in 10 documents, five times in the first one.
        let mut docs = vec![toks("t t t t t u")];
        docs.extend((0..9).map(|_| toks("t u")));
        docs.extend((0..90).map(|_| toks("u")));
        let v = build_vocabulary(&docs, VocabularyOptions::default()).unwrap();
        let w = tfidf_vector(&docs[0], &v);
        let t = v.index_of("t").unwrap();
        assert!((w.get(t) - 5.0 * 10f64.ln()).abs() < 1e-12);
        assert!((w.get(t) - 11.5129).abs() < 1e-4);
        // "u" occurs everywhere, so its weight is zero and not stored.
        assert_eq!(w.entries().len(), 1);
        assert!(tfidf_vector(&[], &v).is_empty());
        assert!(tfidf_vector(&toks("zzz"), &v).is_empty());
    }

    #[test]
    fn stemmer() {
        assert_eq!(s_stem("queries"), "query");
        assert_eq!(s_stem("aies"), "aie");
        assert_eq!(s_stem("horses"), "horse");
        assert_eq!(s_stem("does"), "doe");
        assert_eq!(s_stem("toes"), "toe");
        assert_eq!(s_stem("stocks"), "stock");
        assert_eq!(s_stem("corpus"), "corpus");
        assert_eq!(s_stem("class"), "class");
        assert_eq!(s_stem("s"), "");
        let opts = VocabularyOptions {
            stem: true,
            ..Default::default()
        };
        let v = build_vocabulary(&[toks("prices price")], opts).unwrap();
        assert_eq!(v.len(), 1);
    }

    #[test]
    fn vocabulary_file_round_trip() {
        let docs = vec![toks("a b"), toks("b c")];
        let v = build_vocabulary(&docs, VocabularyOptions::default()).unwrap();
        let mut buf = Vec::new();
        v.write(&mut buf).unwrap();
        let back = Vocabulary::read(buf.as_slice(), VocabularyOptions::default()).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn display_sparse_lines() {
        let docs = vec![toks("a b"), toks("b c")];
        let v = build_vocabulary(&docs, VocabularyOptions::default()).unwrap();
        let w = tfidf_vector(&toks("a c c"), &v);
        assert_eq!(
            w.to_string(),
            format!("0:{} 2:{}", 2f64.ln(), 2.0 * 2f64.ln())
        );
    }
}
