//! Analyzer shared by indexing and querying: lowercase, split on any
//! non-alphanumeric character, no stemming, no stopwords.

pub fn tokenize(text: &str) -> Vec<String> {
    tokens(text).collect()
}

pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}
