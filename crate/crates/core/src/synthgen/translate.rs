//! Indonesian detection and the Malay translation hook.
//!
//! The detector is a wordlist ratio: a text is flagged when it contains at
//! least `min_hits` marker words in total and more than `min_ratio` of them
//! are Indonesian. The translator is pluggable; the default returns the text
//! unchanged so the flag is still recorded.

use std::collections::{HashMap, HashSet};

pub trait TranslationHook: Send + Sync {
    fn detect_indonesian(&self, text: &str) -> bool;
    fn translate_to_malay(&self, text: &str) -> String;
}

pub const INDONESIAN_MARKERS: &[&str] = &[
    "perbedaan", "bisa", "bisakah", "kode", "yakni", "tampilan", "karena", "mencoba", "berbeda",
    "nggak", "gimana", "banget", "jawaban", "saran", "kemampuan", "keahlian", "teknis", "dapatkah",
    "sedangkan", "mengevaluasi", "karier", "pentingnya",
];

pub const MALAY_MARKERS: &[&str] = &[
    "boleh", "kerana", "perbezaan", "sahaja", "daripada", "bolehkah", "kod", "iaitu", "paparan",
    "jawapan", "cadangan", "keupayaan", "kepakaran", "teknikal", "bersedia", "kerjaya", "menilai",
    "tu", "tak",
];

/// Word pairs for [`LexiconTranslator`].
pub const ID_MS_LEXICON: &[(&str, &str)] = &[
    ("perbedaan", "perbezaan"),
    ("bisa", "boleh"),
    ("bisakah", "bolehkah"),
    ("kode", "kod"),
    ("yakni", "iaitu"),
    ("tampilan", "paparan"),
    ("karena", "kerana"),
    ("mencoba", "mencuba"),
    ("berbeda", "berbeza"),
    ("jawaban", "jawapan"),
    ("saran", "cadangan"),
    ("kemampuan", "keupayaan"),
    ("keahlian", "kepakaran"),
    ("teknis", "teknikal"),
    ("dapatkah", "bolehkah"),
    ("karier", "kerjaya"),
    ("mengevaluasi", "menilai"),
];

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

/// Wordlist-ratio detector with an optional translator.
pub struct WordlistHook {
    indonesian: HashSet<String>,
    malay: HashSet<String>,
    pub min_hits: usize,
    pub min_ratio: f64,
    translator: Option<Box<dyn Fn(&str) -> String + Send + Sync>>,
}

impl Default for WordlistHook {
    fn default() -> Self {
        WordlistHook {
            indonesian: INDONESIAN_MARKERS.iter().map(|s| s.to_string()).collect(),
            malay: MALAY_MARKERS.iter().map(|s| s.to_string()).collect(),
            min_hits: 2,
            min_ratio: 0.5,
            translator: None,
        }
    }
}

impl WordlistHook {
    pub fn new() -> Self {
        WordlistHook::default()
    }

    /// Uses `f` on every prose segment; fenced code is never passed to it.
    pub fn with_translator(mut self, f: impl Fn(&str) -> String + Send + Sync + 'static) -> Self {
        self.translator = Some(Box::new(f));
        self
    }

    /// Indonesian and Malay marker counts.
    pub fn counts(&self, text: &str) -> (usize, usize) {
        words(text).fold((0, 0), |(id, ms), w| {
            (id + self.indonesian.contains(&w) as usize, ms + self.malay.contains(&w) as usize)
        })
    }
}

impl TranslationHook for WordlistHook {
    fn detect_indonesian(&self, text: &str) -> bool {
        let (id, ms) = self.counts(text);
        let total = id + ms;
        total >= self.min_hits && id as f64 / total as f64 > self.min_ratio
    }

    fn translate_to_malay(&self, text: &str) -> String {
        match &self.translator {
            Some(f) => translate_outside_fences(text, f),
            None => text.to_string(),
        }
    }
}

/// Applies `f` to the text between ``` fences, copying fenced blocks
/// (fence lines included) unchanged. An unterminated fence runs to the end.
pub fn translate_outside_fences(text: &str, f: impl Fn(&str) -> String) -> String {
    let mut out = String::with_capacity(text.len());
    let mut prose = String::new();
    let mut in_fence = false;
    for line in text.split_inclusive('\n') {
        let is_fence = line.trim_start().starts_with("```");
        if in_fence {
            out.push_str(line);
            if is_fence {
                in_fence = false;
            }
        } else if is_fence {
            if !prose.is_empty() {
                out.push_str(&f(&prose));
                prose.clear();
            }
            out.push_str(line);
            in_fence = true;
        } else {
            prose.push_str(line);
        }
    }
    if !prose.is_empty() {
        out.push_str(&f(&prose));
    }
    out
}

/// Word-for-word substitution through a fixed lexicon, preserving case of
/// the first letter and all non-word characters.
#[derive(Debug, Clone)]
pub struct LexiconTranslator {
    map: HashMap<String, String>,
}

impl Default for LexiconTranslator {
    fn default() -> Self {
        LexiconTranslator {
            map: ID_MS_LEXICON.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }
}

impl LexiconTranslator {
    pub fn translate(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        let mut word = String::new();
        let flush = |word: &mut String, out: &mut String| {
            if word.is_empty() {
                return;
            }
            match self.map.get(&word.to_lowercase()) {
                Some(rep) if word.chars().next().is_some_and(char::is_uppercase) => {
                    let mut cs = rep.chars();
                    out.extend(cs.next().map(|c| c.to_ascii_uppercase()));
                    out.extend(cs);
                }
                Some(rep) => out.push_str(rep),
                None => out.push_str(word),
            }
            word.clear();
        };
        for c in text.chars() {
            if c.is_alphanumeric() {
                word.push(c);
            } else {
                flush(&mut word, &mut out);
                out.push(c);
            }
        }
        flush(&mut word, &mut out);
        out
    }

    /// A hook that detects with the default wordlists and translates with
    /// this lexicon.
    pub fn into_hook(self) -> WordlistHook {
        WordlistHook::default().with_translator(move |s| self.translate(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detection_thresholds() {
        let h = WordlistHook::new();
        assert!(h.detect_indonesian("Apakah kamu bisa menjelaskan perbedaan antara keduanya karena saya bingung?"));
        assert!(!h.detect_indonesian("Boleh terangkan perbezaan antara keduanya kerana saya keliru?"));
        assert!(!h.detect_indonesian("bisa"));
        assert!(!h.detect_indonesian(""));
    }

    #[test]
    fn fences_survive_translation() {
        let text = "Karena itu:\n```python\nbisa = 1  # karena\n```\nbisa juga\n";
        let out = translate_outside_fences(text, |s| s.to_uppercase());
        assert_eq!(out, "KARENA ITU:\n```python\nbisa = 1  # karena\n```\nBISA JUGA\n");
    }

    #[test]
    fn unterminated_fence_is_left_alone() {
        let out = translate_outside_fences("a\n```\nb", |s| s.to_uppercase());
        assert_eq!(out, "A\n```\nb");
    }

    #[test]
    fn lexicon_keeps_case_and_punctuation() {
        let t = LexiconTranslator::default();
        assert_eq!(t.translate("Bisa, karena kode-nya!"), "Boleh, kerana kod-nya!");
    }

    #[test]
    fn default_translation_is_identity() {
        assert_eq!(WordlistHook::new().translate_to_malay("bisa karena"), "bisa karena");
        let hooked = LexiconTranslator::default().into_hook();
        assert_eq!(hooked.translate_to_malay("bisa karena"), "boleh kerana");
    }
}
