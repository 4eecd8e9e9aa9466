// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic demo data: a POS-tagged encyclopedic-style corpus and a
//! binary sentiment review set, both generated from small grammars.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fixed seed of the bundled data; model seeds vary independently.
pub const DATA_SEED: u64 = 20_200_924;

const NOUNS: &[(&str, &str)] = &[
    ("city", "cities"), ("river", "rivers"), ("king", "kings"), ("church", "churches"), ("army", "armies"),
    ("war", "wars"), ("album", "albums"), ("song", "songs"), ("band", "bands"), ("team", "teams"),
    ("game", "games"), ("season", "seasons"), ("player", "players"), ("school", "schools"), ("station", "stations"),
    ("road", "roads"), ("bridge", "bridges"), ("ship", "ships"), ("island", "islands"), ("village", "villages"),
    ("castle", "castles"), ("battle", "battles"), ("book", "books"), ("novel", "novels"), ("poem", "poems"),
    ("writer", "writers"), ("painter", "painters"), ("museum", "museums"), ("building", "buildings"), ("tower", "towers"),
    ("company", "companies"), ("government", "governments"), ("party", "parties"), ("election", "elections"), ("law", "laws"),
    ("court", "courts"), ("family", "families"), ("son", "sons"), ("daughter", "daughters"), ("father", "fathers"),
    ("mother", "mothers"), ("species", "species"), ("bird", "birds"), ("tree", "trees"), ("forest", "forests"),
    ("mountain", "mountains"), ("valley", "valleys"), ("coast", "coasts"), ("storm", "storms"), ("hurricane", "hurricanes"),
    ("record", "records"), ("chart", "charts"), ("single", "singles"), ("tour", "tours"), ("concert", "concerts"),
    ("episode", "episodes"), ("series", "series"), ("character", "characters"), ("story", "stories"), ("film", "films"),
    ("director", "directors"), ("actor", "actors"), ("role", "roles"), ("scene", "scenes"), ("plot", "plots"),
    ("century", "centuries"), ("year", "years"), ("month", "months"), ("day", "days"), ("period", "periods"),
    ("system", "systems"), ("line", "lines"), ("train", "trains"), ("engine", "engines"), ("car", "cars"),
    ("province", "provinces"), ("state", "states"), ("county", "counties"), ("region", "regions"), ("border", "borders"),
    ("temple", "temples"), ("god", "gods"), ("priest", "priests"), ("bishop", "bishops"), ("saint", "saints"),
    ("soldier", "soldiers"), ("officer", "officers"), ("general", "generals"), ("force", "forces"), ("fleet", "fleets"),
    ("university", "universities"), ("student", "students"), ("professor", "professors"), ("study", "studies"), ("theory", "theories"),
    ("market", "markets"), ("product", "products"), ("price", "prices"), ("worker", "workers"), ("factory", "factories"),
    ("league", "leagues"), ("match", "matches"), ("goal", "goals"), ("coach", "coaches"), ("club", "clubs"),
    ("house", "houses"), ("garden", "gardens"), ("wall", "walls"), ("door", "doors"), ("window", "windows"),
    ("lake", "lakes"), ("sea", "seas"), ("port", "ports"), ("harbor", "harbors"), ("canal", "canals"),
    ("member", "members"), ("leader", "leaders"), ("president", "presidents"), ("minister", "ministers"), ("council", "councils"),
    ("festival", "festivals"), ("award", "awards"), ("prize", "prizes"), ("critic", "critics"), ("review", "reviews"),
    ("design", "designs"), ("style", "styles"), ("version", "versions"), ("edition", "editions"), ("copy", "copies"),
];

const NOUN_MASS: &[&str] = &[
    "music", "history", "water", "land", "power", "support", "control", "production", "construction", "damage",
    "research", "evidence", "trade", "art", "religion", "work", "success", "attention", "development", "education",
];

const PROPER: &[&str] = &[
    "London", "Paris", "England", "France", "America", "Rome", "Germany", "India", "China", "Japan",
    "Scotland", "Ireland", "Texas", "California", "Australia", "Canada", "Spain", "Italy", "Egypt", "Russia",
    "John", "William", "Henry", "Mary", "Charles", "George", "Elizabeth", "Edward", "Thomas", "Robert",
    "Smith", "Jones", "Walker", "Taylor", "Brown", "Davis", "Wilson", "Moore", "Clark", "Hall",
];

const ADJECTIVES: &[&str] = &[
    "new", "first", "old", "large", "small", "early", "late", "main", "major", "local",
    "national", "public", "royal", "military", "political", "northern", "southern", "eastern", "western", "central",
    "high", "low", "long", "short", "young", "original", "final", "common", "modern", "ancient",
    "important", "famous", "popular", "significant", "similar", "different", "single", "second", "third", "former",
    "british", "french", "american", "english", "german", "roman", "catholic", "christian", "imperial", "naval",
    "strong", "heavy", "wide", "deep", "open", "free", "full", "total", "several", "various",
];

// (base, third person singular, past)
const VERBS: &[(&str, &str, &str)] = &[
    ("become", "becomes", "became"), ("include", "includes", "included"), ("build", "builds", "built"),
    ("release", "releases", "released"), ("play", "plays", "played"), ("write", "writes", "wrote"),
    ("lead", "leads", "led"), ("form", "forms", "formed"), ("hold", "holds", "held"),
    ("receive", "receives", "received"), ("take", "takes", "took"), ("make", "makes", "made"),
    ("serve", "serves", "served"), ("win", "wins", "won"), ("join", "joins", "joined"),
    ("move", "moves", "moved"), ("create", "creates", "created"), ("describe", "describes", "described"),
    ("destroy", "destroys", "destroyed"), ("produce", "produces", "produced"), ("remain", "remains", "remained"),
    ("reach", "reaches", "reached"), ("begin", "begins", "began"), ("support", "supports", "supported"),
    ("defeat", "defeats", "defeated"), ("attack", "attacks", "attacked"), ("replace", "replaces", "replaced"),
    ("name", "names", "named"), ("found", "founds", "founded"), ("establish", "establishes", "established"),
    ("record", "records", "recorded"), ("perform", "performs", "performed"), ("appear", "appears", "appeared"),
    ("cover", "covers", "covered"), ("connect", "connects", "connected"), ("control", "controls", "controlled"),
    ("design", "designs", "designed"), ("publish", "publishes", "published"), ("report", "reports", "reported"),
    ("return", "returns", "returned"), ("visit", "visits", "visited"), ("open", "opens", "opened"),
    ("close", "closes", "closed"), ("leave", "leaves", "left"), ("meet", "meets", "met"),
    ("follow", "follows", "followed"), ("feature", "features", "featured"),
];

const ADVERBS: &[&str] = &[
    "also", "later", "then", "often", "only", "still", "eventually", "originally", "largely", "mainly",
    "finally", "soon", "again", "already", "widely", "briefly", "together", "never", "quickly", "nearly",
];

const PREPOSITIONS: &[&str] = &["of", "in", "on", "at", "for", "with", "from", "by", "during", "after", "before", "near", "under", "between"];
const DETERMINERS: &[&str] = &["the", "a", "this", "that", "each", "an", "every", "no"];
const PRONOUNS: &[&str] = &["he", "she", "it", "they", "we"];
const MODALS: &[&str] = &["would", "could", "will", "may", "can", "should"];
const DIGITS: &[&str] = &["1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "12", "15", "20", "100"];

const POSITIVE: &[&str] = &[
    "great", "excellent", "wonderful", "brilliant", "beautiful", "amazing", "superb", "enjoyable", "fun", "perfect",
    "moving", "delightful", "fantastic", "touching", "charming", "clever", "memorable", "impressive", "good", "best",
];
const NEGATIVE: &[&str] = &[
    "terrible", "awful", "boring", "bad", "poor", "dull", "stupid", "horrible", "weak", "worst",
    "waste", "annoying", "pointless", "painful", "mediocre", "predictable", "silly", "lame", "disappointing", "ugly",
];
const REVIEW_NOUNS: &[&str] = &[
    "movie", "film", "acting", "plot", "story", "script", "ending", "cast", "director", "music",
    "scene", "characters", "dialogue", "performance", "camera", "effects", "pacing", "soundtrack", "humor", "writing",
];
const POSITIVE_VERBS: &[&str] = &["loved", "enjoyed", "liked", "recommend", "adored", "admired"];
const NEGATIVE_VERBS: &[&str] = &["hated", "disliked", "regret", "avoid", "endured", "suffered"];

/// Samples from `items` with Zipf-like weights 1/(rank+1), so frequencies
/// within each word class are skewed like natural text.
fn zipf<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    let total: f64 = (1..=items.len()).map(|r| 1.0 / r as f64).sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, it) in items.iter().enumerate() {
        x -= 1.0 / (i + 1) as f64;
        if x < 0.0 {
            return it;
        }
    }
    &items[items.len() - 1]
}

struct Sentence {
    words: Vec<(String, &'static str)>,
}

impl Sentence {
    fn new() -> Self {
        Sentence { words: Vec::new() }
    }

    fn push(&mut self, w: &str, tag: &'static str) {
        self.words.push((w.to_string(), tag));
    }
}

fn noun_phrase(rng: &mut ChaCha8Rng, s: &mut Sentence, depth: usize) {
    match rng.gen_range(0..10) {
        0 => s.push(zipf(rng, PROPER), "NNP"),
        1 if depth == 0 => {
            s.push(zipf(rng, PROPER), "NNP");
            s.push(zipf(rng, PROPER), "NNP");
        }
        2 => {
            s.push(zipf(rng, NOUN_MASS), "NN");
        }
        3 => {
            if rng.gen_bool(0.5) {
                s.push("the", "DT");
            }
            s.push(zipf(rng, DIGITS), "CD");
            s.push(zipf(rng, NOUNS).1, "NNS");
        }
        4 => {
            s.push(zipf(rng, PROPER), "NNP");
            s.push("'s", "POS");
            s.push(zipf(rng, NOUNS).0, "NN");
        }
        _ => {
            let plural = rng.gen_bool(0.3);
            if plural {
                if rng.gen_bool(0.5) {
                    s.push("the", "DT");
                }
            } else {
                let det = *zipf(rng, DETERMINERS);
                s.push(det, "DT");
            }
            let adjectives = [0, 0, 1, 1, 2][rng.gen_range(0..5)];
            for _ in 0..adjectives {
                s.push(zipf(rng, ADJECTIVES), "JJ");
            }
            let n = zipf(rng, NOUNS);
            if plural {
                s.push(n.1, "NNS");
            } else {
                s.push(n.0, "NN");
            }
        }
    }
    if depth < 2 && rng.gen_bool(0.25) {
        s.push(zipf(rng, PREPOSITIONS), "IN");
        noun_phrase(rng, s, depth + 1);
    }
}

fn subject(rng: &mut ChaCha8Rng, s: &mut Sentence) {
    if rng.gen_bool(0.2) {
        s.push(zipf(rng, PRONOUNS), "PRP");
    } else {
        noun_phrase(rng, s, 0);
    }
}

fn verb_phrase(rng: &mut ChaCha8Rng, s: &mut Sentence) {
    let v = zipf(rng, VERBS);
    match rng.gen_range(0..8) {
        0 => {
            s.push(v.1, "VBZ");
            noun_phrase(rng, s, 0);
        }
        1 => {
            s.push(zipf(rng, MODALS), "MD");
            s.push(v.0, "VB");
            noun_phrase(rng, s, 0);
        }
        2 => {
            s.push("was", "VBD");
            s.push(v.2, "VBN");
            s.push("by", "IN");
            noun_phrase(rng, s, 1);
        }
        3 => {
            s.push("is", "VBZ");
            s.push(zipf(rng, ADJECTIVES), "JJ");
        }
        4 => {
            s.push(zipf(rng, ADVERBS), "RB");
            s.push(v.2, "VBD");
            noun_phrase(rng, s, 0);
        }
        5 => {
            s.push(v.2, "VBD");
            s.push("to", "TO");
            s.push(zipf(rng, VERBS).0, "VB");
            noun_phrase(rng, s, 1);
        }
        _ => {
            s.push(v.2, "VBD");
            noun_phrase(rng, s, 0);
        }
    }
    if rng.gen_bool(0.3) {
        s.push(zipf(rng, PREPOSITIONS), "IN");
        if rng.gen_bool(0.3) {
            s.push(&format!("{}", 1800 + rng.gen_range(0..220)), "CD");
        } else {
            noun_phrase(rng, s, 1);
        }
    }
}

fn encyclopedic_sentence(rng: &mut ChaCha8Rng) -> Sentence {
    let mut s = Sentence::new();
    if rng.gen_bool(0.15) {
        s.push("in", "IN");
        s.push(&format!("{}", 1800 + rng.gen_range(0..220)), "CD");
        s.push(",", ",");
    }
    subject(rng, &mut s);
    verb_phrase(rng, &mut s);
    if rng.gen_bool(0.2) {
        s.push(if rng.gen_bool(0.7) { "and" } else { "but" }, "CC");
        verb_phrase(rng, &mut s);
    }
    s.push(".", ".");
    s
}

/// Tagged corpus of at least `min_tokens` tokens: one paragraph per line,
/// each token paired with its gold tag.
pub fn tagged_corpus(seed: u64, min_tokens: usize) -> Vec<Vec<(String, &'static str)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let mut total = 0;
    while total < min_tokens {
        let mut line = Vec::new();
        for _ in 0..rng.gen_range(2..6) {
            line.extend(encyclopedic_sentence(&mut rng).words);
        }
        total += line.len();
        lines.push(line);
    }
    lines
}

fn review_sentence(rng: &mut ChaCha8Rng, positive: bool) -> Vec<String> {
    let (adj, verbs) = if positive { (POSITIVE, POSITIVE_VERBS) } else { (NEGATIVE, NEGATIVE_VERBS) };
    let noun = *zipf(rng, REVIEW_NOUNS);
    let words: Vec<&str> = match rng.gen_range(0..6) {
        0 => vec!["the", noun, "was", zipf(rng, adj), "."],
        1 => vec!["i", zipf(rng, verbs), "the", noun, "."],
        2 => vec!["a", zipf(rng, adj), noun, "with", "a", zipf(rng, adj), zipf(rng, REVIEW_NOUNS), "."],
        3 => vec!["the", noun, "is", "really", zipf(rng, adj), "and", zipf(rng, adj), "."],
        4 => vec!["it", "was", "a", zipf(rng, adj), zipf(rng, REVIEW_NOUNS), "."],
        _ => vec!["overall", "the", noun, "felt", zipf(rng, adj), "."],
    };
    words.into_iter().map(String::from).collect()
}

/// Binary sentiment reviews: `(label, tokens)`. Each review mixes
/// descriptive sentences with evaluative ones whose polarity agrees with
/// the label 75% of the time.
pub fn reviews(seed: u64, count: usize) -> Vec<(u8, Vec<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let label = rng.gen_bool(0.5);
        let mut sentences: Vec<Vec<String>> = Vec::new();
        for _ in 0..rng.gen_range(2..5) {
            let agree = rng.gen_bool(0.75);
            sentences.push(review_sentence(&mut rng, label == agree));
        }
        for _ in 0..rng.gen_range(1..4) {
            sentences.push(encyclopedic_sentence(&mut rng).words.into_iter().map(|(w, _)| w).collect());
        }
        sentences.shuffle(&mut rng);
        let mut verdict = vec!["overall".to_string(), ",".to_string()];
        verdict.extend(review_sentence(&mut rng, label));
        sentences.push(verdict);
        out.push((label as u8, sentences.concat()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let a = tagged_corpus(1, 5_000);
        assert_eq!(a, tagged_corpus(1, 5_000));
        let n: usize = a.iter().map(Vec::len).sum();
        assert!(n >= 5_000);
        assert_eq!(reviews(2, 10), reviews(2, 10));
    }

    #[test]
    fn tags_are_penn_treebank() {
        for line in tagged_corpus(3, 2_000) {
            for (w, t) in line {
                assert!(txray_core::corpus::PTB_TAGS.contains(&t), "{w}/{t}");
                assert!(!w.contains(char::is_whitespace));
            }
        }
    }
}
