//! Deterministic synthetic corpora shaped like the two low-resource datasets
//! (course reflections and product/business reviews), plus a hand-written
//! toy set for overfitting checks. The text is generated; only the shapes
//! (document counts, units per document, splits) follow the real data.

use rand::seq::IndexedRandom;
use rand::Rng;
use sumaug_core::rng::stream;
use sumaug_core::{Corpus, Document, Sample};

const COURSES: &[(&str, &[&str])] = &[
    ("cs1", &["recursion", "pointers", "arrays", "loops", "graphs", "sorting", "hashing", "trees"]),
    ("stats", &["variance", "regression", "sampling", "priors", "histograms", "outliers", "bootstrap", "medians"]),
    ("chem", &["bonds", "titration", "enthalpy", "isomers", "kinetics", "orbitals", "buffers", "moles"]),
    ("phys", &["vectors", "momentum", "friction", "torque", "circuits", "waves", "energy", "optics"]),
];

const VENUES: &[(&str, &[&str])] = &[
    ("amazon", &["battery", "screen", "price", "delivery", "size", "charger", "packaging", "sound"]),
    ("yelp", &["service", "staff", "taste", "portions", "parking", "music", "dessert", "coffee"]),
];

const ADJECTIVES: &[&str] = &["clear", "confusing", "interesting", "fast", "hard", "useful", "boring", "great"];

fn reflection<R: Rng + ?Sized>(rng: &mut R, topics: &[&str], focus: &[&str; 2]) -> String {
    // two thirds of units talk about a focus topic
    let t = if rng.random_bool(2.0 / 3.0) { *focus.choose(rng).unwrap() } else { *topics.choose(rng).unwrap() };
    let t2 = *topics.choose(rng).unwrap();
    let a = *ADJECTIVES.choose(rng).unwrap();
    let a2 = *ADJECTIVES.choose(rng).unwrap();
    match rng.random_range(0..7) {
        0 => format!("the {t} part was {a}"),
        1 => format!("I liked {t}."),
        2 => format!("I was confused by {t} and {t2}"),
        3 => format!("{t} examples helped me understand {t2}"),
        4 => format!("more practice on {t} please"),
        5 => "nothing".to_owned(),
        _ => format!("the lecture on {t} and {t2} was {a} but the {t} demo felt {a2}"),
    }
}

fn review<R: Rng + ?Sized>(rng: &mut R, aspects: &[&str], focus: &[&str; 2]) -> String {
    let t = if rng.random_bool(2.0 / 3.0) { *focus.choose(rng).unwrap() } else { *aspects.choose(rng).unwrap() };
    let t2 = *aspects.choose(rng).unwrap();
    let a = *ADJECTIVES.choose(rng).unwrap();
    match rng.random_range(0..5) {
        0 => format!("The {t} is {a}."),
        1 => format!("I would come back for the {t}, although the {t2} was {a}."),
        2 => format!("Honestly the {t} could be better"),
        3 => format!("Loved the {t} and the {t2}!"),
        _ => format!("{a} {t}, {a} {t2}"),
    }
}

fn focus_pair<R: Rng + ?Sized>(rng: &mut R, topics: &[&'static str]) -> [&'static str; 2] {
    let picked: Vec<&'static str> = topics.choose_multiple(rng, 2).copied().collect();
    [picked[0], picked[1]]
}

/// Course-reflection documents: `groups[i] = (course index, documents)`,
/// with the number of units per document drawn uniformly from `units`.
pub fn reflections(groups: &[(usize, usize)], units: std::ops::RangeInclusive<usize>, seed: u64) -> Vec<Sample> {
    let mut out = Vec::new();
    for &(course, docs) in groups {
        let (name, topics) = COURSES[course % COURSES.len()];
        for d in 0..docs {
            let id = format!("{name}-{d:03}");
            let mut rng = stream(seed, &id, 0);
            let focus = focus_pair(&mut rng, topics);
            let n = rng.random_range(units.clone());
            let texts: Vec<String> = (0..n).map(|_| reflection(&mut rng, topics, &focus)).collect();
            let summary = match rng.random_range(0..3) {
                0 => format!("students discussed {} and {}", focus[0], focus[1]),
                1 => format!("many found {} hard , others wanted more {}", focus[0], focus[1]),
                _ => format!("{} and {} were the main topics", focus[0], focus[1]),
            };
            out.push(Sample::new(Document::new(id, name, texts).expect("units"), summary).expect("summary"));
        }
    }
    out
}

/// 368 unsplit reflection documents over four courses (90, 90, 91, 97) with
/// about 44 units each. An 80/10/10 stratified split yields 294/37/37.
pub fn cm_shape(seed: u64) -> Vec<Sample> {
    reflections(&[(0, 90), (1, 90), (2, 91), (3, 97)], 34..=54, seed)
}

/// 160 pre-split review sets (58 train, 42 val, 60 test) of 8 reviews each.
pub fn ay_shape(seed: u64) -> Corpus {
    let mut all = Vec::new();
    for i in 0..160 {
        let (venue, aspects) = VENUES[i % VENUES.len()];
        let id = format!("{venue}-{i:03}");
        let mut rng = stream(seed, &id, 0);
        let focus = focus_pair(&mut rng, aspects);
        let texts: Vec<String> = (0..8).map(|_| review(&mut rng, aspects, &focus)).collect();
        let summary = format!("reviewers mostly talk about the {} and the {}", focus[0], focus[1]);
        all.push(Sample::new(Document::new(id, venue, texts).expect("units"), summary).expect("summary"));
    }
    let test = all.split_off(100);
    let val = all.split_off(58);
    Corpus::new(all, val, test).expect("distinct ids")
}

/// A small unsplit reflection corpus (4 courses × 12 documents, 3–6 units)
/// that trains in seconds.
pub fn small(seed: u64) -> Vec<Sample> {
    reflections(&[(0, 12), (1, 12), (2, 12), (3, 12)], 3..=6, seed)
}

/// Sixteen hand-written samples with short, distinct summaries.
pub fn toy16() -> Vec<Sample> {
    const ROWS: [(&str, &[&str], &str); 16] = [
        ("t01", &["recursion was confusing", "the base case helped"], "recursion base case"),
        ("t02", &["loops were easy", "nested loops took time"], "nested loops"),
        ("t03", &["pointers crashed my program", "memory diagrams helped"], "pointers and memory"),
        ("t04", &["sorting demo was fun", "merge sort made sense"], "merge sort demo"),
        ("t05", &["graphs looked scary", "bfs example was clear"], "graph search"),
        ("t06", &["hash tables are fast", "collisions were unclear"], "hash collisions"),
        ("t07", &["variance formula again", "squared deviations"], "variance formula"),
        ("t08", &["regression lines", "least squares fit"], "least squares"),
        ("t09", &["titration lab went well", "indicator changed color"], "titration lab"),
        ("t10", &["bond angles", "lewis structures were hard"], "lewis structures"),
        ("t11", &["torque problems", "lever arm examples"], "torque and levers"),
        ("t12", &["circuits lab", "ohm law practice"], "ohm law circuits"),
        ("t13", &["battery lasts long", "charger is slow"], "battery and charger"),
        ("t14", &["staff was friendly", "coffee was cold"], "friendly staff"),
        ("t15", &["optics mirrors", "lens drawings"], "lens and mirrors"),
        ("t16", &["bootstrap sampling", "confidence intervals"], "bootstrap intervals"),
    ];
    ROWS.iter()
        .map(|(id, units, summary)| {
            Sample::new(Document::new(*id, "toy", units.iter().copied()).expect("units"), *summary).expect("summary")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use sumaug_core::corpus::{split_corpus, SplitRatios};

    #[test]
    fn cm_shape_counts() {
        let samples = cm_shape(0);
        assert_eq!(samples.len(), 368);
        let units: usize = samples.iter().map(|s| s.document.units.len()).sum();
        let mean = units as f64 / 368.0;
        assert!((mean - 44.0).abs() < 1.5, "mean units {mean}");
        let split = split_corpus(samples, SplitRatios::default(), 0).unwrap();
        assert!(split.warnings.is_empty());
        let c = split.corpus;
        assert_eq!((c.train.len(), c.val.len(), c.test.len()), (294, 37, 37));
    }

    #[test]
    fn ay_shape_counts() {
        let c = ay_shape(1);
        assert_eq!((c.train.len(), c.val.len(), c.test.len()), (58, 42, 60));
        assert!(c.iter().all(|(_, s)| s.document.units.len() == 8));
    }

    #[test]
    fn fixtures_are_deterministic() {
        assert_eq!(small(4), small(4));
        assert_ne!(small(4), small(5));
        assert_eq!(toy16().len(), 16);
    }
}
