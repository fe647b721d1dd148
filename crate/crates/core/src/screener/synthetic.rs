//! Seeded template generator for labelled PICO sentences.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LabeledSentence, PicoLabel};

const PEOPLE: &[&str] = &["adults", "patients", "older adults", "survivors", "women", "men", "veterans", "children"];
const CONDITIONS: &[&str] = &[
    "stroke", "heart failure", "atrial fibrillation", "hypertension", "dementia",
    "coronary artery disease", "depression", "diabetes",
];
const INTERVENTIONS: &[&str] = &[
    "aerobic exercise", "cognitive training", "mindfulness", "cardiac rehabilitation",
    "tai chi", "dietary counselling", "resistance training", "yoga",
];
const COMPARATORS: &[&str] = &[
    "usual care", "placebo", "no intervention", "a waitlist", "sham stimulation",
    "health education", "standard treatment", "attention control",
];
const OUTCOMES: &[&str] = &[
    "cognitive function", "blood pressure", "quality of life", "heart rate variability",
    "depressive symptoms", "functional capacity", "mortality", "hospital readmission",
];
const INSTRUMENTS: &[&str] = &["MoCA", "SF-36", "Barthel Index", "six-minute walk test", "PHQ-9", "Stroop task"];
const DESIGNS: &[&str] = &[
    "randomized controlled trial", "prospective cohort study", "case-control study",
    "cross-sectional survey", "systematic review", "pilot trial", "crossover trial",
];
const SITES: &[&str] = &["three hospitals", "primary care clinics", "community centres", "a rehabilitation unit"];
const FUNDERS: &[&str] = &["a national research council", "a heart foundation", "the ministry of health", "a university grant"];
const GUIDELINES: &[&str] = &["CONSORT", "STROBE", "PRISMA", "SPIRIT"];

const TEMPLATES: [[&str; 5]; 6] = [
    [
        "Participants were {n} {people} with {condition}.",
        "We enrolled {n} {people} diagnosed with {condition}.",
        "The study population comprised {n} {people} aged {n} to {n} years.",
        "Eligible {people} had a confirmed diagnosis of {condition}.",
        "A total of {n} {people} with {condition} were recruited from {site}.",
    ],
    [
        "{People} in the intervention group received {intervention} for {n} weeks.",
        "The intervention consisted of {intervention} delivered {n} times per week.",
        "Patients were assigned to {intervention} sessions lasting {n} minutes.",
        "{Intervention} was administered by trained staff over {n} weeks.",
        "The experimental arm completed a structured {intervention} program.",
    ],
    [
        "The control group received {comparator}.",
        "Participants in the comparison arm were given {comparator}.",
        "{Comparator} served as the comparator condition.",
        "Controls continued with {comparator} throughout the study.",
        "Results were contrasted against a {comparator} group.",
    ],
    [
        "The primary outcome was {outcome} measured with the {instrument}.",
        "Secondary outcomes included {outcome} and {outcome}.",
        "{Outcome} was assessed using the {instrument} at baseline and follow-up.",
        "We measured changes in {outcome} after {n} months.",
        "{Outcome} improved significantly in the treatment arm.",
    ],
    [
        "This was a {design} conducted at {site}.",
        "We conducted a {design} in accordance with {guideline} guidelines.",
        "This {design} was registered prospectively.",
        "Study design: {design}.",
        "A {design} design was used.",
    ],
    [
        "{Condition} is a leading cause of disability worldwide.",
        "Further research is needed to confirm these findings.",
        "The mechanisms linking {condition} and {condition} remain unclear.",
        "These results have implications for clinical practice.",
        "Funding was provided by {funder}.",
    ],
];

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn fill<R: Rng>(template: &str, rng: &mut R) -> String {
    let mut out = String::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = open + rest[open..].find('}').expect("closed placeholder");
        let key = &rest[open + 1..close];
        let lower = key.to_ascii_lowercase();
        let value = match lower.as_str() {
            "n" => rng.gen_range(2..400).to_string(),
            "people" => PEOPLE.choose(rng).unwrap().to_string(),
            "condition" => CONDITIONS.choose(rng).unwrap().to_string(),
            "intervention" => INTERVENTIONS.choose(rng).unwrap().to_string(),
            "comparator" => COMPARATORS.choose(rng).unwrap().to_string(),
            "outcome" => OUTCOMES.choose(rng).unwrap().to_string(),
            "instrument" => INSTRUMENTS.choose(rng).unwrap().to_string(),
            "design" => DESIGNS.choose(rng).unwrap().to_string(),
            "site" => SITES.choose(rng).unwrap().to_string(),
            "funder" => FUNDERS.choose(rng).unwrap().to_string(),
            "guideline" => GUIDELINES.choose(rng).unwrap().to_string(),
            other => panic!("unknown placeholder {other}"),
        };
        if key.starts_with(|c: char| c.is_ascii_uppercase()) {
            out.push_str(&capitalize(&value));
        } else {
            out.push_str(&value);
        }
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    out
}

/// `size` sentences, balanced across the six labels (five templates each), in shuffled order.
pub fn synthetic_corpus(size: usize, seed: u64) -> Vec<LabeledSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<LabeledSentence> = (0..size)
        .map(|i| {
            let label = PicoLabel::ALL[i % PicoLabel::COUNT];
            let template = TEMPLATES[label.index()][(i / PicoLabel::COUNT) % 5];
            LabeledSentence::new(fill(template, &mut rng), label)
        })
        .collect();
    out.shuffle(&mut rng);
    out
}

/// Builds an abstract whose sentences carry the given labels, one sentence each.
pub fn synthetic_abstract(labels: &[PicoLabel], seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labels
        .iter()
        .map(|l| {
            let template = TEMPLATES[l.index()].choose(&mut rng).unwrap();
            fill(template, &mut rng)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_and_seeded() {
        let a = synthetic_corpus(600, 1);
        assert_eq!(a.len(), 600);
        for label in PicoLabel::ALL {
            assert_eq!(a.iter().filter(|s| s.label == label).count(), 100);
        }
        assert_eq!(a, synthetic_corpus(600, 1));
        assert_ne!(a, synthetic_corpus(600, 2));
        assert!(a.iter().all(|s| !s.sentence.contains('{')));
    }

    #[test]
    fn abstract_has_one_sentence_per_label() {
        let labels = [PicoLabel::P, PicoLabel::I, PicoLabel::O];
        let text = synthetic_abstract(&labels, 4);
        assert_eq!(crate::text::split_sentences(&text).len(), 3);
    }
}
