#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use evidesk_core::corpus::StudyRecord;
use evidesk_core::designclf::CueLexicon;
use evidesk_core::embedkit::HashedLocalEmbedder;
use evidesk_core::screener::SequenceModel;
use evidesk_service::config::Config;
use evidesk_service::engine::{bootstrap_screener, Engine, Parts};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Theme {
    population: &'static str,
    interventions: [&'static str; 2],
    outcomes: [&'static str; 2],
    words: [&'static str; 6],
}

const THEMES: [Theme; 5] = [
    Theme {
        population: "older adults at risk of falls",
        interventions: ["tai chi", "balance training"],
        outcomes: ["falls", "gait speed"],
        words: ["balance", "falls", "gait", "frailty", "fracture", "mobility"],
    },
    Theme {
        population: "adults with hypertension",
        interventions: ["sodium reduction", "dash diet"],
        outcomes: ["blood pressure", "sodium excretion"],
        words: ["sodium", "diet", "pressure", "systolic", "diastolic", "salt"],
    },
    Theme {
        population: "adults with depression",
        interventions: ["cognitive behavioural therapy", "mindfulness"],
        outcomes: ["depressive symptoms", "anxiety"],
        words: ["depression", "mood", "therapy", "anxiety", "mindfulness", "wellbeing"],
    },
    Theme {
        population: "patients with stroke",
        interventions: ["constraint induced therapy", "robotic gait training"],
        outcomes: ["motor function", "upper limb function"],
        words: ["stroke", "motor", "limb", "hemiparesis", "rehabilitation", "robotic"],
    },
    Theme {
        population: "adults with type 2 diabetes",
        interventions: ["metformin", "lifestyle coaching"],
        outcomes: ["hba1c", "body weight"],
        words: ["diabetes", "glucose", "insulin", "glycaemic", "metformin", "weight"],
    },
];

const AUTHORS: [&str; 8] = ["Lee J", "Garcia M", "Okafor C", "Nguyen T", "Smith A", "Rossi F", "Kim H", "Patel R"];
const VENUES: [&str; 4] = ["Trials", "BMJ Open", "Lancet", "JAMA"];

/// Seeded records drawn from five themes with distinctive vocabulary.
pub fn corpus(n: usize, seed: u64) -> Vec<StudyRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let t = &THEMES[i % THEMES.len()];
            let pick = |rng: &mut ChaCha8Rng| *t.words.choose(rng).unwrap();
            let intervention = t.interventions[rng.gen_range(0..2)];
            let outcome = t.outcomes[rng.gen_range(0..2)];
            let title = format!(
                "{} and {} for {} {}: a randomized controlled trial {i}",
                intervention,
                pick(&mut rng),
                pick(&mut rng),
                t.population
            );
            let abstract_text = format!(
                "We enrolled {} {}. Participants received {} targeting {} and {}. \
                 The control group received usual care. The primary outcome was {} measured at 12 weeks. \
                 {} improved {} and {} compared with control.",
                rng.gen_range(40..400),
                t.population,
                intervention,
                pick(&mut rng),
                pick(&mut rng),
                outcome,
                intervention,
                outcome,
                pick(&mut rng)
            );
            let mut r = StudyRecord::new(format!("r{i:03}"), title)
                .with_abstract(abstract_text)
                .with_year(rng.gen_range(2012..2024));
            r.interventions = Some(vec![intervention.into()]);
            r.outcomes = Some(vec![outcome.into()]);
            r.authors = vec![AUTHORS.choose(&mut rng).unwrap().to_string()];
            r.venue = Some(VENUES.choose(&mut rng).unwrap().to_string());
            r
        })
        .collect()
}

/// Records that share no theme vocabulary with [`corpus`].
pub fn off_topic(n: usize, seed: u64) -> Vec<StudyRecord> {
    const WORDS: [&str; 12] = [
        "lichen", "glacier", "basalt", "tectonic", "moraine", "sediment", "permafrost", "fjord", "tundra",
        "aquifer", "dune", "loess",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let words: Vec<&str> = (0..8).map(|_| *WORDS.choose(&mut rng).unwrap()).collect();
            StudyRecord::new(format!("x{i:03}"), format!("{} survey {i}", words[..3].join(" ")))
                .with_abstract(format!("{}.", words.join(" ")))
                .with_year(2023)
        })
        .collect()
}

pub fn screener() -> SequenceModel {
    static MODEL: OnceLock<SequenceModel> = OnceLock::new();
    MODEL.get_or_init(|| bootstrap_screener(&Config::default()).unwrap()).clone()
}

pub fn config() -> Config {
    let mut c = Config::default();
    c.providers.embedding = evidesk_service::config::EmbeddingProvider::HashedLocal { dims: 256 };
    // The fixture's themes separate cleanly at this cutoff.
    c.topics.max_distance = 0.4;
    c
}

pub fn parts(config: &Config) -> Parts {
    Parts {
        embedder: Arc::new(HashedLocalEmbedder::new(config.embedding_dims()).unwrap()),
        llm: None,
        screener: screener(),
        lexicon: CueLexicon::default(),
    }
}

pub fn engine(config: Config) -> Engine {
    let parts = parts(&config);
    Engine::with_parts(config, parts).unwrap()
}
