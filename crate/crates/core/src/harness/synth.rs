//! Synthetic hospital-quality table with functional dependencies between
//! attributes.
//!
//! Rows are (hospital, measure) pairs. Hospital attributes are fixed per
//! hospital, measure attributes per measure, and zip codes belong to a
//! single city, so `zip -> city`, `provider_number -> hospital_name` and
//! `measure_code -> measure_name` hold on the clean table.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Schema};
use crate::error::{Error, Result};

pub const HOSPITAL_ATTRIBUTES: [&str; 15] = [
    "provider_number",
    "hospital_name",
    "address",
    "city",
    "state",
    "zip",
    "county",
    "phone",
    "hospital_type",
    "owner",
    "emergency_service",
    "condition",
    "measure_code",
    "measure_name",
    "state_avg",
];

/// Constraints that hold on the clean table.
pub const HOSPITAL_CONSTRAINTS: &str = "\
t1&t2: t1.zip=t2.zip & t1.city!=t2.city
t1&t2: t1.provider_number=t2.provider_number & t1.hospital_name!=t2.hospital_name
t1&t2: t1.measure_code=t2.measure_code & t1.measure_name!=t2.measure_name
";

const CITIES: [(&str, &str, &str); 16] = [
    ("birmingham", "al", "jefferson"),
    ("montgomery", "al", "montgomery"),
    ("huntsville", "al", "madison"),
    ("mobile", "al", "mobile"),
    ("dothan", "al", "houston"),
    ("tuscaloosa", "al", "tuscaloosa"),
    ("anniston", "al", "calhoun"),
    ("florence", "al", "lauderdale"),
    ("gadsden", "al", "etowah"),
    ("auburn", "al", "lee"),
    ("chicago", "il", "cook"),
    ("springfield", "il", "sangamon"),
    ("peoria", "il", "peoria"),
    ("madison", "wi", "dane"),
    ("milwaukee", "wi", "milwaukee"),
    ("green bay", "wi", "brown"),
];

const NAME_WORDS: [&str; 14] = [
    "regional",
    "memorial",
    "community",
    "general",
    "baptist",
    "university",
    "county",
    "st vincents",
    "providence",
    "mercy",
    "southeast",
    "northwest",
    "medical",
    "valley",
];

const NAME_SUFFIXES: [&str; 4] = ["medical center", "hospital", "health system", "medical center inc"];

const STREETS: [&str; 12] = [
    "main st",
    "university blvd",
    "medical park dr",
    "highway 31",
    "hospital dr",
    "oak ave",
    "church st",
    "college st",
    "washington ave",
    "lakeshore dr",
    "park pl",
    "river rd",
];

const TYPES: [&str; 3] = ["acute care hospitals", "critical access hospitals", "childrens"];

const OWNERS: [&str; 6] = [
    "voluntary non-profit - private",
    "voluntary non-profit - church",
    "government - hospital district or authority",
    "government - local",
    "proprietary",
    "voluntary non-profit - other",
];

const MEASURES: [(&str, &str, &str); 20] = [
    (
        "ami-1",
        "heart attack",
        "heart attack patients given aspirin at arrival",
    ),
    (
        "ami-2",
        "heart attack",
        "heart attack patients given aspirin at discharge",
    ),
    (
        "ami-3",
        "heart attack",
        "heart attack patients given ace inhibitor for lvsd",
    ),
    (
        "ami-4",
        "heart attack",
        "heart attack patients given smoking cessation advice",
    ),
    (
        "ami-5",
        "heart attack",
        "heart attack patients given beta blocker at discharge",
    ),
    (
        "ami-7a",
        "heart attack",
        "heart attack patients given fibrinolytic medication",
    ),
    (
        "hf-1",
        "heart failure",
        "heart failure patients given discharge instructions",
    ),
    (
        "hf-2",
        "heart failure",
        "heart failure patients given an evaluation of lvs function",
    ),
    (
        "hf-3",
        "heart failure",
        "heart failure patients given ace inhibitor or arb for lvsd",
    ),
    (
        "hf-4",
        "heart failure",
        "heart failure patients given smoking cessation advice",
    ),
    (
        "pn-2",
        "pneumonia",
        "pneumonia patients assessed and given pneumococcal vaccination",
    ),
    (
        "pn-3b",
        "pneumonia",
        "pneumonia patients whose initial er blood culture was performed",
    ),
    ("pn-4", "pneumonia", "pneumonia patients given smoking cessation advice"),
    (
        "pn-5c",
        "pneumonia",
        "pneumonia patients given initial antibiotic within 6 hours",
    ),
    (
        "pn-6",
        "pneumonia",
        "pneumonia patients given the most appropriate initial antibiotic",
    ),
    (
        "scip-card-2",
        "surgical infection prevention",
        "surgery patients on beta blocker therapy",
    ),
    (
        "scip-inf-1",
        "surgical infection prevention",
        "prophylactic antibiotic received within one hour",
    ),
    (
        "scip-inf-2",
        "surgical infection prevention",
        "prophylactic antibiotic selection for surgical patients",
    ),
    (
        "scip-inf-3",
        "surgical infection prevention",
        "prophylactic antibiotics discontinued within 24 hours",
    ),
    (
        "scip-inf-4",
        "surgical infection prevention",
        "cardiac surgery patients with controlled postoperative glucose",
    ),
];

#[derive(Clone, Debug, PartialEq)]
pub struct HospitalSpec {
    pub tuples: usize,
    pub hospitals: usize,
    pub seed: u64,
}

impl Default for HospitalSpec {
    fn default() -> Self {
        HospitalSpec {
            tuples: 1000,
            hospitals: 50,
            seed: 0,
        }
    }
}

struct Hospital {
    values: [String; 11],
}

fn digits<R: Rng>(rng: &mut R, n: usize) -> String {
    (0..n).map(|_| char::from(b'0' + rng.gen_range(0..10u8))).collect()
}

/// Generates the clean table.
pub fn hospital(spec: &HospitalSpec) -> Result<Dataset> {
    if spec.tuples == 0 || spec.hospitals == 0 {
        return Err(Error::Config(
            "hospital table needs at least one tuple and one hospital".into(),
        ));
    }
    let distinct_names = CITIES.len() * NAME_WORDS.len() * NAME_SUFFIXES.len();
    if spec.hospitals > distinct_names / 2 {
        return Err(Error::Config(format!(
            "at most {} hospitals are supported",
            distinct_names / 2
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // two zips per city, disjoint across cities
    let mut zips: Vec<Vec<String>> = Vec::new();
    let mut used = std::collections::HashSet::new();
    for (i, _) in CITIES.iter().enumerate() {
        let mut z = Vec::new();
        while z.len() < 2 {
            let code = format!("{}{}", 35 + i % 10, digits(&mut rng, 3));
            if used.insert(code.clone()) {
                z.push(code);
            }
        }
        zips.push(z);
    }

    let mut names = std::collections::HashSet::new();
    let hospitals: Vec<Hospital> = (0..spec.hospitals)
        .map(|h| {
            let (c, name) = loop {
                let c = rng.gen_range(0..CITIES.len());
                let candidate = format!(
                    "{} {} {}",
                    CITIES[c].0,
                    NAME_WORDS.choose(&mut rng).unwrap(),
                    NAME_SUFFIXES.choose(&mut rng).unwrap()
                );
                if names.insert(candidate.clone()) {
                    break (c, candidate);
                }
            };
            let (city, state, county) = CITIES[c];
            Hospital {
                values: [
                    format!("{}", 10001 + h * 7),
                    name,
                    format!("{} {}", rng.gen_range(100..4000), STREETS.choose(&mut rng).unwrap()),
                    city.to_string(),
                    state.to_string(),
                    zips[c].choose(&mut rng).unwrap().clone(),
                    county.to_string(),
                    format!("{}{}", 205 + c, digits(&mut rng, 7)),
                    TYPES.choose(&mut rng).unwrap().to_string(),
                    OWNERS.choose(&mut rng).unwrap().to_string(),
                    if rng.gen_bool(0.8) { "yes" } else { "no" }.to_string(),
                ],
            }
        })
        .collect();

    let mut rows = Vec::with_capacity(spec.tuples);
    for t in 0..spec.tuples {
        let h = &hospitals[t % spec.hospitals];
        let (code, condition, name) = MEASURES[(t / spec.hospitals) % MEASURES.len()];
        let mut row: Vec<String> = h.values.to_vec();
        row.push(condition.to_string());
        row.push(code.to_string());
        row.push(name.to_string());
        row.push(format!("{}_{}", h.values[4], code));
        rows.push(row);
    }
    let schema = Schema::new(HOSPITAL_ATTRIBUTES)?;
    Dataset::new("hospital", schema, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{count_violations, parse_constraints};

    #[test]
    fn clean_table_satisfies_its_constraints() {
        let ds = hospital(&HospitalSpec::default()).unwrap();
        assert_eq!((ds.num_tuples(), ds.num_attributes()), (1000, 15));
        let dcs = parse_constraints(HOSPITAL_CONSTRAINTS, ds.schema()).unwrap();
        assert_eq!(dcs.len(), 3);
        assert!(count_violations(&ds, &dcs).iter().flatten().all(|&c| c == 0));
    }

    #[test]
    fn deterministic() {
        let a = hospital(&HospitalSpec::default()).unwrap();
        let b = hospital(&HospitalSpec::default()).unwrap();
        assert_eq!(a, b);
    }
}
