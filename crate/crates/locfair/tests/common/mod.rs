//! Shared helpers for the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

const EDUCATION: &[(u32, &str)] = &[
    (5, "9th"),
    (7, "11th"),
    (9, "HS-grad"),
    (10, "Some-college"),
    (11, "Assoc-voc"),
    (12, "Assoc-acdm"),
    (13, "Bachelors"),
    (14, "Masters"),
    (15, "Prof-school"),
    (16, "Doctorate"),
];

fn pick<'a>(rng: &mut StdRng, items: &[(&'a str, f64)]) -> &'a str {
    let total: f64 = items.iter().map(|i| i.1).sum();
    let mut u = rng.random::<f64>() * total;
    for &(name, w) in items {
        if u < w {
            return name;
        }
        u -= w;
    }
    items[items.len() - 1].0
}

/// Census-style rows in the layout of UCI `adult.data` (no header, `, `
/// separators, 15 columns). Income depends on a latent skill, marital
/// status and, directly, on sex, so a plain classifier picks up a gender
/// gap. About 1% of rows carry a `?` and are dropped on load.
pub fn adult_format_csv(n: usize, seed: u64) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = String::new();
    for _ in 0..n {
        let male = rng.random::<f64>() < 0.67;
        let skill: f64 = StandardNormal.sample(&mut rng);
        let noise = |rng: &mut StdRng| -> f64 { StandardNormal.sample(rng) };
        let age = (38.0 + 12.0 * noise(&mut rng)).clamp(17.0, 80.0).round() as u32;
        let edu_pos = ((skill + 0.5 * noise(&mut rng)) * 2.2 + 3.5).round().clamp(0.0, 9.0) as usize;
        let (edu_num, education) = EDUCATION[edu_pos];
        let married = rng.random::<f64>() < if age < 25 { 0.15 } else { 0.55 };
        let marital = if married {
            "Married-civ-spouse"
        } else {
            pick(&mut rng, &[("Never-married", 0.6), ("Divorced", 0.3), ("Widowed", 0.1)])
        };
        let relationship = match (married, male) {
            (true, true) => "Husband",
            (true, false) => "Wife",
            _ if age < 25 => "Own-child",
            _ => pick(&mut rng, &[("Not-in-family", 0.6), ("Unmarried", 0.4)]),
        };
        let occupation = if skill > 0.8 {
            pick(&mut rng, &[("Exec-managerial", 0.5), ("Prof-specialty", 0.5)])
        } else if male {
            pick(
                &mut rng,
                &[("Craft-repair", 0.4), ("Machine-op-inspct", 0.3), ("Sales", 0.3)],
            )
        } else {
            pick(
                &mut rng,
                &[("Adm-clerical", 0.5), ("Other-service", 0.3), ("Sales", 0.2)],
            )
        };
        let workclass = if rng.random::<f64>() < 0.01 {
            "?"
        } else {
            pick(
                &mut rng,
                &[
                    ("Private", 0.7),
                    ("Self-emp-not-inc", 0.1),
                    ("Local-gov", 0.1),
                    ("State-gov", 0.05),
                    ("Federal-gov", 0.05),
                ],
            )
        };
        let race = pick(
            &mut rng,
            &[("White", 0.85), ("Black", 0.1), ("Asian-Pac-Islander", 0.05)],
        );
        let country = pick(
            &mut rng,
            &[
                ("United-States", 0.9),
                ("Mexico", 0.04),
                ("India", 0.03),
                ("Germany", 0.03),
            ],
        );
        let fnlwgt = (190_000.0 + 100_000.0 * noise(&mut rng)).max(20_000.0).round() as u32;
        let hours = (40.0 + 5.0 * skill + if male { 4.0 } else { 0.0 } + 6.0 * noise(&mut rng))
            .clamp(10.0, 80.0)
            .round() as u32;
        let gain = if rng.random::<f64>() < 0.04 + 0.04 * skill.max(0.0) {
            (3000.0 + 4000.0 * rng.random::<f64>()).round() as u32
        } else {
            0
        };
        let loss = if rng.random::<f64>() < 0.04 { 1900 } else { 0 };
        let score = 1.1 * skill
            + if male { 1.0 } else { 0.0 }
            + if married { 0.6 } else { 0.0 }
            + 0.02 * (age as f64 - 38.0)
            + 0.8 * noise(&mut rng);
        let income = if score > 2.0 { ">50K" } else { "<=50K" };
        let sex = if male { "Male" } else { "Female" };
        let _ = writeln!(
            out,
            "{age}, {workclass}, {fnlwgt}, {education}, {edu_num}, {marital}, {occupation}, {relationship}, {race}, {sex}, {gain}, {loss}, {hours}, {country}, {income}"
        );
    }
    out
}

pub fn write_adult_format(path: &Path, n: usize, seed: u64) {
    std::fs::write(path, adult_format_csv(n, seed)).unwrap();
}

/// CSV text with `#` comment lines removed.
pub fn strip_comments(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}
