use rand::Rng;

use super::{Dataset, Fact};
use crate::rng::substream;

/// Generator for the rule "a user is positive iff they like at least `p`
/// movies that have fewer than `q` likes in total". Half the movies are niche
/// (`niche_rate`), half popular (`popular_rate`); each user's rates are
/// scaled by an activity factor drawn from U(0.5, 1.5).
#[derive(Debug, Clone, PartialEq)]
pub struct NicheRule {
    pub users: usize,
    pub movies: usize,
    pub p: usize,
    pub q: usize,
    pub niche_rate: f64,
    pub popular_rate: f64,
    pub seed: u64,
}

impl Default for NicheRule {
    fn default() -> Self {
        Self {
            users: 200,
            movies: 30,
            p: 1,
            q: 20,
            niche_rate: 0.03,
            popular_rate: 0.3,
            seed: 0,
        }
    }
}

/// Populations `user` and `movie`, facts `Likes`, labels `Positive`.
pub fn niche_rule(cfg: &NicheRule) -> Dataset {
    let mut rng = substream(cfg.seed, "niche_rule");
    let rates: Vec<f64> = (0..cfg.movies)
        .map(|m| {
            if m % 2 == 0 {
                cfg.niche_rate
            } else {
                cfg.popular_rate
            }
        })
        .collect();
    let mut likes = vec![Vec::new(); cfg.users];
    let mut counts = vec![0usize; cfg.movies];
    for row in &mut likes {
        let activity: f64 = rng.random_range(0.5..1.5);
        for (m, &r) in rates.iter().enumerate() {
            if rng.random_bool((r * activity).min(1.0)) {
                row.push(m);
                counts[m] += 1;
            }
        }
    }

    let mut ds = Dataset::default();
    ds.populations.insert(
        "user".into(),
        (0..cfg.users).map(|u| u.to_string()).collect(),
    );
    ds.populations.insert(
        "movie".into(),
        (0..cfg.movies).map(|m| m.to_string()).collect(),
    );
    let facts = ds.facts.entry("Likes".into()).or_default();
    let labels = ds.labels.entry("Positive".into()).or_default();
    for (u, row) in likes.iter().enumerate() {
        for &m in row {
            facts.push(Fact::new(&[&u.to_string(), &m.to_string()], 1.0, None));
        }
        let niche = row.iter().filter(|&&m| counts[m] < cfg.q).count();
        let y = if niche >= cfg.p { 1.0 } else { 0.0 };
        labels.push(Fact {
            fields: vec![u.to_string(), format!("{y}")],
            line: 0,
        });
    }
    ds
}
