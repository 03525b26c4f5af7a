use std::collections::BTreeMap;

use rand::Rng;

use super::schema::{PredId, PredicateKind, Schema};

/// Handle of a weight in the [`ParameterStore`]; several formulas may share one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WeightId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    pub name: String,
    /// Fixed initial value; `None` draws from the init distribution.
    pub init: Option<f64>,
    pub frozen: bool,
}

/// Shape of the learnable state of a model, before any values are drawn.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterTemplate {
    pub weights: Vec<WeightSpec>,
    pub latents: Vec<PredId>,
}

/// Symmetric uniform init ranges for weights and latent tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitRanges {
    pub weight: f64,
    pub latent: f64,
}

impl Default for InitRanges {
    fn default() -> Self {
        Self {
            weight: 0.1,
            latent: 1.0,
        }
    }
}

impl ParameterTemplate {
    pub fn weight_id(&self, name: &str) -> Option<WeightId> {
        self.weights
            .iter()
            .position(|w| w.name == name)
            .map(WeightId)
    }

    /// Draws a store. Weights with a fixed init keep it; the others are
    /// `U(-r, r)`. Latent tables are sized from the schema's populations.
    pub fn instantiate<R: Rng>(
        &self,
        schema: &Schema,
        ranges: InitRanges,
        rng: &mut R,
    ) -> ParameterStore {
        let weights = self
            .weights
            .iter()
            .map(|spec| Weight {
                name: spec.name.clone(),
                value: match spec.init {
                    Some(v) => v,
                    None => uniform(rng, ranges.weight),
                },
                frozen: spec.frozen,
            })
            .collect();
        let latents = self
            .latents
            .iter()
            .map(|&p| {
                let n = schema.grounding_count(p);
                (p, (0..n).map(|_| uniform(rng, ranges.latent)).collect())
            })
            .collect();
        ParameterStore {
            weights,
            latents,
            label_mean: 0.5,
        }
    }
}

fn uniform<R: Rng>(rng: &mut R, r: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        rng.random_range(-r..r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    pub name: String,
    pub value: f64,
    pub frozen: bool,
}

/// All learnable scalars of a model plus the training-label mean consumed by MIX.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore {
    pub weights: Vec<Weight>,
    pub latents: BTreeMap<PredId, Vec<f64>>,
    pub label_mean: f64,
}

impl ParameterStore {
    pub fn weight(&self, id: WeightId) -> f64 {
        self.weights[id.0].value
    }

    pub fn weight_id(&self, name: &str) -> Option<WeightId> {
        self.weights
            .iter()
            .position(|w| w.name == name)
            .map(WeightId)
    }

    pub fn latent(&self, pred: PredId) -> Option<&[f64]> {
        self.latents.get(&pred).map(Vec::as_slice)
    }

    /// Number of parameters that gradient descent may change.
    pub fn learnable_count(&self) -> usize {
        self.weights.iter().filter(|w| !w.frozen).count()
            + self.latents.values().map(Vec::len).sum::<usize>()
    }

    /// Checks that every latent table matches its predicate's grounding count.
    pub fn check_shapes(&self, schema: &Schema) -> Result<(), String> {
        for (p, table) in &self.latents {
            let decl = schema.pred(*p);
            if decl.kind != PredicateKind::Latent {
                return Err(format!("{} is not a latent predicate", decl.name));
            }
            let n = schema.grounding_count(*p);
            if table.len() != n {
                return Err(format!(
                    "latent table {} has {} entries, population needs {n}",
                    decl.name,
                    table.len()
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relcore::schema::{Population, PredicateDecl, ValueRange};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn instantiate_respects_fixed_inits_and_ranges() {
        let mut schema = Schema::new();
        let m = schema
            .add_population(Population::with_size("movie", 50))
            .unwrap();
        let n1 = schema
            .add_predicate(PredicateDecl {
                name: "N1".into(),
                args: vec![m],
                kind: PredicateKind::Latent,
                range: ValueRange::Real,
            })
            .unwrap();
        let t = ParameterTemplate {
            weights: vec![
                WeightSpec {
                    name: "a".into(),
                    init: Some(-4.5),
                    frozen: true,
                },
                WeightSpec {
                    name: "b".into(),
                    init: None,
                    frozen: false,
                },
            ],
            latents: vec![n1],
        };
        let store = t.instantiate(
            &schema,
            InitRanges::default(),
            &mut ChaCha8Rng::seed_from_u64(3),
        );
        assert_eq!(store.weights[0].value, -4.5);
        assert!(store.weights[1].value.abs() < 0.1);
        let table = store.latent(n1).unwrap();
        assert_eq!(table.len(), 50);
        assert!(table.iter().all(|v| v.abs() < 1.0));
        assert_eq!(store.learnable_count(), 51);
        store.check_shapes(&schema).unwrap();
    }
}
