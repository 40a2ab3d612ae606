//! Built-in benchmark problems.

mod box_pushing;
mod dec_tiger;
mod firefighting;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DecPomdp;

pub use box_pushing::BOX_PUSHING_MODEL;

/// A benchmark name with generator parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub name: String,
    pub params: BTreeMap<String, usize>,
}

impl BenchmarkSpec {
    /// The named benchmark with its default parameters.
    pub fn named(name: &str) -> Result<Self> {
        let params: &[(&str, usize)] = match name {
            "dec-tiger" | "box-pushing" => &[("agents", 2)],
            "firefighting" => &[("agents", 2), ("houses", 4), ("fire_levels", 3)],
            "firefighting-modified" => &[("agents", 2), ("houses", 4), ("fire_levels", 4)],
            _ => return Err(Error::UnknownBenchmark(name.to_string())),
        };
        Ok(BenchmarkSpec {
            name: name.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        })
    }

    /// Overrides one parameter. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: usize) -> Result<()> {
        match self.params.get_mut(key) {
            Some(v) => {
                *v = value;
                Ok(())
            }
            None => Err(Error::InvalidConfig(format!(
                "benchmark `{}` has no parameter `{key}`",
                self.name
            ))),
        }
    }

    fn param(&self, key: &str) -> usize {
        self.params[key]
    }

    fn check(&self) -> Result<()> {
        if self.param("agents") != 2 {
            return Err(Error::InvalidConfig(format!(
                "`{}` supports exactly 2 agents",
                self.name
            )));
        }
        if let Some(&h) = self.params.get("houses") {
            if h < 2 {
                return Err(Error::InvalidConfig("houses must be at least 2".into()));
            }
        }
        if let Some(&f) = self.params.get("fire_levels") {
            if f < 2 {
                return Err(Error::InvalidConfig(
                    "fire_levels must be at least 2".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Listing entry for [`list_benchmarks`].
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkInfo {
    pub spec: BenchmarkSpec,
    pub description: &'static str,
}

/// All benchmarks, alphabetically.
pub fn list_benchmarks() -> Vec<BenchmarkInfo> {
    let entries = [
        (
            "box-pushing",
            "Cooperative Box Pushing: two agents in a corridor below two small boxes and one large box",
        ),
        (
            "dec-tiger",
            "Decentralized tiger: two agents listen or open one of two doors",
        ),
        (
            "firefighting",
            "Firefighting: two agents choose houses to fight fires, observing flames noisily",
        ),
        (
            "firefighting-modified",
            "Firefighting where each agent observes the resulting fire level of its house",
        ),
    ];
    entries
        .into_iter()
        .map(|(name, description)| BenchmarkInfo {
            spec: BenchmarkSpec::named(name).expect("listed benchmarks exist"),
            description,
        })
        .collect()
}

/// Builds the model for `spec`.
pub fn build(spec: &BenchmarkSpec) -> Result<DecPomdp> {
    let known = BenchmarkSpec::named(&spec.name)?;
    if let Some(k) = spec.params.keys().find(|k| !known.params.contains_key(*k)) {
        return Err(Error::InvalidConfig(format!(
            "benchmark `{}` has no parameter `{k}`",
            spec.name
        )));
    }
    let mut spec = spec.clone();
    for (k, v) in known.params {
        spec.params.entry(k).or_insert(v);
    }
    spec.check()?;
    match spec.name.as_str() {
        "dec-tiger" => dec_tiger::build(),
        "firefighting" => {
            firefighting::build(spec.param("houses"), spec.param("fire_levels"), false)
        }
        "firefighting-modified" => {
            firefighting::build(spec.param("houses"), spec.param("fire_levels"), true)
        }
        "box-pushing" => box_pushing::build(),
        other => Err(Error::UnknownBenchmark(other.to_string())),
    }
}

/// Builds a benchmark by name with default parameters.
pub fn build_named(name: &str) -> Result<DecPomdp> {
    build(&BenchmarkSpec::named(name)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_is_sorted_and_builds() {
        let names: Vec<_> = list_benchmarks().into_iter().map(|b| b.spec.name).collect();
        assert_eq!(
            names,
            [
                "box-pushing",
                "dec-tiger",
                "firefighting",
                "firefighting-modified"
            ]
        );
        for info in list_benchmarks() {
            build(&info.spec).unwrap();
        }
    }

    #[test]
    fn unknown_names_and_params() {
        assert!(matches!(
            build_named("tiger"),
            Err(Error::UnknownBenchmark(_))
        ));
        let mut spec = BenchmarkSpec::named("dec-tiger").unwrap();
        assert!(spec.set("houses", 3).is_err());
        let mut spec = BenchmarkSpec::named("firefighting").unwrap();
        spec.set("houses", 1).unwrap();
        assert!(build(&spec).is_err());
    }
}
