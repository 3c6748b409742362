//! The learner roster: BNC structure learners, their staged-tree refinements,
//! and the k-means naive staged tree.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bnc::{chow_liu_tan, greedy_cv_search, CvConfig, Family};
use crate::convert::dag_to_staged_tree;
use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::kmeans::{kmeans_naive_staging_with, KMeansConfig};
use crate::learn::{backward_hill_climb, fit_mle_with, ScoreConfig, ScoreKind};
use crate::schema::Dataset;
use crate::tree::{FittedClassifier, ModelMetadata};

/// How the BNC structure is found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Structure {
    /// Chow-Liu tree on conditional mutual information.
    TanCl,
    /// Greedy cross-validated search over forests.
    TanHc,
    /// Greedy cross-validated search over k-dependence structures.
    Kdb(usize),
}

impl Structure {
    fn suffix(self) -> String {
        match self {
            Structure::TanCl => "tan_cl".into(),
            Structure::TanHc => "tan_hc".into(),
            Structure::Kdb(k) => format!("{k}db"),
        }
    }

    fn parse_suffix(s: &str) -> Option<Self> {
        match s {
            "tan_cl" => Some(Structure::TanCl),
            "tan_hc" => Some(Structure::TanHc),
            _ => {
                let k: usize = s.strip_suffix("db")?.parse().ok()?;
                (k >= 1).then_some(Structure::Kdb(k))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Learner {
    /// The BNC itself, fitted as its equivalent staged tree.
    Bnc(Structure),
    /// The BNC's staged tree refined by backward hill-climbing.
    Sevt(Structure),
    /// Naive staged tree with stages found by k-means.
    NaiveKmeans,
}

impl Learner {
    /// The nine learners of the benchmark roster.
    pub const ROSTER: [Learner; 9] = [
        Learner::Sevt(Structure::TanCl),
        Learner::Sevt(Structure::TanHc),
        Learner::Sevt(Structure::Kdb(3)),
        Learner::Sevt(Structure::Kdb(5)),
        Learner::Bnc(Structure::TanCl),
        Learner::Bnc(Structure::TanHc),
        Learner::Bnc(Structure::Kdb(3)),
        Learner::Bnc(Structure::Kdb(5)),
        Learner::NaiveKmeans,
    ];

    pub fn id(&self) -> String {
        match self {
            Learner::Bnc(s) => format!("bnc_{}", s.suffix()),
            Learner::Sevt(s) => format!("sevt_{}", s.suffix()),
            Learner::NaiveKmeans => "sevt_kmeans_cmi".into(),
        }
    }

    /// Parses a comma-separated list; `all` expands to [`Learner::ROSTER`].
    pub fn parse_list(s: &str) -> Result<Vec<Learner>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                out.extend(Learner::ROSTER);
            } else {
                out.push(part.parse()?);
            }
        }
        if out.is_empty() {
            return Err(Error::Domain("no learners given".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for Learner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "sevt_kmeans_cmi" {
            return Ok(Learner::NaiveKmeans);
        }
        let parsed = if let Some(rest) = s.strip_prefix("bnc_") {
            Structure::parse_suffix(rest).map(Learner::Bnc)
        } else if let Some(rest) = s.strip_prefix("sevt_") {
            Structure::parse_suffix(rest).map(Learner::Sevt)
        } else {
            None
        };
        parsed.ok_or_else(|| Error::Domain(format!("unknown learner `{s}`")))
    }
}

impl Serialize for Learner {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.id())
    }
}

impl<'de> Deserialize<'de> for Learner {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Tuning shared by every learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerSettings {
    /// Additive smoothing for parameter estimates.
    pub smoothing: f64,
    /// Folds of the cross-validated structure searches.
    pub folds: usize,
    /// k-means restarts.
    pub restarts: usize,
    /// Score minimized by the staging search.
    pub score: ScoreKind,
}

impl Default for LearnerSettings {
    fn default() -> Self {
        LearnerSettings {
            smoothing: 1.0,
            folds: 5,
            restarts: 10,
            score: ScoreKind::Bic,
        }
    }
}

/// BNC structure over `data`'s features (on a possibly reordered schema).
pub fn learn_structure(structure: Structure, data: &Dataset, settings: &LearnerSettings, seed: u64) -> Result<Dag> {
    let cv = CvConfig {
        folds: settings.folds,
        seed,
        smoothing: settings.smoothing,
    };
    match structure {
        Structure::TanCl => chow_liu_tan(data),
        Structure::TanHc => greedy_cv_search(data, Family::Tan, &cv),
        Structure::Kdb(k) => greedy_cv_search(data, Family::Kdb(k), &cv),
    }
}

/// Learns a structure and fits its parameters on `train`. The returned model
/// may order the features differently from `train`; data for it should be
/// passed through [`Dataset::reorder_to`].
pub fn fit_learner(
    learner: Learner,
    train: &Dataset,
    settings: &LearnerSettings,
    seed: u64,
) -> Result<FittedClassifier> {
    let metadata = ModelMetadata {
        learner: learner.id(),
        seed: Some(seed),
    };
    match learner {
        Learner::NaiveKmeans => {
            let cfg = KMeansConfig {
                restarts: settings.restarts,
                smoothing: settings.smoothing,
                seed,
                ..KMeansConfig::default()
            };
            let tree = kmeans_naive_staging_with(train, &cfg)?;
            fit_mle_with(&tree, train, settings.smoothing, metadata)
        }
        Learner::Bnc(s) | Learner::Sevt(s) => {
            let dag = learn_structure(s, train, settings, seed)?;
            let data = train.reorder_to(dag.schema())?;
            let mut tree = dag_to_staged_tree(&dag)?;
            if matches!(learner, Learner::Sevt(_)) {
                let score = ScoreConfig {
                    kind: settings.score,
                    smoothing: settings.smoothing,
                };
                tree = backward_hill_climb(&tree, &data, &score)?;
            }
            fit_mle_with(&tree, &data, settings.smoothing, metadata)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_roundtrip() {
        let ids: Vec<String> = Learner::ROSTER.iter().map(Learner::id).collect();
        assert_eq!(
            ids,
            [
                "sevt_tan_cl",
                "sevt_tan_hc",
                "sevt_3db",
                "sevt_5db",
                "bnc_tan_cl",
                "bnc_tan_hc",
                "bnc_3db",
                "bnc_5db",
                "sevt_kmeans_cmi"
            ]
        );
        for l in Learner::ROSTER {
            assert_eq!(l.id().parse::<Learner>().unwrap(), l);
        }
        assert_eq!("bnc_2db".parse::<Learner>().unwrap(), Learner::Bnc(Structure::Kdb(2)));
        assert!("bnc_0db".parse::<Learner>().is_err());
        assert!("tan".parse::<Learner>().is_err());
        assert_eq!(Learner::parse_list("all").unwrap().len(), 9);
        assert_eq!(
            Learner::parse_list("bnc_tan_cl, sevt_kmeans_cmi").unwrap(),
            [Learner::Bnc(Structure::TanCl), Learner::NaiveKmeans]
        );
    }

    #[test]
    fn settings_json_defaults() {
        let s: LearnerSettings = serde_json::from_str(r#"{"folds": 3}"#).unwrap();
        assert_eq!(s.folds, 3);
        assert_eq!(s.restarts, 10);
        assert_eq!(s.score, ScoreKind::Bic);
    }
}
