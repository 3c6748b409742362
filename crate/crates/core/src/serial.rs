//! JSON documents for models, bare stagings, and DAGs.
//!
//! A model document has the fields `schema`, `staging` (one object per
//! depth mapping a context code string such as `"1,0"` to a stage id such as
//! `"2:0"`; the root context is `""`), `params` (stage id to probability
//! array), `smoothing` and `metadata`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::schema::{CategoricalSchema, Variable};
use crate::tree::{FittedClassifier, ModelMetadata, StageId, StageParameters, StagedTree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDoc {
    pub name: String,
    pub cardinality: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaDoc {
    pub variables: Vec<VariableDoc>,
}

impl SchemaDoc {
    pub fn from_schema(schema: &CategoricalSchema) -> Self {
        SchemaDoc {
            variables: schema
                .variables()
                .iter()
                .map(|v| VariableDoc {
                    name: v.name.clone(),
                    cardinality: v.cardinality(),
                    levels: Some(v.levels.clone()),
                })
                .collect(),
        }
    }

    pub fn to_schema(&self) -> Result<CategoricalSchema> {
        let vars = self
            .variables
            .iter()
            .map(|v| match &v.levels {
                Some(l) if l.len() != v.cardinality => Err(Error::Document(format!(
                    "variable `{}` lists {} levels but cardinality {}",
                    v.name,
                    l.len(),
                    v.cardinality
                ))),
                Some(l) => Ok(Variable::with_levels(v.name.clone(), l.clone())),
                None => Ok(Variable::new(v.name.clone(), v.cardinality)),
            })
            .collect::<Result<Vec<_>>>()?;
        CategoricalSchema::new(vars)
    }
}

type StagingDoc = Vec<BTreeMap<String, String>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema: SchemaDoc,
    pub staging: StagingDoc,
    pub params: BTreeMap<String, Vec<f64>>,
    pub smoothing: f64,
    #[serde(default)]
    pub metadata: ModelMetadata,
}

/// A staging without parameters, e.g. the staged tree of a DAG.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeDocument {
    pub schema: SchemaDoc,
    pub staging: StagingDoc,
}

/// A DAG as a map from each variable to its parents' names. The schema's
/// variable order must be topological.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DagDocument {
    pub schema: SchemaDoc,
    pub parents: BTreeMap<String, Vec<String>>,
}

fn context_key(codes: &[usize]) -> String {
    codes.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn parse_context(key: &str) -> Result<Vec<usize>> {
    if key.is_empty() {
        return Ok(Vec::new());
    }
    key.split(',')
        .map(|c| {
            c.trim()
                .parse()
                .map_err(|_| Error::Document(format!("bad context `{key}`")))
        })
        .collect()
}

fn staging_doc(tree: &StagedTree) -> StagingDoc {
    let schema = tree.schema();
    (0..tree.depths())
        .map(|d| {
            tree.labels(d)
                .iter()
                .enumerate()
                .map(|(ctx, &l)| {
                    let id = StageId { depth: d, index: l };
                    (context_key(&schema.context_codes(d, ctx)), id.to_string())
                })
                .collect()
        })
        .collect()
}

fn tree_from_doc(
    schema: Arc<CategoricalSchema>,
    staging: &StagingDoc,
) -> Result<(StagedTree, Vec<BTreeMap<String, u32>>)> {
    if staging.len() != schema.n_vars() {
        return Err(Error::Document(format!(
            "staging has {} depths for {} variables",
            staging.len(),
            schema.n_vars()
        )));
    }
    let mut labels = Vec::with_capacity(staging.len());
    for (d, map) in staging.iter().enumerate() {
        let count = schema.vertex_count(d).ok_or(Error::TreeTooLarge(usize::MAX))?;
        if map.len() != count {
            return Err(Error::Document(format!(
                "depth {d} lists {} of {count} contexts",
                map.len()
            )));
        }
        let mut depth_labels = vec![u32::MAX; count];
        for (key, id) in map {
            let codes = parse_context(key)?;
            if codes.len() != d {
                return Err(Error::Document(format!("context `{key}` at depth {d}")));
            }
            for (i, &c) in codes.iter().enumerate() {
                schema.check_code(i, c)?;
            }
            let id: StageId = id.parse()?;
            if id.depth != d {
                return Err(Error::Document(format!("stage {id} listed at depth {d}")));
            }
            depth_labels[schema.context_index(&codes)] = id.index;
        }
        labels.push(depth_labels);
    }
    // remember the document's own ids so params can be matched after canonicalization
    let mut doc_ids = Vec::with_capacity(labels.len());
    let tree = StagedTree::from_labels(schema, labels.clone())?;
    for (d, l) in labels.iter().enumerate() {
        let mut m = BTreeMap::new();
        for (ctx, &raw) in l.iter().enumerate() {
            m.entry(StageId { depth: d, index: raw }.to_string())
                .or_insert(tree.labels(d)[ctx]);
        }
        doc_ids.push(m);
    }
    Ok((tree, doc_ids))
}

impl ModelDocument {
    pub fn from_model(model: &FittedClassifier) -> Self {
        let tree = model.tree();
        let params = tree
            .stage_ids()
            .map(|id| (id.to_string(), model.params().get(id).to_vec()))
            .collect();
        ModelDocument {
            schema: SchemaDoc::from_schema(tree.schema()),
            staging: staging_doc(tree),
            params,
            smoothing: model.smoothing(),
            metadata: model.metadata().clone(),
        }
    }

    pub fn into_model(self) -> Result<FittedClassifier> {
        let schema = Arc::new(self.schema.to_schema()?);
        let (tree, doc_ids) = tree_from_doc(schema, &self.staging)?;
        let mut by_canonical: BTreeMap<StageId, &Vec<f64>> = BTreeMap::new();
        for (d, ids) in doc_ids.iter().enumerate() {
            for (raw, &canon) in ids {
                let v = self
                    .params
                    .get(raw)
                    .ok_or_else(|| Error::Document(format!("no parameters for stage {raw}")))?;
                by_canonical.insert(StageId { depth: d, index: canon }, v);
            }
        }
        let params = StageParameters::from_fn(&tree, |id| by_canonical[&id].clone())?;
        FittedClassifier::new(tree, params, self.smoothing, self.metadata)
    }
}

impl TreeDocument {
    pub fn from_tree(tree: &StagedTree) -> Self {
        TreeDocument {
            schema: SchemaDoc::from_schema(tree.schema()),
            staging: staging_doc(tree),
        }
    }

    pub fn into_tree(self) -> Result<StagedTree> {
        let schema = Arc::new(self.schema.to_schema()?);
        Ok(tree_from_doc(schema, &self.staging)?.0)
    }
}

impl DagDocument {
    pub fn from_dag(dag: &Dag) -> Self {
        let schema = dag.schema();
        let parents = (0..schema.n_vars())
            .map(|v| {
                (
                    schema.variable(v).name.clone(),
                    dag.parents(v)
                        .iter()
                        .map(|&p| schema.variable(p).name.clone())
                        .collect(),
                )
            })
            .collect();
        DagDocument {
            schema: SchemaDoc::from_schema(schema),
            parents,
        }
    }

    /// Parent lists need not follow the schema order; variables are
    /// reordered topologically if necessary.
    pub fn into_dag(self) -> Result<Dag> {
        let schema = Arc::new(self.schema.to_schema()?);
        let mut sets = vec![BTreeSet::new(); schema.n_vars()];
        for (child, ps) in &self.parents {
            let c = schema
                .index_of(child)
                .ok_or_else(|| Error::Document(format!("unknown variable `{child}`")))?;
            for p in ps {
                let pi = schema
                    .index_of(p)
                    .ok_or_else(|| Error::Document(format!("unknown parent `{p}`")))?;
                sets[c].insert(pi);
            }
        }
        Dag::from_unordered(&schema, &sets)
    }
}

/// Any of the documents `convert` understands.
#[derive(Debug, Clone)]
pub enum Artifact {
    Model(Box<FittedClassifier>),
    Tree(StagedTree),
    Dag(Dag),
}

pub fn read_artifact(text: &str) -> Result<Artifact> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("parents").is_some() {
        let doc: DagDocument = serde_json::from_value(value)?;
        Ok(Artifact::Dag(doc.into_dag()?))
    } else if value.get("params").is_some() {
        let doc: ModelDocument = serde_json::from_value(value)?;
        Ok(Artifact::Model(Box::new(doc.into_model()?)))
    } else if value.get("staging").is_some() {
        let doc: TreeDocument = serde_json::from_value(value)?;
        Ok(Artifact::Tree(doc.into_tree()?))
    } else {
        Err(Error::Document("expected a model, staging, or DAG document".into()))
    }
}

pub fn model_to_json(model: &FittedClassifier) -> String {
    serde_json::to_string_pretty(&ModelDocument::from_model(model)).expect("model documents serialize")
}

pub fn model_from_json(text: &str) -> Result<FittedClassifier> {
    serde_json::from_str::<ModelDocument>(text)?.into_model()
}

pub fn write_model(model: &FittedClassifier, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(model))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<FittedClassifier> {
    model_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::full_tree;
    use proptest::prelude::*;

    fn fitted(cards: &[usize], weights: &[f64]) -> FittedClassifier {
        let s = Arc::new(CategoricalSchema::from_cardinalities(cards).unwrap());
        let t = full_tree(s)
            .unwrap()
            .merge(StageId { depth: 1, index: 0 }, StageId { depth: 1, index: 1 })
            .unwrap();
        let mut k = 0;
        let params = StageParameters::from_fn(&t, |id| {
            let c = cards[id.depth];
            let raw: Vec<f64> = (0..c)
                .map(|_| {
                    k += 1;
                    weights[k % weights.len()]
                })
                .collect();
            let z: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / z).collect()
        })
        .unwrap();
        FittedClassifier::new(
            t,
            params,
            0.5,
            ModelMetadata {
                learner: "test".into(),
                seed: Some(3),
            },
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn model_roundtrip(weights in proptest::collection::vec(0.01f64..10.0, 1..12)) {
            let m = fitted(&[3, 2, 3], &weights);
            let back = model_from_json(&model_to_json(&m)).unwrap();
            prop_assert_eq!(back.tree(), m.tree());
            for id in m.tree().stage_ids() {
                for (a, b) in back.params().get(id).iter().zip(m.params().get(id)) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
            }
            prop_assert_eq!(back.metadata(), m.metadata());
            prop_assert_eq!(model_to_json(&back), model_to_json(&m));
        }
    }

    #[test]
    fn root_context_key_is_empty() {
        let m = fitted(&[2, 2], &[1.0, 2.0]);
        let doc = ModelDocument::from_model(&m);
        assert_eq!(doc.staging[0].keys().collect::<Vec<_>>(), [""]);
        assert!(doc.staging[1].contains_key("1"));
    }

    #[test]
    fn missing_params_rejected() {
        let m = fitted(&[2, 2], &[1.0]);
        let mut doc = ModelDocument::from_model(&m);
        doc.params.remove("1:0");
        assert!(doc.into_model().is_err());
    }

    #[test]
    fn dag_document_roundtrip() {
        let s = Arc::new(CategoricalSchema::from_cardinalities(&[2, 2, 2]).unwrap());
        let g = Dag::new(s, vec![vec![], vec![0], vec![0, 1]]).unwrap();
        let text = serde_json::to_string(&DagDocument::from_dag(&g)).unwrap();
        match read_artifact(&text).unwrap() {
            Artifact::Dag(back) => assert_eq!(back, g),
            other => panic!("unexpected {other:?}"),
        }
    }
}
