#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use sevt::simgen::uniform_simplex;
use sevt::tree::ModelMetadata;
use sevt::{CategoricalSchema, Dag, FittedClassifier, StageParameters, StagedTree, Variable};

pub fn schema(cards: &[usize]) -> Arc<CategoricalSchema> {
    Arc::new(CategoricalSchema::from_cardinalities(cards).unwrap())
}

/// Every assignment of `cards`, first variable most significant.
pub fn all_rows(cards: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &c in cards {
        out = out
            .into_iter()
            .flat_map(|r| {
                (0..c).map(move |x| {
                    let mut r = r.clone();
                    r.push(x);
                    r
                })
            })
            .collect();
    }
    out
}

/// Topological order (smallest available label first) of a parent-set
/// graph, or `None` if it has a cycle.
pub fn topo_order(parents: &[BTreeSet<usize>]) -> Option<Vec<usize>> {
    let n = parents.len();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n).find(|&v| !placed[v] && parents[v].iter().all(|&p| placed[p]))?;
        placed[next] = true;
        order.push(next);
    }
    Some(order)
}

/// A DAG on variables `V0..` with the given cardinalities and arbitrary
/// labelled parent sets, laid out on a schema in topological order.
pub fn dag_from_labelled(cards: &[usize], parents: &[BTreeSet<usize>]) -> Dag {
    let order = topo_order(parents).expect("acyclic");
    let pos: Vec<usize> = {
        let mut p = vec![0; order.len()];
        for (i, &v) in order.iter().enumerate() {
            p[v] = i;
        }
        p
    };
    let vars = order
        .iter()
        .map(|&v| Variable::new(format!("V{v}"), cards[v]))
        .collect();
    let s = Arc::new(CategoricalSchema::new(vars).unwrap());
    let ps = order
        .iter()
        .map(|&v| {
            let mut q: Vec<usize> = parents[v].iter().map(|&u| pos[u]).collect();
            q.sort_unstable();
            q
        })
        .collect();
    Dag::new(s, ps).unwrap()
}

/// All labelled DAGs on `n` nodes, each as parent sets.
pub fn all_dags(n: usize) -> Vec<Vec<BTreeSet<usize>>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut out = Vec::new();
    let total = 3usize.pow(pairs.len() as u32);
    for mut code in 0..total {
        let mut ps = vec![BTreeSet::new(); n];
        for &(i, j) in &pairs {
            match code % 3 {
                1 => {
                    ps[j].insert(i);
                }
                2 => {
                    ps[i].insert(j);
                }
                _ => {}
            }
            code /= 3;
        }
        if topo_order(&ps).is_some() {
            out.push(ps);
        }
    }
    out
}

/// A random DAG on `n` labelled nodes: random order, each earlier node a
/// parent with probability 1/2.
pub fn random_dag(cards: &[usize], rng: &mut impl Rng) -> Dag {
    let n = cards.len();
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
    let mut ps = vec![BTreeSet::new(); n];
    for i in 0..n {
        for j in 0..i {
            if rng.gen_bool(0.5) {
                ps[order[i]].insert(order[j]);
            }
        }
    }
    dag_from_labelled(cards, &ps)
}

/// Random parameters on every stage of `tree`.
pub fn random_model(tree: StagedTree, rng: &mut impl Rng) -> FittedClassifier {
    let cards = tree.schema().cardinalities();
    let params = StageParameters::from_fn(&tree, |id| uniform_simplex(cards[id.depth], rng)).unwrap();
    FittedClassifier::new(tree, params, 0.0, ModelMetadata::default()).unwrap()
}

/// The staging of the tree whose depth-2 stages are {v3,v4},{v5,v6}: the
/// fork X2 <- X1 -> X3 on binary variables.
pub fn fork_staging() -> StagedTree {
    StagedTree::from_labels(schema(&[2, 2, 2]), vec![vec![0], vec![0, 1], vec![0, 0, 1, 1]]).unwrap()
}

/// Depth-2 stages {v3,v6},{v4,v5}: X3's distribution depends on whether
/// X1 and X2 agree.
pub fn xor_staging() -> StagedTree {
    StagedTree::from_labels(schema(&[2, 2, 2]), vec![vec![0], vec![0, 1], vec![0, 1, 1, 0]]).unwrap()
}
