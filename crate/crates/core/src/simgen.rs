//! Synthetic data: random staged trees, noisy linear threshold rules, and
//! noisy parity (xor) rules over binary predictors.
//!
//! Every generator is a deterministic function of its configuration; the
//! random source is ChaCha8 seeded from the 64-bit seed.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{CategoricalSchema, Dataset, Variable};
use crate::tree::{FittedClassifier, ModelMetadata, StageParameters, StagedTree};

/// Half-width of the uniform noise added before taking the sign.
pub const NOISE_HALF_WIDTH: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    RandomSevt,
    Linear,
    Xor,
}

impl Process {
    pub fn name(self) -> &'static str {
        match self {
            Process::RandomSevt => "random_sevt",
            Process::Linear => "linear",
            Process::Xor => "xor",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "random_sevt" => Ok(Process::RandomSevt),
            "linear" => Ok(Process::Linear),
            "xor" => Ok(Process::Xor),
            _ => Err(Error::Domain(format!("unknown process `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub process: Process,
    pub p: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Domain(format!(
                "simulation needs p, n_train and n_test >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Generated train/test data, plus the true model for `random_sevt`.
#[derive(Debug, Clone)]
pub struct SimData {
    pub truth: Option<FittedClassifier>,
    pub train: Dataset,
    pub test: Dataset,
}

/// Class `C` with levels `-1`/`1` (codes 0/1) and binary features `X1..Xp`.
pub fn sim_schema(p: usize) -> Arc<CategoricalSchema> {
    let bin = || vec!["0".to_string(), "1".to_string()];
    let mut vars = vec![Variable::with_levels("C", vec!["-1".into(), "1".into()])];
    vars.extend((1..=p).map(|i| Variable::with_levels(format!("X{i}"), bin())));
    Arc::new(CategoricalSchema::new(vars).expect("simulation schema is valid"))
}

pub fn generate(cfg: &SimConfig) -> Result<SimData> {
    match cfg.process {
        Process::RandomSevt => {
            let (truth, train, test) = gen_random_sevt(cfg)?;
            Ok(SimData {
                truth: Some(truth),
                train,
                test,
            })
        }
        Process::Linear => {
            let (train, test) = gen_linear(cfg)?;
            Ok(SimData {
                truth: None,
                train,
                test,
            })
        }
        Process::Xor => {
            let (train, test) = gen_xor(cfg)?;
            Ok(SimData {
                truth: None,
                train,
                test,
            })
        }
    }
}

/// A point uniform on the simplex: normalized standard exponentials.
pub fn uniform_simplex(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let e: Vec<f64> = (0..dim).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        if e.iter().all(|&x| x > 0.0) {
            let z: f64 = e.iter().sum();
            return e.into_iter().map(|x| x / z).collect();
        }
    }
}

/// Random staging from the full tree: at each depth a target stage count is
/// drawn uniformly from 1..=#vertices and uniformly chosen pairs of stages
/// are joined until it is reached.
pub fn random_staging(schema: Arc<CategoricalSchema>, rng: &mut impl Rng) -> Result<StagedTree> {
    let full = StagedTree::full(Arc::clone(&schema))?;
    let mut labels = Vec::with_capacity(full.depths());
    for d in 0..full.depths() {
        let m = full.vertex_count(d);
        let target = rng.gen_range(1..=m);
        let mut depth_labels: Vec<u32> = (0..m as u32).collect();
        let mut active: Vec<u32> = (0..m as u32).collect();
        while active.len() > target {
            let i = rng.gen_range(0..active.len());
            let mut j = rng.gen_range(0..active.len() - 1);
            if j >= i {
                j += 1;
            }
            let (keep, gone) = (active[i.min(j)], active[i.max(j)]);
            for l in depth_labels.iter_mut().filter(|l| **l == gone) {
                *l = keep;
            }
            active.swap_remove(i.max(j));
        }
        labels.push(depth_labels);
    }
    StagedTree::from_labels(schema, labels)
}

/// Draws `n` records by walking from the root and sampling each edge from
/// the current stage's distribution.
pub fn sample(model: &FittedClassifier, n: usize, rng: &mut impl Rng) -> Dataset {
    let schema = Arc::clone(model.schema());
    let tree = model.tree();
    let mut codes = Vec::with_capacity(n * schema.n_vars());
    for _ in 0..n {
        let mut ctx = 0usize;
        for d in 0..tree.depths() {
            let theta = model.params().get(tree.stage_of(d, ctx));
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut x = theta.len() - 1;
            for (i, &p) in theta.iter().enumerate() {
                acc += p;
                if u < acc {
                    x = i;
                    break;
                }
            }
            codes.push(x);
            ctx = ctx * schema.cardinality(d) + x;
        }
    }
    Dataset::from_flat(schema, codes).expect("sampled codes are in range")
}

pub fn gen_random_sevt(cfg: &SimConfig) -> Result<(FittedClassifier, Dataset, Dataset)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let schema = sim_schema(cfg.p);
    let tree = random_staging(schema, &mut rng)?;
    let params = StageParameters::from_fn(&tree, |id| {
        uniform_simplex(tree.schema().cardinality(id.depth), &mut rng)
    })?;
    let truth = FittedClassifier::new(
        tree,
        params,
        0.0,
        ModelMetadata {
            learner: "random_sevt".into(),
            seed: Some(cfg.seed),
        },
    )?;
    let train = sample(&truth, cfg.n_train, &mut rng);
    let test = sample(&truth, cfg.n_test, &mut rng);
    Ok((truth, train, test))
}

/// Coefficients of the linear process, drawn once per data set.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams {
    /// Bernoulli success probability of each predictor.
    pub q: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LinearParams {
    /// q ~ U[0,1]; coefficients and intercept ~ U[-p, p].
    pub fn draw(p: usize, rng: &mut impl Rng) -> Self {
        let bound = p as f64;
        let q = (0..p).map(|_| rng.gen::<f64>()).collect();
        let coefficients = (0..p).map(|_| rng.gen_range(-bound..=bound)).collect();
        let intercept = rng.gen_range(-bound..=bound);
        LinearParams {
            q,
            coefficients,
            intercept,
        }
    }
}

fn noise(rng: &mut impl Rng) -> f64 {
    rng.gen_range(-NOISE_HALF_WIDTH..=NOISE_HALF_WIDTH)
}

/// sign(v) as a class code: negative -> 0, otherwise (including 0) -> 1.
fn sign_code(v: f64) -> usize {
    usize::from(v >= 0.0)
}

fn draw_predictors(q: &[f64], rng: &mut impl Rng, row: &mut Vec<usize>) {
    row.extend(q.iter().map(|&qi| usize::from(rng.gen::<f64>() < qi)));
}

/// Records of the linear process under fixed coefficients.
pub fn sample_linear(params: &LinearParams, n: usize, rng: &mut impl Rng) -> Dataset {
    let p = params.q.len();
    let mut codes = Vec::with_capacity(n * (p + 1));
    let mut x = Vec::with_capacity(p);
    for _ in 0..n {
        x.clear();
        draw_predictors(&params.q, rng, &mut x);
        let lin: f64 = params.coefficients.iter().zip(&x).map(|(a, &xi)| a * xi as f64).sum();
        codes.push(sign_code(lin + params.intercept + noise(rng)));
        codes.extend_from_slice(&x);
    }
    Dataset::from_flat(sim_schema(p), codes).expect("codes are binary")
}

pub fn gen_linear(cfg: &SimConfig) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = LinearParams::draw(cfg.p, &mut rng);
    Ok(gen_linear_with(&params, cfg.n_train, cfg.n_test, &mut rng))
}

pub fn gen_linear_with(params: &LinearParams, n_train: usize, n_test: usize, rng: &mut impl Rng) -> (Dataset, Dataset) {
    let train = sample_linear(params, n_train, rng);
    let test = sample_linear(params, n_test, rng);
    (train, test)
}

/// Records of the xor process: the class is the sign of the product of the
/// predictors mapped to ±1 (0 -> -1, 1 -> +1) plus noise.
pub fn sample_xor(q: &[f64], n: usize, rng: &mut impl Rng) -> Dataset {
    let p = q.len();
    let mut codes = Vec::with_capacity(n * (p + 1));
    let mut x = Vec::with_capacity(p);
    for _ in 0..n {
        x.clear();
        draw_predictors(q, rng, &mut x);
        let parity: f64 = x.iter().map(|&xi| if xi == 1 { 1.0 } else { -1.0 }).product();
        codes.push(sign_code(parity + noise(rng)));
        codes.extend_from_slice(&x);
    }
    Dataset::from_flat(sim_schema(p), codes).expect("codes are binary")
}

pub fn gen_xor(cfg: &SimConfig) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let q: Vec<f64> = (0..cfg.p).map(|_| rng.gen::<f64>()).collect();
    let train = sample_xor(&q, cfg.n_train, &mut rng);
    let test = sample_xor(&q, cfg.n_test, &mut rng);
    Ok((train, test))
}
