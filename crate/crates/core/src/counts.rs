//! Contingency tables and the information measures built on them.

use crate::error::{Error, Result};
use crate::schema::Dataset;

/// Joint counts over a small ordered subset of variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyCounts {
    vars: Vec<usize>,
    cards: Vec<usize>,
    counts: Vec<u64>,
    total: u64,
}

impl ContingencyCounts {
    pub fn from_dataset(data: &Dataset, vars: &[usize]) -> Self {
        let schema = data.schema();
        let cards: Vec<usize> = vars.iter().map(|&v| schema.cardinality(v)).collect();
        let size = cards.iter().product();
        let mut counts = vec![0u64; size];
        for row in data.rows() {
            let idx = vars.iter().zip(&cards).fold(0, |acc, (&v, &c)| acc * c + row[v]);
            counts[idx] += 1;
        }
        ContingencyCounts {
            vars: vars.to_vec(),
            cards,
            total: data.n_records() as u64,
            counts,
        }
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Count of the cell with the given codes (one per table variable).
    pub fn get(&self, codes: &[usize]) -> u64 {
        let idx = codes.iter().zip(&self.cards).fold(0, |acc, (&x, &c)| acc * c + x);
        self.counts[idx]
    }

    /// Sums out every variable not in `keep` (given as positions into `vars`).
    pub fn marginalize(&self, keep: &[usize]) -> ContingencyCounts {
        let cards: Vec<usize> = keep.iter().map(|&k| self.cards[k]).collect();
        let mut counts = vec![0u64; cards.iter().product()];
        let mut codes = vec![0usize; self.cards.len()];
        for &n in &self.counts {
            let idx = keep.iter().zip(&cards).fold(0, |acc, (&k, &c)| acc * c + codes[k]);
            counts[idx] += n;
            // odometer increment, last variable fastest
            for pos in (0..codes.len()).rev() {
                codes[pos] += 1;
                if codes[pos] < self.cards[pos] {
                    break;
                }
                codes[pos] = 0;
            }
        }
        ContingencyCounts {
            vars: keep.iter().map(|&k| self.vars[k]).collect(),
            cards,
            counts,
            total: self.total,
        }
    }
}

/// Empirical I(X_i; X_j | C) in nats, with 0·log 0 = 0.
pub fn conditional_mutual_information(data: &Dataset, i: usize, j: usize) -> Result<f64> {
    let schema = data.schema();
    if i == j {
        return Err(Error::Domain(format!("CMI needs two distinct features, got {i} twice")));
    }
    if i == 0 || j == 0 || i >= schema.n_vars() || j >= schema.n_vars() {
        return Err(Error::Domain(format!("({i}, {j}) are not both features")));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(cmi_from_table(&ContingencyCounts::from_dataset(data, &[i, j, 0])))
}

/// CMI of the first two table variables given the third.
pub(crate) fn cmi_from_table(t: &ContingencyCounts) -> f64 {
    let (ci, cj, cc) = (t.cards[0], t.cards[1], t.cards[2]);
    let n = t.total as f64;
    let ic = t.marginalize(&[0, 2]);
    let jc = t.marginalize(&[1, 2]);
    let c = t.marginalize(&[2]);
    let mut acc = 0.0;
    for a in 0..ci {
        for b in 0..cj {
            for k in 0..cc {
                let nabk = t.get(&[a, b, k]);
                if nabk == 0 {
                    continue;
                }
                let nabk = nabk as f64;
                let num = nabk * c.get(&[k]) as f64;
                let den = ic.get(&[a, k]) as f64 * jc.get(&[b, k]) as f64;
                acc += nabk / n * (num / den).ln();
            }
        }
    }
    acc.max(0.0)
}

/// Empirical I(X_i; C) in nats.
pub fn class_mutual_information(data: &Dataset, i: usize) -> Result<f64> {
    if i == 0 || i >= data.schema().n_vars() {
        return Err(Error::Domain(format!("{i} is not a feature")));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let t = ContingencyCounts::from_dataset(data, &[i, 0]);
    let xi = t.marginalize(&[0]);
    let c = t.marginalize(&[1]);
    let n = t.total as f64;
    let mut acc = 0.0;
    for a in 0..t.cards[0] {
        for k in 0..t.cards[1] {
            let nak = t.get(&[a, k]);
            if nak == 0 {
                continue;
            }
            let nak = nak as f64;
            acc += nak / n * (nak * n / (xi.get(&[a]) as f64 * c.get(&[k]) as f64)).ln();
        }
    }
    Ok(acc.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::CategoricalSchema;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn dataset(cards: &[usize], rows: &[Vec<usize>]) -> Dataset {
        let s = Arc::new(CategoricalSchema::from_cardinalities(cards).unwrap());
        Dataset::new(s, rows).unwrap()
    }

    /// Expands a (c, x1, x2) count table into records.
    fn from_table(table: &[[[usize; 2]; 2]; 2]) -> Dataset {
        let mut rows = Vec::new();
        for (c, t) in table.iter().enumerate() {
            for (a, u) in t.iter().enumerate() {
                for (b, &n) in u.iter().enumerate() {
                    rows.extend(std::iter::repeat_n(vec![c, a, b], n));
                }
            }
        }
        dataset(&[2, 2, 2], &rows)
    }

    /// Direct summation over all cells with probabilities.
    fn cmi_oracle(table: &[[[usize; 2]; 2]; 2]) -> f64 {
        let n: usize = table.iter().flatten().flatten().sum();
        let p = |c: usize, a: usize, b: usize| table[c][a][b] as f64 / n as f64;
        let mut acc = 0.0;
        for c in 0..2 {
            let pc: f64 = (0..2)
                .flat_map(|a| (0..2).map(move |b| (a, b)))
                .map(|(a, b)| p(c, a, b))
                .sum();
            for a in 0..2 {
                for b in 0..2 {
                    let pab = p(c, a, b);
                    if pab == 0.0 {
                        continue;
                    }
                    let pa = p(c, a, 0) + p(c, a, 1);
                    let pb = p(c, 0, b) + p(c, 1, b);
                    acc += pab * ((pab / pc) / ((pa / pc) * (pb / pc))).ln();
                }
            }
        }
        acc
    }

    #[test]
    fn independent_table_has_zero_cmi() {
        // Within each class the counts are an exact outer product.
        let d = from_table(&[[[6, 3], [2, 1]], [[1, 4], [2, 8]]]);
        assert!(conditional_mutual_information(&d, 1, 2).unwrap().abs() < 1e-15);
    }

    #[test]
    fn copy_has_ln2() {
        let d = dataset(
            &[2, 2, 2],
            &[vec![0, 0, 0], vec![0, 1, 1], vec![1, 0, 0], vec![1, 1, 1]],
        );
        let v = conditional_mutual_information(&d, 1, 2).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn same_feature_is_domain_error() {
        let d = dataset(&[2, 2, 2], &[vec![0, 0, 0]]);
        assert!(conditional_mutual_information(&d, 1, 1).is_err());
        assert!(conditional_mutual_information(&d, 0, 1).is_err());
    }

    #[test]
    fn class_mi_of_copy() {
        let d = dataset(&[2, 2], &[vec![0, 0], vec![1, 1]]);
        assert!((class_mutual_information(&d, 1).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn cmi_matches_oracle_and_is_symmetric(cells in proptest::collection::vec(0usize..20, 8)) {
            prop_assume!(cells.iter().sum::<usize>() > 0);
            let mut table = [[[0usize; 2]; 2]; 2];
            for (k, n) in cells.iter().enumerate() {
                table[k / 4][(k / 2) % 2][k % 2] = *n;
            }
            let d = from_table(&table);
            let v = conditional_mutual_information(&d, 1, 2).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert!((v - cmi_oracle(&table).max(0.0)).abs() < 1e-12);
            let w = conditional_mutual_information(&d, 2, 1).unwrap();
            prop_assert!((v - w).abs() < 1e-12);
        }

        #[test]
        fn marginals_are_consistent(rows in proptest::collection::vec((0usize..2, 0usize..3, 0usize..2, 0usize..4), 1..60)) {
            let rows: Vec<Vec<usize>> = rows.into_iter().map(|(a, b, c, d)| vec![a, b, c, d]).collect();
            let d = dataset(&[2, 3, 2, 4], &rows);
            let full = ContingencyCounts::from_dataset(&d, &[1, 2, 3, 0]);
            prop_assert_eq!(full.marginalize(&[0, 3]), ContingencyCounts::from_dataset(&d, &[1, 0]));
            prop_assert_eq!(full.marginalize(&[2]), ContingencyCounts::from_dataset(&d, &[3]));
            prop_assert_eq!(full.marginalize(&[1, 2, 3]).marginalize(&[0]), ContingencyCounts::from_dataset(&d, &[2]));
        }
    }
}
