//! CSV ingestion and emission.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use log::warn;

use crate::classify::Prediction;
use crate::error::{Error, Result};
use crate::schema::{CategoricalSchema, Dataset, Variable};

/// Reads a headed CSV of categorical values. Each column's distinct values,
/// sorted lexicographically, become its codes; `class_column` is moved to the
/// front and the other columns keep their order.
pub fn load_csv(path: &Path, class_column: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    load_csv_reader(file, class_column)
}

pub fn load_csv_reader(reader: impl Read, class_column: &str) -> Result<Dataset> {
    let (header, cells) = read_table(reader)?;
    let class_idx = header
        .iter()
        .position(|h| h == class_column)
        .ok_or_else(|| Error::Csv(format!("no column named `{class_column}`")))?;
    let order: Vec<usize> = std::iter::once(class_idx)
        .chain((0..header.len()).filter(|&i| i != class_idx))
        .collect();

    let mut variables = Vec::with_capacity(order.len());
    let mut code_maps: Vec<HashMap<&str, usize>> = Vec::with_capacity(order.len());
    for &col in &order {
        let levels: BTreeSet<&str> = cells.iter().map(|r| r[col].as_str()).collect();
        if col == class_idx && levels.len() < 2 {
            return Err(Error::Csv(format!("class column `{class_column}` has a single value")));
        }
        if levels.len() == 1 {
            warn!("column `{}` has a single value; it carries no information", header[col]);
        }
        code_maps.push(levels.iter().enumerate().map(|(i, &l)| (l, i)).collect());
        variables.push(Variable::with_levels(
            header[col].clone(),
            levels.into_iter().map(str::to_string).collect(),
        ));
    }
    let schema = Arc::new(CategoricalSchema::new(variables)?);
    let mut codes = Vec::with_capacity(cells.len() * order.len());
    for row in &cells {
        for (k, &col) in order.iter().enumerate() {
            codes.push(code_maps[k][row[col].as_str()]);
        }
    }
    Dataset::from_flat(schema, codes)
}

fn read_table(reader: impl Read) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Csv("missing header row".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != header.len() {
            return Err(Error::Csv(format!(
                "line {line}: {} fields, header has {}",
                rec.len(),
                header.len()
            )));
        }
        if let Some(col) = rec.iter().position(str::is_empty) {
            return Err(Error::Csv(format!(
                "line {line}: empty value in column `{}`",
                header[col]
            )));
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok((header, rows))
}

/// Reads full records (class included) coded against an existing schema,
/// e.g. held-out data that must share a training set's levels.
pub fn load_csv_with_schema(reader: impl Read, schema: &Arc<CategoricalSchema>) -> Result<Dataset> {
    let (header, cells) = read_table(reader)?;
    let mut cols = Vec::with_capacity(schema.n_vars());
    for v in schema.variables() {
        let col = header
            .iter()
            .position(|h| *h == v.name)
            .ok_or_else(|| Error::Csv(format!("no column named `{}`", v.name)))?;
        let map: HashMap<&str, usize> = v.levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        cols.push((col, map));
    }
    let mut codes = Vec::with_capacity(cells.len() * schema.n_vars());
    for (i, row) in cells.iter().enumerate() {
        for ((col, map), v) in cols.iter().zip(schema.variables()) {
            let code = map.get(row[*col].as_str()).ok_or_else(|| {
                Error::Csv(format!(
                    "line {}: unknown level `{}` for `{}`",
                    i + 2,
                    row[*col],
                    v.name
                ))
            })?;
            codes.push(*code);
        }
    }
    Dataset::from_flat(Arc::clone(schema), codes)
}

/// Reads feature rows for `schema` (matched by column name, coded by the
/// schema's levels). A class column, if present, is ignored.
pub fn read_feature_rows(reader: impl Read, schema: &CategoricalSchema) -> Result<Vec<Vec<usize>>> {
    let (header, cells) = read_table(reader)?;
    let mut cols = Vec::with_capacity(schema.n_features());
    for v in &schema.variables()[1..] {
        let col = header
            .iter()
            .position(|h| *h == v.name)
            .ok_or_else(|| Error::Csv(format!("no column named `{}`", v.name)))?;
        let map: HashMap<&str, usize> = v.levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        cols.push((col, map, &v.name));
    }
    cells
        .iter()
        .enumerate()
        .map(|(i, row)| {
            cols.iter()
                .map(|(col, map, name)| {
                    map.get(row[*col].as_str()).copied().ok_or_else(|| {
                        Error::Csv(format!("line {}: unknown level `{}` for `{name}`", i + 2, row[*col]))
                    })
                })
                .collect()
        })
        .collect()
}

/// Writes a dataset with its level labels.
pub fn write_dataset_csv(data: &Dataset, writer: impl Write) -> Result<()> {
    let schema = data.schema();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(schema.variables().iter().map(|v| v.name.as_str()))?;
    for row in data.rows() {
        w.write_record(
            row.iter()
                .enumerate()
                .map(|(i, &c)| schema.variable(i).levels[c].as_str()),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// One line per prediction: the predicted class label, then the posterior
/// of every class.
pub fn write_predictions(schema: &CategoricalSchema, predictions: &[Prediction], writer: impl Write) -> Result<()> {
    let class = schema.variable(0);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![class.name.clone()];
    header.extend(class.levels.iter().map(|l| format!("P({}={l})", class.name)));
    w.write_record(&header)?;
    for p in predictions {
        let mut rec = vec![class.levels[p.class].clone()];
        rec.extend(p.posterior.iter().map(|q| q.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
