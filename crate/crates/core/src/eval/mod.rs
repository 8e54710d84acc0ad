//! Euclidean retrieval over encoded vectors and mean-average-precision scoring.

mod synth;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};

pub use synth::{synth_dataset, synth_training_set, SynthConfig, SynthDataset, SynthImage};

/// Image ids with fixed-length vectors, searched by brute force.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RetrievalIndex {
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
    dim: Option<usize>,
    seen: HashSet<String>,
}

impl RetrievalIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let id = id.into();
        if let Some(dim) = self.dim {
            Error::check_dims(dim, vector.len())?;
        }
        if !self.seen.insert(id.clone()) {
            return Err(Error::validation("id", format!("duplicate id {id:?}")));
        }
        self.dim = Some(vector.len());
        self.ids.push(id);
        self.vectors.push(vector);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn contains(&self, id: &str) -> bool {
        self.seen.contains(id)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids.iter().map(String::as_str).zip(self.vectors.iter().map(Vec::as_slice))
    }

    /// All entries by ascending Euclidean distance to `query`; equal
    /// distances are ordered by ascending id.
    pub fn rank(&self, query: &[f64]) -> Result<Vec<(String, f64)>> {
        if let Some(dim) = self.dim {
            Error::check_dims(dim, query.len())?;
        }
        let mut out: Vec<(String, f64)> = self
            .iter()
            .map(|(id, v)| {
                let sq: f64 = v.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                (id.to_owned(), sq.sqrt())
            })
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        Ok(out)
    }
}

/// Query id to the set of relevant database ids.
pub type RelevanceTruth = BTreeMap<String, BTreeSet<String>>;

/// Non-interpolated average precision: the mean of precision@k over the
/// ranks `k` holding relevant items. Relevant ids missing from the ranking
/// contribute zero.
pub fn average_precision<S: AsRef<str>>(ranking: &[S], relevant: &BTreeSet<String>) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::param("relevant", "relevant set is empty"));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, id) in ranking.iter().enumerate() {
        if relevant.contains(id.as_ref()) {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(sum / relevant.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryResult {
    pub id: String,
    pub class: Option<String>,
    pub average_precision: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub queries: Vec<QueryResult>,
    pub mean_average_precision: f64,
    /// Mean AP per class label, when labels were supplied.
    pub per_class: BTreeMap<String, f64>,
}

impl EvalResult {
    /// Aligned text table: one row per query, per-class means, then MAP.
    pub fn write_table<W: Write>(&self, mut out: W) -> io::Result<()> {
        let width = self.queries.iter().map(|q| q.id.len()).max().unwrap_or(5).max(5);
        writeln!(out, "{:<width$}  {:<12}  {:>8}", "query", "class", "AP")?;
        for q in &self.queries {
            writeln!(
                out,
                "{:<width$}  {:<12}  {:>8.4}",
                q.id,
                q.class.as_deref().unwrap_or("-"),
                q.average_precision
            )?;
        }
        for (class, ap) in &self.per_class {
            writeln!(out, "{:<width$}  {:<12}  {:>8.4}", "class-mean", class, ap)?;
        }
        writeln!(out, "{:<width$}  {:<12}  {:>8.4}", "MAP", "", self.mean_average_precision)
    }

    /// Tab-separated records `query <id> <ap>`, then `MAP <value>`.
    /// Values use shortest round-trip formatting.
    pub fn write_records<W: Write>(&self, mut out: W) -> io::Result<()> {
        for q in &self.queries {
            writeln!(out, "query\t{}\t{}", q.id, q.average_precision)?;
        }
        writeln!(out, "MAP\t{}", self.mean_average_precision)
    }
}

/// Ranks the index for every query and averages the per-query AP.
/// `classes` optionally maps query ids to class labels for a per-class breakdown.
pub fn evaluate(
    index: &RetrievalIndex,
    queries: &[(String, Vec<f64>)],
    truth: &RelevanceTruth,
    classes: Option<&BTreeMap<String, String>>,
) -> Result<EvalResult> {
    if queries.is_empty() {
        return Err(Error::param("queries", "no queries to evaluate"));
    }
    for (id, _) in queries {
        let relevant = truth
            .get(id)
            .ok_or_else(|| Error::validation("truth", format!("no relevance entry for query {id:?}")))?;
        if let Some(missing) = relevant.iter().find(|r| !index.contains(r)) {
            return Err(Error::validation(
                "truth",
                format!("relevant id {missing:?} of query {id:?} is not indexed"),
            ));
        }
    }
    let aps: Vec<f64> = queries
        .par_iter()
        .map(|(id, v)| {
            let ranking = index.rank(v)?;
            let ids: Vec<&str> = ranking.iter().map(|(r, _)| r.as_str()).collect();
            average_precision(&ids, &truth[id])
        })
        .collect::<Result<_>>()?;

    let results: Vec<QueryResult> = queries
        .iter()
        .zip(&aps)
        .map(|((id, _), &ap)| QueryResult {
            id: id.clone(),
            class: classes.and_then(|c| c.get(id).cloned()),
            average_precision: ap,
        })
        .collect();
    let map = aps.iter().sum::<f64>() / aps.len() as f64;

    let mut grouped: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for q in &results {
        if let Some(class) = &q.class {
            let e = grouped.entry(class.clone()).or_default();
            e.0 += q.average_precision;
            e.1 += 1;
        }
    }
    Ok(EvalResult {
        queries: results,
        mean_average_precision: map,
        per_class: grouped
            .into_iter()
            .map(|(c, (sum, n))| (c, sum / n as f64))
            .collect(),
    })
}
