//! Full-scan term matching.
//!
//! A query is a conjunction of clauses; each clause names one clause slot and
//! a set of attribute ids, and matches a document when the document's
//! attributes in that slot share at least one id with it. Every row of the
//! index is checked, no inverted index or early stopping is involved.

use thiserror::Error;

use crate::corpus::FrozenIndex;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("unknown clause slot {slot} (index has {num_clauses})")]
    UnknownSlot { slot: usize, num_clauses: usize },
    #[error("unknown clause {0:?}")]
    UnknownClause(String),
    #[error("clause slot {0} given more than once")]
    DuplicateSlot(usize),
    #[error("clause slot {0} has no attribute ids")]
    EmptyClause(usize),
    #[error("clause slot {0} contains attribute id 0 (0 reserved for padding)")]
    ReservedAttribute(usize),
}

/// Candidate record handed from stage to stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Messenger {
    pub row_id: u32,
    pub batch_id: u32,
    pub score: f64,
}

impl Messenger {
    pub fn new(row_id: u32, batch_id: u32) -> Self {
        Self {
            row_id,
            batch_id,
            score: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryClause {
    pub slot: usize,
    /// Strictly increasing, non-empty.
    pub attributes: Vec<u32>,
}

/// Normalized conjunctive query. No clauses means every document matches.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CnfQuery {
    clauses: Vec<QueryClause>,
}

impl CnfQuery {
    pub fn match_all() -> Self {
        Self::default()
    }

    /// Sorts and de-duplicates each clause and orders clauses by slot.
    pub fn normalize<I>(num_clauses: usize, raw: I) -> Result<Self, TermError>
    where
        I: IntoIterator<Item = (usize, Vec<u32>)>,
    {
        let mut clauses: Vec<QueryClause> = Vec::new();
        for (slot, mut attributes) in raw {
            if slot >= num_clauses {
                return Err(TermError::UnknownSlot { slot, num_clauses });
            }
            if attributes.contains(&0) {
                return Err(TermError::ReservedAttribute(slot));
            }
            if attributes.is_empty() {
                return Err(TermError::EmptyClause(slot));
            }
            if clauses.iter().any(|c| c.slot == slot) {
                return Err(TermError::DuplicateSlot(slot));
            }
            attributes.sort_unstable();
            attributes.dedup();
            clauses.push(QueryClause { slot, attributes });
        }
        clauses.sort_by_key(|c| c.slot);
        Ok(Self { clauses })
    }

    /// Like [`Self::normalize`] with clause slots given by name.
    pub fn from_names<'a, I>(index: &FrozenIndex, raw: I) -> Result<Self, TermError>
    where
        I: IntoIterator<Item = (&'a str, Vec<u32>)>,
    {
        let schema = index.schema();
        let mut slots = Vec::new();
        for (name, attrs) in raw {
            let slot = schema
                .slot(name)
                .ok_or_else(|| TermError::UnknownClause(name.to_string()))?;
            slots.push((slot, attrs));
        }
        Self::normalize(schema.num_clauses(), slots)
    }

    pub fn clauses(&self) -> &[QueryClause] {
        &self.clauses
    }

    pub fn is_match_all(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Checks the query against an index's clause count.
    pub fn validate(&self, num_clauses: usize) -> Result<(), TermError> {
        match self.clauses.iter().find(|c| c.slot >= num_clauses) {
            Some(c) => Err(TermError::UnknownSlot {
                slot: c.slot,
                num_clauses,
            }),
            None => Ok(()),
        }
    }
}

/// Whether two ascending lists share an element (two-pointer walk).
#[inline]
pub fn sorted_intersects(a: &[u32], b: &[u32]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

#[inline]
pub fn clause_matches(index: &FrozenIndex, row_id: u32, clause: &QueryClause) -> bool {
    sorted_intersects(index.clause_slice(row_id, clause.slot), &clause.attributes)
}

#[inline]
pub fn row_matches(index: &FrozenIndex, row_id: u32, query: &CnfQuery) -> bool {
    query
        .clauses
        .iter()
        .all(|c| clause_matches(index, row_id, c))
}

/// Scans every row and returns messengers for the matching ones in row order.
pub fn full_scan_tbr(index: &FrozenIndex, query: &CnfQuery, batch_id: u32) -> Vec<Messenger> {
    let mut out = Vec::new();
    full_scan_into(index, query, batch_id, &mut out);
    out
}

pub(crate) fn full_scan_into(
    index: &FrozenIndex,
    query: &CnfQuery,
    batch_id: u32,
    out: &mut Vec<Messenger>,
) {
    out.clear();
    for row in 0..index.num_docs() as u32 {
        if row_matches(index, row, query) {
            out.push(Messenger::new(row, batch_id));
        }
    }
}

/// One pass over the rows for several queries at once. The output is ordered
/// by `(row_id, batch_id)`; `batch_id` is the position in `queries`. `None`
/// entries take no part in the scan.
pub fn merged_scan(index: &FrozenIndex, queries: &[Option<&CnfQuery>]) -> Vec<Messenger> {
    let mut out = Vec::new();
    merged_scan_into(index, queries, &mut out);
    out
}

pub(crate) fn merged_scan_into(
    index: &FrozenIndex,
    queries: &[Option<&CnfQuery>],
    out: &mut Vec<Messenger>,
) {
    out.clear();
    let active: Vec<(u32, &[QueryClause])> = queries
        .iter()
        .enumerate()
        .filter_map(|(b, q)| q.map(|q| (b as u32, q.clauses.as_slice())))
        .collect();
    // Each row's offsets and attributes are loaded once and shared by every
    // query in the batch.
    for row in 0..index.num_docs() as u32 {
        let offs = index.offsets_row(row);
        let attrs = index.attribute_row(row);
        for &(batch, clauses) in &active {
            let hit = clauses.iter().all(|c| {
                let span = &attrs[offs[c.slot] as usize..offs[c.slot + 1] as usize];
                sorted_intersects(span, &c.attributes)
            });
            if hit {
                out.push(Messenger::new(row, batch));
            }
        }
    }
}
