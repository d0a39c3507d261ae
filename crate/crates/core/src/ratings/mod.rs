//! Sparse user×item ratings on the 1–5 integer scale.
//!
//! Unknown ratings are represented by the absence of an entry; a stored
//! rating is always in `1..=5`.

mod eval;
mod io;

use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

pub use eval::{rating_histograms, rmse, split, Histogram, SplitPair, DEFAULT_BINS};
pub use io::{load_ratings, parse_ratings, save_ratings, write_csv_triples, Format, RatingsLoader};

pub const MIN_RATING: u8 = 1;
pub const MAX_RATING: u8 = 5;

/// One known rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub rating: u8,
}

impl Rating {
    pub fn new(user: usize, item: usize, rating: u8) -> Self {
        Rating { user, item, rating }
    }
}

/// Raw dataset ids for dense user and item indices, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    users: Vec<String>,
    items: Vec<String>,
    user_index: HashMap<String, usize>,
    item_index: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern_user(&mut self, raw: &str) -> usize {
        intern(&mut self.users, &mut self.user_index, raw)
    }

    pub fn intern_item(&mut self, raw: &str) -> usize {
        intern(&mut self.items, &mut self.item_index, raw)
    }

    pub fn user_id(&self, index: usize) -> Option<&str> {
        self.users.get(index).map(String::as_str)
    }

    pub fn item_id(&self, index: usize) -> Option<&str> {
        self.items.get(index).map(String::as_str)
    }

    pub fn user_index(&self, raw: &str) -> Option<usize> {
        self.user_index.get(raw).copied()
    }

    pub fn item_index(&self, raw: &str) -> Option<usize> {
        self.item_index.get(raw).copied()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    /// Writes the map as CSV `kind,index,id`, users first.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "kind,index,id")?;
        for (i, id) in self.users.iter().enumerate() {
            writeln!(out, "user,{i},{id}")?;
        }
        for (i, id) in self.items.iter().enumerate() {
            writeln!(out, "item,{i},{id}")?;
        }
        Ok(())
    }
}

fn intern(names: &mut Vec<String>, index: &mut HashMap<String, usize>, raw: &str) -> usize {
    if let Some(&i) = index.get(raw) {
        return i;
    }
    let i = names.len();
    names.push(raw.to_owned());
    index.insert(raw.to_owned(), i);
    i
}

/// Sparse ratings matrix. Entries are kept sorted by `(user, item)`.
#[derive(Debug, Clone)]
pub struct RatingsMatrix {
    num_users: usize,
    num_items: usize,
    entries: Vec<Rating>,
    // user u's entries are entries[row_start[u]..row_start[u + 1]]
    row_start: Vec<usize>,
    ids: Option<Arc<IdMap>>,
}

impl PartialEq for RatingsMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.num_users == other.num_users
            && self.num_items == other.num_items
            && self.entries == other.entries
    }
}

impl RatingsMatrix {
    pub fn new(
        num_users: usize,
        num_items: usize,
        entries: impl IntoIterator<Item = Rating>,
    ) -> Result<Self> {
        let mut entries: Vec<Rating> = entries.into_iter().collect();
        for e in &entries {
            if e.user >= num_users || e.item >= num_items {
                return Err(Error::OutOfRange {
                    user: e.user,
                    item: e.item,
                    rows: num_users,
                    cols: num_items,
                });
            }
            if !(MIN_RATING..=MAX_RATING).contains(&e.rating) {
                return Err(Error::RatingValue(e.rating));
            }
        }
        entries.sort_unstable();
        if let Some(w) = entries
            .windows(2)
            .find(|w| (w[0].user, w[0].item) == (w[1].user, w[1].item))
        {
            return Err(Error::DuplicateEntry {
                user: w[0].user,
                item: w[0].item,
            });
        }
        Ok(Self::from_sorted(num_users, num_items, entries, None))
    }

    /// Builds from `(user, item, rating)` triples.
    pub fn from_triples(
        num_users: usize,
        num_items: usize,
        triples: &[(usize, usize, u8)],
    ) -> Result<Self> {
        Self::new(
            num_users,
            num_items,
            triples.iter().map(|&(u, i, r)| Rating::new(u, i, r)),
        )
    }

    // `entries` must already be sorted and valid.
    fn from_sorted(
        num_users: usize,
        num_items: usize,
        entries: Vec<Rating>,
        ids: Option<Arc<IdMap>>,
    ) -> Self {
        let mut row_start = vec![0usize; num_users + 1];
        for e in &entries {
            row_start[e.user + 1] += 1;
        }
        for u in 0..num_users {
            row_start[u + 1] += row_start[u];
        }
        RatingsMatrix {
            num_users,
            num_items,
            entries,
            row_start,
            ids,
        }
    }

    pub fn with_ids(mut self, ids: Arc<IdMap>) -> Self {
        self.ids = Some(ids);
        self
    }

    pub fn ids(&self) -> Option<&Arc<IdMap>> {
        self.ids.as_ref()
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    /// |S|
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Rating] {
        &self.entries
    }

    /// Ratings given by user `u`, sorted by item.
    pub fn user_entries(&self, u: usize) -> &[Rating] {
        &self.entries[self.row_start[u]..self.row_start[u + 1]]
    }

    pub fn get(&self, u: usize, i: usize) -> Option<u8> {
        let row = self.user_entries(u);
        row.binary_search_by_key(&i, |e| e.item)
            .ok()
            .map(|k| row[k].rating)
    }

    pub fn user_counts(&self) -> Vec<usize> {
        (0..self.num_users)
            .map(|u| self.row_start[u + 1] - self.row_start[u])
            .collect()
    }

    pub fn item_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_items];
        for e in &self.entries {
            counts[e.item] += 1;
        }
        counts
    }

    /// Mean of all known ratings; `None` when empty.
    pub fn global_mean(&self) -> Option<f64> {
        if self.entries.is_empty() {
            return None;
        }
        let sum: u64 = self.entries.iter().map(|e| u64::from(e.rating)).sum();
        Some(sum as f64 / self.entries.len() as f64)
    }

    /// Fraction of observed cells.
    pub fn density(&self) -> f64 {
        let cells = self.num_users * self.num_items;
        if cells == 0 {
            0.0
        } else {
            self.entries.len() as f64 / cells as f64
        }
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            users: self.num_users,
            items: self.num_items,
            ratings: self.len(),
            density: self.density(),
        }
    }

    /// Same entries, larger index ranges.
    pub fn resized(&self, num_users: usize, num_items: usize) -> Result<Self> {
        if num_users < self.num_users || num_items < self.num_items {
            return Err(Error::Shape(format!(
                "cannot shrink {}x{} to {num_users}x{num_items}",
                self.num_users, self.num_items
            )));
        }
        Ok(Self::from_sorted(
            num_users,
            num_items,
            self.entries.clone(),
            self.ids.clone(),
        ))
    }

    /// Keeps dimensions and id map, replaces the entries.
    pub(crate) fn with_entries(&self, mut entries: Vec<Rating>) -> Self {
        entries.sort_unstable();
        Self::from_sorted(self.num_users, self.num_items, entries, self.ids.clone())
    }

    pub fn user_label(&self, u: usize) -> String {
        self.ids
            .as_ref()
            .and_then(|m| m.user_id(u))
            .map_or_else(|| u.to_string(), str::to_owned)
    }

    pub fn item_label(&self, i: usize) -> String {
        self.ids
            .as_ref()
            .and_then(|m| m.item_id(i))
            .map_or_else(|| i.to_string(), str::to_owned)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub density: f64,
}
