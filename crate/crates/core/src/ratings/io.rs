use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use super::{IdMap, Rating, RatingsMatrix, MAX_RATING, MIN_RATING};
use crate::error::{Error, Result};

/// On-disk ratings layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    /// `user_id,item_id,rating`, optional `user,item,rating` header.
    #[default]
    CsvTriples,
    /// `user<TAB>item<TAB>rating<TAB>timestamp` (MovieLens `u.data`).
    MovielensTab,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" | "csv_triples" => Ok(Format::CsvTriples),
            "tab" | "movielens_tab" | "movielens" => Ok(Format::MovielensTab),
            other => Err(Error::Config(format!("unknown format {other:?}"))),
        }
    }
}

/// Reads several ratings files against one shared id map so that, for
/// example, a train and a test file agree on user and item indices.
#[derive(Debug, Default)]
pub struct RatingsLoader {
    ids: IdMap,
    batches: Vec<Vec<Rating>>,
}

impl RatingsLoader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn read_path(&mut self, path: impl AsRef<Path>, format: Format) -> Result<usize> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        self.read(BufReader::new(file), format)
            .map_err(|e| match e {
                Error::Io { source, .. } => Error::Io {
                    path: path.to_owned(),
                    source,
                },
                other => other,
            })
    }

    /// Parses one source; returns the batch index.
    pub fn read<R: BufRead>(&mut self, reader: R, format: Format) -> Result<usize> {
        let batch = parse_into(reader, format, &mut self.ids)?;
        self.batches.push(batch);
        Ok(self.batches.len() - 1)
    }

    /// One matrix per batch, all sized to the union of seen ids.
    pub fn finish(self) -> Vec<RatingsMatrix> {
        let ids = Arc::new(self.ids);
        let (m, n) = (ids.num_users(), ids.num_items());
        self.batches
            .into_iter()
            .map(|mut batch| {
                batch.sort_unstable();
                RatingsMatrix::from_sorted(m, n, batch, Some(ids.clone()))
            })
            .collect()
    }
}

pub fn load_ratings(path: impl AsRef<Path>, format: Format) -> Result<RatingsMatrix> {
    let mut loader = RatingsLoader::new();
    loader.read_path(path, format)?;
    Ok(loader.finish().pop().expect("one batch"))
}

/// Parses ratings from any reader with a fresh id map.
pub fn parse_ratings<R: BufRead>(reader: R, format: Format) -> Result<RatingsMatrix> {
    let mut loader = RatingsLoader::new();
    loader.read(reader, format)?;
    Ok(loader.finish().pop().expect("one batch"))
}

fn parse_into<R: BufRead>(reader: R, format: Format, ids: &mut IdMap) -> Result<Vec<Rating>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut first_record = true;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| Error::Io {
            path: Default::default(),
            source,
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = match format {
            Format::CsvTriples => line.split(',').map(str::trim).collect(),
            Format::MovielensTab => line.split('\t').map(str::trim).collect(),
        };
        if std::mem::take(&mut first_record)
            && format == Format::CsvTriples
            && fields.len() == 3
            && fields[0].eq_ignore_ascii_case("user")
            && fields[1].eq_ignore_ascii_case("item")
            && fields[2].eq_ignore_ascii_case("rating")
        {
            continue;
        }
        let expected = match format {
            Format::CsvTriples => 3,
            Format::MovielensTab => 4,
        };
        if fields.len() != expected {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::Parse {
                line: lineno,
                message: "empty id".into(),
            });
        }
        let value = parse_rating(fields[2]).ok_or_else(|| Error::Parse {
            line: lineno,
            message: format!("rating {:?} is not an integer", fields[2]),
        })?;
        if value < i64::from(MIN_RATING) || value > i64::from(MAX_RATING) {
            return Err(Error::Domain {
                line: lineno,
                value,
            });
        }
        let user = ids.intern_user(fields[0]);
        let item = ids.intern_item(fields[1]);
        if !seen.insert((user, item)) {
            return Err(Error::Duplicate {
                line: lineno,
                user: fields[0].to_owned(),
                item: fields[1].to_owned(),
            });
        }
        out.push(Rating::new(user, item, value as u8));
    }
    if out.is_empty() {
        return Err(Error::Empty);
    }
    Ok(out)
}

fn parse_rating(s: &str) -> Option<i64> {
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    // accept "4.0" but not "4.5"
    let v: f64 = s.parse().ok()?;
    (v.is_finite() && v.fract() == 0.0).then_some(v as i64)
}

/// Writes `user,item,rating` lines (with header), using raw ids when known.
/// Each line of `comment` is emitted as a leading `# ` line.
pub fn write_csv_triples<W: Write>(
    ratings: &RatingsMatrix,
    mut out: W,
    comment: Option<&str>,
) -> std::io::Result<()> {
    if let Some(comment) = comment {
        for line in comment.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    writeln!(out, "user,item,rating")?;
    for e in ratings.entries() {
        writeln!(
            out,
            "{},{},{}",
            ratings.user_label(e.user),
            ratings.item_label(e.item),
            e.rating
        )?;
    }
    out.flush()
}

pub fn save_ratings(
    ratings: &RatingsMatrix,
    path: impl AsRef<Path>,
    comment: Option<&str>,
) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_owned(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_csv_triples(ratings, BufWriter::new(file), comment).map_err(io_err)
}
