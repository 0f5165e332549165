// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Builds an actor/director/movie MLN from IMDb-style records.
//!
//! * `A`: actors, joined when they acted together in some movie;
//! * `D`: directors, joined when the genres of the movies they directed
//!   overlap enough;
//! * `M`: movies, joined when their ratings fall in the same class
//!   `[0,2) [2,4) [4,6) [6,8) [8,10]`; unrated movies stay isolated.
//!
//! Inter-layer links: actor-director when the director directed the actor,
//! director-movie for directed movies, actor-movie for acted movies. People
//! without any movie are left out.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{InterLayerEdges, LayerGraph, LayerId, Mln, NodeId};

#[derive(Clone, Debug, PartialEq)]
pub struct Movie {
    pub id: String,
    pub title: String,
    pub genres: BTreeSet<String>,
    pub rating: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Person {
    pub id: String,
    pub name: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ImdbRecords {
    pub movies: Vec<Movie>,
    pub people: Vec<Person>,
    /// `(person, movie)`
    pub acts_in: Vec<(String, String)>,
    /// `(person, movie)`
    pub directs: Vec<(String, String)>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GenreOverlap {
    /// `|a ∩ b| / min(|a|, |b|)`
    #[default]
    MinDenominator,
    /// `|a ∩ b| / |a ∪ b|`
    Jaccard,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IngestOptions {
    pub genre_threshold: f64,
    pub overlap: GenreOverlap,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            genre_threshold: 0.5,
            overlap: GenreOverlap::MinDenominator,
        }
    }
}

/// Class `0..=4` of a rating in `[0, 10]`; `None` outside that range.
pub fn rating_class(rating: f64) -> Option<u8> {
    if !(0.0..=10.0).contains(&rating) {
        return None;
    }
    Some(((rating / 2.0).floor() as u8).min(4))
}

pub fn genre_overlap(a: &BTreeSet<String>, b: &BTreeSet<String>, mode: GenreOverlap) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let common = a.intersection(b).count() as f64;
    match mode {
        GenreOverlap::MinDenominator => common / a.len().min(b.len()) as f64,
        GenreOverlap::Jaccard => common / a.union(b).count() as f64,
    }
}

pub fn ingest_imdb(records: &ImdbRecords, opts: IngestOptions) -> Result<Mln> {
    if records.movies.is_empty() {
        return Err(Error::EmptyInput("no movies".into()));
    }
    if records.people.is_empty() {
        return Err(Error::EmptyInput("no people".into()));
    }
    let mut movies: BTreeMap<&str, &Movie> = BTreeMap::new();
    for m in &records.movies {
        if movies.insert(&m.id, m).is_some() {
            return Err(Error::ReferentialIntegrity(format!("movie {} listed twice", m.id)));
        }
    }
    let mut people: BTreeSet<&str> = BTreeSet::new();
    for p in &records.people {
        if !people.insert(&p.id) {
            return Err(Error::ReferentialIntegrity(format!("person {} listed twice", p.id)));
        }
    }
    let check = |rows: &[(String, String)], what: &str| -> Result<BTreeSet<(String, String)>> {
        for (p, m) in rows {
            if !people.contains(p.as_str()) {
                return Err(Error::ReferentialIntegrity(format!("{what} row names unknown person {p}")));
            }
            if !movies.contains_key(m.as_str()) {
                return Err(Error::ReferentialIntegrity(format!("{what} row names unknown movie {m}")));
            }
        }
        Ok(rows.iter().cloned().collect())
    };
    let acts = check(&records.acts_in, "acts")?;
    let directs = check(&records.directs, "directs")?;

    let actors: BTreeSet<&str> = acts.iter().map(|(p, _)| p.as_str()).collect();
    let directors: BTreeSet<&str> = directs.iter().map(|(p, _)| p.as_str()).collect();

    // dense ids: actors, then directors, then movies, each in key order
    let mut next = 0u32;
    let mut assign = |keys: &mut dyn Iterator<Item = &str>| -> BTreeMap<String, NodeId> {
        keys.map(|k| {
            let id = NodeId(next);
            next += 1;
            (k.to_string(), id)
        })
        .collect()
    };
    let actor_ids = assign(&mut actors.iter().copied());
    let director_ids = assign(&mut directors.iter().copied());
    let movie_ids = assign(&mut movies.keys().copied());

    let mut cast: BTreeMap<&str, Vec<NodeId>> = BTreeMap::new();
    for (p, m) in &acts {
        cast.entry(m.as_str()).or_default().push(actor_ids[p]);
    }
    let mut actor_edges = Vec::new();
    for members in cast.values() {
        for (i, &u) in members.iter().enumerate() {
            for &v in &members[i + 1..] {
                actor_edges.push((u, v));
            }
        }
    }

    let mut genres: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for (p, m) in &directs {
        genres
            .entry(p.as_str())
            .or_default()
            .extend(movies[m.as_str()].genres.iter().cloned());
    }
    let profile: Vec<(NodeId, &BTreeSet<String>)> = genres
        .iter()
        .map(|(p, g)| (director_ids[*p], g))
        .collect();
    let mut director_edges = Vec::new();
    for (i, (u, gu)) in profile.iter().enumerate() {
        for (v, gv) in &profile[i + 1..] {
            if !gu.is_empty()
                && !gv.is_empty()
                && genre_overlap(gu, gv, opts.overlap) >= opts.genre_threshold
            {
                director_edges.push((*u, *v));
            }
        }
    }

    let mut classes: BTreeMap<u8, Vec<NodeId>> = BTreeMap::new();
    for (id, m) in &movies {
        if let Some(c) = m.rating.and_then(rating_class) {
            classes.entry(c).or_default().push(movie_ids[*id]);
        }
    }
    let mut movie_edges = Vec::new();
    for members in classes.values() {
        for (i, &u) in members.iter().enumerate() {
            for &v in &members[i + 1..] {
                movie_edges.push((u, v));
            }
        }
    }

    let layer = |name: &str, ids: &BTreeMap<String, NodeId>, edges: Vec<(NodeId, NodeId)>| {
        LayerGraph::new(LayerId::new(name)?, ids.values().copied(), edges)?
            .with_labels(ids.iter().map(|(k, &n)| (n, k.clone())))
    };
    let (a, d, m) = (LayerId::new("A")?, LayerId::new("D")?, LayerId::new("M")?);
    let mut mln = Mln::new();
    mln.add_layer(layer("A", &actor_ids, actor_edges)?)?;
    mln.add_layer(layer("D", &director_ids, director_edges)?)?;
    mln.add_layer(layer("M", &movie_ids, movie_edges)?)?;

    let mut directed_by: HashMap<&str, Vec<NodeId>> = HashMap::new();
    for (p, mv) in &directs {
        directed_by.entry(mv.as_str()).or_default().push(director_ids[p]);
    }
    let mut ad = BTreeSet::new();
    for (p, mv) in &acts {
        for &dn in directed_by.get(mv.as_str()).into_iter().flatten() {
            ad.insert((actor_ids[p], dn));
        }
    }
    let dm = directs
        .iter()
        .map(|(p, mv)| (director_ids[p], movie_ids[mv]));
    let am = acts.iter().map(|(p, mv)| (actor_ids[p], movie_ids[mv]));
    mln.add_interlayer(InterLayerEdges::new(a.clone(), d.clone(), ad)?)?;
    mln.add_interlayer(InterLayerEdges::new(d, m.clone(), dm)?)?;
    mln.add_interlayer(InterLayerEdges::new(a, m, am)?)?;
    Ok(mln)
}

const MISSING: &str = "\\N";

struct Table {
    path: String,
    header: HashMap<String, usize>,
    rows: Vec<(usize, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let label = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .quoting(false)
            .flexible(true)
            .from_path(path)
            .map_err(|e| csv_error(&label, e))?;
        let header = reader
            .headers()
            .map_err(|e| csv_error(&label, e))?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_string(), i))
            .collect();
        let mut rows = Vec::new();
        for (i, r) in reader.records().enumerate() {
            rows.push((i + 2, r.map_err(|e| csv_error(&label, e))?));
        }
        Ok(Table {
            path: label,
            header,
            rows,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header
            .get(name)
            .copied()
            .ok_or_else(|| Error::parse(&self.path, 1, format!("missing column {name}")))
    }

    fn field<'r>(&self, row: &'r csv::StringRecord, line: usize, col: usize) -> Result<&'r str> {
        row.get(col)
            .ok_or_else(|| Error::parse(&self.path, line, "row is shorter than the header"))
    }

    fn pairs(&self) -> Result<Vec<(String, String)>> {
        let (p, m) = (self.column("nconst")?, self.column("tconst")?);
        self.rows
            .iter()
            .map(|(ln, r)| {
                Ok((
                    self.field(r, *ln, p)?.to_string(),
                    self.field(r, *ln, m)?.to_string(),
                ))
            })
            .collect()
    }
}

fn csv_error(path: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

/// Reads the four TSV tables. Columns are located by header name
/// (`tconst primaryTitle genres averageRating`, `nconst primaryName`,
/// `nconst tconst`); other columns are ignored and `\N` marks a missing value.
pub fn read_records(movies: &Path, people: &Path, acts: &Path, directs: &Path) -> Result<ImdbRecords> {
    let t = Table::read(movies)?;
    let (id, title, genres, rating) = (
        t.column("tconst")?,
        t.column("primaryTitle")?,
        t.column("genres")?,
        t.column("averageRating")?,
    );
    let mut out = ImdbRecords::default();
    for (ln, r) in &t.rows {
        let g = t.field(r, *ln, genres)?;
        let rt = t.field(r, *ln, rating)?;
        out.movies.push(Movie {
            id: t.field(r, *ln, id)?.to_string(),
            title: t.field(r, *ln, title)?.to_string(),
            genres: if g == MISSING || g.is_empty() {
                BTreeSet::new()
            } else {
                g.split(',').map(|s| s.trim().to_string()).collect()
            },
            rating: if rt == MISSING || rt.is_empty() {
                None
            } else {
                Some(rt.parse::<f64>().map_err(|_| {
                    Error::parse(&t.path, *ln, format!("invalid rating {rt:?}"))
                })?)
            },
        });
    }
    let t = Table::read(people)?;
    let (id, name) = (t.column("nconst")?, t.column("primaryName")?);
    for (ln, r) in &t.rows {
        out.people.push(Person {
            id: t.field(r, *ln, id)?.to_string(),
            name: t.field(r, *ln, name)?.to_string(),
        });
    }
    out.acts_in = Table::read(acts)?.pairs()?;
    out.directs = Table::read(directs)?.pairs()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn movie(id: &str, genres: &[&str], rating: Option<f64>) -> Movie {
        Movie {
            id: id.into(),
            title: id.to_uppercase(),
            genres: genres.iter().map(|s| s.to_string()).collect(),
            rating,
        }
    }

    fn person(id: &str) -> Person {
        Person {
            id: id.into(),
            name: id.to_uppercase(),
        }
    }

    fn rows(r: &[(&str, &str)]) -> Vec<(String, String)> {
        r.iter().map(|&(a, b)| (a.into(), b.into())).collect()
    }

    fn layer<'a>(mln: &'a Mln, name: &str) -> &'a LayerGraph {
        mln.layer(&LayerId::new(name).unwrap()).unwrap()
    }

    #[test]
    fn rating_classes() {
        assert_eq!(rating_class(7.9), Some(3));
        assert_eq!(rating_class(7.999), Some(3));
        assert_eq!(rating_class(8.0), Some(4));
        assert_eq!(rating_class(10.0), Some(4));
        assert_eq!(rating_class(0.0), Some(0));
        assert_eq!(rating_class(1.99), Some(0));
        assert_eq!(rating_class(10.1), None);
        assert_eq!(rating_class(-0.5), None);
        assert_eq!(rating_class(f64::NAN), None);
    }

    #[test]
    fn overlap_formulas() {
        let set = |g: &[&str]| g.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        let a = set(&["Drama", "Crime"]);
        let b = set(&["Drama"]);
        assert_eq!(genre_overlap(&a, &b, GenreOverlap::MinDenominator), 1.0);
        assert_eq!(genre_overlap(&a, &b, GenreOverlap::Jaccard), 0.5);
        assert_eq!(genre_overlap(&a, &set(&[]), GenreOverlap::MinDenominator), 0.0);
    }

    #[test]
    fn layer_rules() {
        let records = ImdbRecords {
            movies: vec![
                movie("t1", &["Drama", "Crime"], Some(7.9)),
                movie("t2", &["Drama"], Some(8.0)),
                movie("t3", &["Comedy"], Some(6.5)),
                movie("t4", &[], None),
            ],
            people: vec![person("n1"), person("n2"), person("n3"), person("n4"), person("n5")],
            acts_in: rows(&[("n1", "t1"), ("n2", "t1"), ("n3", "t2")]),
            directs: rows(&[("n4", "t1"), ("n5", "t2")]),
        };
        let mln = ingest_imdb(&records, IngestOptions::default()).unwrap();
        let (a, d, m) = (layer(&mln, "A"), layer(&mln, "D"), layer(&mln, "M"));
        assert_eq!((a.node_count(), a.edge_count()), (3, 1));
        assert_eq!((d.node_count(), d.edge_count()), (2, 1));
        // 7.9 and 6.5 share [6,8); 8.0 is alone; t4 is unrated
        assert_eq!((m.node_count(), m.edge_count()), (4, 1));
        assert_eq!(a.nodes()[0], NodeId(0));
        assert_eq!(d.label(NodeId(3)), Some("n4"));
        assert_eq!(m.label(NodeId(5)), Some("t1"));
        let id = |s: &str| LayerId::new(s).unwrap();
        assert_eq!(mln.interlayer(&id("A"), &id("D")).unwrap().len(), 3);
        assert_eq!(mln.interlayer(&id("D"), &id("M")).unwrap().len(), 2);
        assert_eq!(mln.interlayer(&id("A"), &id("M")).unwrap().len(), 3);

        let jaccard = IngestOptions {
            overlap: GenreOverlap::Jaccard,
            genre_threshold: 0.6,
        };
        let mln = ingest_imdb(&records, jaccard).unwrap();
        assert_eq!(layer(&mln, "D").edge_count(), 0);
    }

    #[test]
    fn integrity_errors() {
        let base = ImdbRecords {
            movies: vec![movie("t1", &["Drama"], Some(5.0))],
            people: vec![person("n1")],
            acts_in: rows(&[("n1", "t1")]),
            directs: vec![],
        };
        let mut bad = base.clone();
        bad.acts_in.push(("n9".into(), "t1".into()));
        assert!(matches!(ingest_imdb(&bad, IngestOptions::default()), Err(Error::ReferentialIntegrity(_))));
        let mut bad = base.clone();
        bad.directs.push(("n1".into(), "t9".into()));
        assert!(matches!(ingest_imdb(&bad, IngestOptions::default()), Err(Error::ReferentialIntegrity(_))));
        let mut empty = base;
        empty.movies.clear();
        assert!(matches!(ingest_imdb(&empty, IngestOptions::default()), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn reads_tables_by_header() {
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, text: &str| {
            let p = dir.path().join(name);
            std::fs::write(&p, text).unwrap();
            p
        };
        let movies = write(
            "movies.tsv",
            "tconst\ttitleType\tprimaryTitle\tgenres\taverageRating\nt1\tmovie\tA \"quoted\" title\tDrama,Crime\t7.9\nt2\tmovie\tOther\t\\N\t\\N\n",
        );
        let people = write("people.tsv", "nconst\tprimaryName\nn1\tSomeone\n");
        let acts = write("acts.tsv", "tconst\tnconst\nt1\tn1\n");
        let directs = write("directs.tsv", "nconst\ttconst\n");
        let r = read_records(&movies, &people, &acts, &directs).unwrap();
        assert_eq!(r.movies[0].title, "A \"quoted\" title");
        assert_eq!(r.movies[0].genres.len(), 2);
        assert_eq!(r.movies[1].rating, None);
        assert!(r.movies[1].genres.is_empty());
        assert_eq!(r.acts_in, rows(&[("n1", "t1")]));
        let bad = write("bad.tsv", "nconst\n");
        assert!(matches!(read_records(&movies, &bad, &acts, &directs), Err(Error::Parse { .. })));
    }
}
