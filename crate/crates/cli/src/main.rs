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

//! `hemln`: structure-preserving k-community detection from the shell.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for data errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hemln::cbg::{build_cbg_with, linked_communities, Side};
use hemln::config::{seed_from_env, RunConfig, SEED_ENV};
use hemln::engine::{detect_k_community_with, prepare_layers};
use hemln::imdb::{self, GenreOverlap, IngestOptions};
use hemln::spec::parse_spec_file;
use hemln::{
    detect_communities, io, parse_spec, rank, validate_spec, Error, Execution, KSpec, LayerId,
    Metric, RankKey,
};

#[derive(Parser)]
#[command(name = "hemln", version, about = "k-community detection for heterogeneous multilayer networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect the 1-community of a single layer file.
    Detect {
        #[arg(long)]
        layer: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a k-community specification over an MLN directory.
    Kcommunity(KcommunityArgs),
    /// Export the weighted community bipartite graph of one layer pair.
    Cbg {
        #[arg(long)]
        mln: PathBuf,
        /// Layer pair, e.g. `A,D`.
        #[arg(long)]
        pair: String,
        #[arg(long, default_value = "e")]
        metric: String,
        #[arg(long, default_value_t = hemln::community::DEFAULT_HUB_QUANTILE)]
        hub_quantile: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Order the tuples of a `result.jsonl` file.
    Rank {
        #[arg(long)]
        result: PathBuf,
        /// min_size, sum_size, min_density or sum_raw_pairs
        #[arg(long)]
        key: String,
        /// MLN directory; required for size and density keys.
        #[arg(long)]
        mln: Option<PathBuf>,
        /// Directory holding `<ID>.membership.tsv`; defaults to the result's directory.
        #[arg(long)]
        memberships: Option<PathBuf>,
    },
    /// Build an actor/director/movie MLN from IMDb-style TSV tables.
    IngestImdb {
        #[arg(long)]
        movies: PathBuf,
        #[arg(long)]
        people: PathBuf,
        #[arg(long)]
        acts: PathBuf,
        #[arg(long)]
        directs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        genre_threshold: f64,
        /// Use Jaccard similarity instead of the min-denominator overlap.
        #[arg(long)]
        jaccard: bool,
    },
}

#[derive(Args)]
struct KcommunityArgs {
    /// `key = value` file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mln: Option<PathBuf>,
    #[arg(long, conflicts_with = "spec_file")]
    spec: Option<String>,
    /// One specification per line, `;` comments.
    #[arg(long)]
    spec_file: Option<PathBuf>,
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    hub_quantile: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run everything on the calling thread.
    #[arg(long)]
    sequential: bool,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Detect { layer, seed, out } => detect(&layer, seed, &out),
        Command::Kcommunity(args) => kcommunity(args),
        Command::Cbg {
            mln,
            pair,
            metric,
            hub_quantile,
            seed,
            out,
        } => cbg(&mln, &pair, &metric, hub_quantile, seed, out.as_deref()),
        Command::Rank {
            result,
            key,
            mln,
            memberships,
        } => rank_cmd(&result, &key, mln.as_deref(), memberships.as_deref()),
        Command::IngestImdb {
            movies,
            people,
            acts,
            directs,
            out,
            genre_threshold,
            jaccard,
        } => {
            let records = imdb::read_records(&movies, &people, &acts, &directs)?;
            let opts = IngestOptions {
                genre_threshold,
                overlap: if jaccard {
                    GenreOverlap::Jaccard
                } else {
                    GenreOverlap::MinDenominator
                },
            };
            let mln = imdb::ingest_imdb(&records, opts)?;
            io::save_mln(&mln, &out)?;
            for g in mln.layers() {
                eprintln!("{}: {} nodes, {} edges", g.id(), g.node_count(), g.edge_count());
            }
            Ok(())
        }
    }
}

fn effective_seed(flag: Option<u64>, fallback: u64) -> Result<u64, Error> {
    Ok(seed_from_env(std::env::var(SEED_ENV).ok().as_deref())?.unwrap_or(flag.unwrap_or(fallback)))
}

fn parse_metric(s: &str) -> Result<Metric, Failure> {
    s.parse().map_err(|e: Error| Failure::Usage(e.to_string()))
}

fn detect(layer: &Path, seed: Option<u64>, out: &Path) -> Outcome {
    let g = io::load_layer(layer)?;
    let m = detect_communities(&g, effective_seed(seed, 0)?)?;
    io::write_file(out, &io::render_membership(&m))?;
    eprintln!("{}: {} communities", g.id(), m.community_count());
    Ok(())
}

fn kcommunity(args: KcommunityArgs) -> Outcome {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::parse(&io::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &args.metric {
        cfg.default_metric = parse_metric(m)?;
    }
    if let Some(q) = args.hub_quantile {
        cfg.hub_quantile = q;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.mln = args.mln.or(cfg.mln);
    cfg.out = args.out.or(cfg.out);
    cfg.spec_text = args.spec.or(cfg.spec_text);
    cfg.validate()?;
    cfg.apply_env()?;

    let mln_dir = cfg.mln.ok_or_else(|| Failure::Usage("--mln is required".into()))?;
    let out = cfg.out.ok_or_else(|| Failure::Usage("--out is required".into()))?;
    let specs: Vec<KSpec> = match (&args.spec_file, &cfg.spec_text) {
        (Some(path), _) => {
            parse_spec_file(&io::read_to_string(path)?, &path.display().to_string())?
        }
        (None, Some(text)) => vec![parse_spec(text)?],
        (None, None) => return Err(Failure::Usage("--spec or --spec-file is required".into())),
    };
    if specs.is_empty() {
        return Err(Error::EmptySpec.into());
    }
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };

    let mln = io::load_mln(&mln_dir)?;
    let validated = specs
        .iter()
        .map(|s| validate_spec(s, &mln))
        .collect::<Result<Vec<_>, _>>()?;
    let mut needed: Vec<LayerId> = validated.iter().flat_map(|v| v.layers().to_vec()).collect();
    needed.sort();
    needed.dedup();
    let given = io::load_memberships(&mln_dir, &mln)?
        .into_iter()
        .filter(|(l, _)| needed.contains(l))
        .collect::<BTreeMap<_, _>>();
    let table = prepare_layers(&mln, &needed, given, cfg.seed, cfg.hub_quantile, exec)?;
    for (l, d) in &table {
        io::write_file(&io::membership_path(&out, l), &io::render_membership(&d.membership))?;
    }
    for (i, v) in validated.iter().enumerate() {
        let result = detect_k_community_with(&mln, &table, v, cfg.default_metric, exec)?;
        let dir = if validated.len() == 1 {
            out.clone()
        } else {
            out.join(format!("spec_{}", i + 1))
        };
        io::save_result(&dir, &result)?;
        let total = result.tuples.iter().filter(|t| t.is_total()).count();
        eprintln!(
            "{}: {} tuples ({} total, {} partial) -> {}",
            v.spec(),
            result.tuples.len(),
            total,
            result.tuples.len() - total,
            dir.display()
        );
    }
    Ok(())
}

fn cbg(
    mln_dir: &Path,
    pair: &str,
    metric: &str,
    hub_quantile: f64,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Outcome {
    let metric = parse_metric(metric)?;
    let (l, r) = pair
        .split_once(',')
        .ok_or_else(|| Failure::Usage(format!("--pair expects L1,L2, got {pair:?}")))?;
    let (l, r) = (LayerId::new(l.trim())?, LayerId::new(r.trim())?);
    let mln = io::load_mln(mln_dir)?;
    let given = io::load_memberships(mln_dir, &mln)?;
    let table = prepare_layers(
        &mln,
        &[l.clone(), r.clone()],
        given,
        effective_seed(seed, 0)?,
        hub_quantile,
        Execution::default(),
    )?;
    let (ld, rd) = (&table[&l], &table[&r]);
    let u_left = linked_communities(&mln, &l, &r, &ld.membership, &rd.membership, None)?;
    let u_right = linked_communities(&mln, &r, &l, &rd.membership, &ld.membership, None)?;
    let g = build_cbg_with(
        &mln,
        &l,
        &r,
        &u_left,
        &u_right,
        Side {
            membership: &ld.membership,
            summaries: &ld.summaries,
        },
        Side {
            membership: &rd.membership,
            summaries: &rd.summaries,
        },
        metric,
        Execution::default(),
    )?;
    let text = io::render_cbg(&g);
    match out {
        Some(p) => io::write_file(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn rank_cmd(result: &Path, key: &str, mln: Option<&Path>, memberships: Option<&Path>) -> Outcome {
    let key: RankKey = key.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
    let tuples = io::parse_jsonl(&io::read_to_string(result)?, &result.display().to_string())?;
    let table = match mln {
        Some(dir) => {
            let mln = io::load_mln(dir)?;
            let mdir = memberships
                .map(Path::to_path_buf)
                .or_else(|| result.parent().map(Path::to_path_buf))
                .unwrap_or_default();
            let given = io::load_memberships(&mdir, &mln)?;
            let layers: Vec<LayerId> = given.keys().cloned().collect();
            prepare_layers(
                &mln,
                &layers,
                given,
                0,
                hemln::community::DEFAULT_HUB_QUANTILE,
                Execution::default(),
            )?
        }
        None if key == RankKey::SumRawPairs => Default::default(),
        None => return Err(Failure::Usage(format!("--mln is required for key {key}"))),
    };
    let ranked = rank(&tuples, &table, key)?;
    print!("{}", io::render_result(&ranked));
    Ok(())
}
