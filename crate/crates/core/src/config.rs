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

//! Run configuration: `key = value` files mirroring the command-line flags.
//!
//! ```text
//! ; comment
//! metric = d
//! seed = 7
//! hub_quantile = 0.8
//! mln = data/imdb
//! out = runs/ad
//! spec = A #(A,D) D
//! ```

use std::path::PathBuf;

use crate::cbg::Metric;
use crate::community::DEFAULT_HUB_QUANTILE;
use crate::error::{Error, Result};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "MLN_SEED";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub default_metric: Metric,
    pub seed: u64,
    pub hub_quantile: f64,
    pub mln: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub spec_text: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            default_metric: Metric::Edges,
            seed: 0,
            hub_quantile: DEFAULT_HUB_QUANTILE,
            mln: None,
            out: None,
            spec_text: None,
        }
    }
}

impl RunConfig {
    /// Parses a config file on top of the defaults. Lines starting with `;`
    /// or `#` are comments; `#` elsewhere belongs to the value.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with(';') || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| Error::Config(format!("line {}: {msg}", i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad("expected key = value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "metric" => c.default_metric = value.parse().map_err(|e: Error| bad(e.to_string()))?,
                "seed" => c.seed = value.parse().map_err(|_| bad(format!("invalid seed {value:?}")))?,
                "hub_quantile" => {
                    c.hub_quantile = value
                        .parse()
                        .map_err(|_| bad(format!("invalid quantile {value:?}")))?
                }
                "mln" => c.mln = Some(PathBuf::from(value)),
                "out" => c.out = Some(PathBuf::from(value)),
                "spec" => c.spec_text = Some(value.to_string()),
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hub_quantile > 0.0 && self.hub_quantile <= 1.0) {
            return Err(Error::InvalidQuantile(self.hub_quantile));
        }
        Ok(())
    }

    /// Applies `MLN_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Some(seed) = seed_from_env(std::env::var(SEED_ENV).ok().as_deref())? {
            self.seed = seed;
        }
        Ok(())
    }
}

/// Parses the value of `MLN_SEED`; empty counts as unset.
pub fn seed_from_env(value: Option<&str>) -> Result<Option<u64>> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
    }
}
