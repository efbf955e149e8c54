//! Aggregated comparison counts and the judgement CSV format.
//!
//! The CSV header is `judge_id,ward_i,ward_j,outcome,timestamp`; `outcome` is
//! one of `i`, `j`, `tie` or `skip` and ward labels resolve through a label
//! table (usually the [`WardGraph`](crate::graph::WardGraph) labels).

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of one judgement, relative to the presented `(ward_i, ward_j)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    /// `ward_i` judged higher.
    I,
    /// `ward_j` judged higher.
    J,
    Tie,
    Skip,
}

impl std::str::FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "i" => Ok(Outcome::I),
            "j" => Ok(Outcome::J),
            "tie" => Ok(Outcome::Tie),
            "skip" => Ok(Outcome::Skip),
            other => Err(Error::InvalidParameter(format!("unknown outcome `{other}`"))),
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::I => "i",
            Outcome::J => "j",
            Outcome::Tie => "tie",
            Outcome::Skip => "skip",
        })
    }
}

/// One raw judgement event with ward indices resolved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Judgement {
    pub judge_id: String,
    pub ward_i: usize,
    pub ward_j: usize,
    pub outcome: Outcome,
    pub timestamp: String,
}

/// Win counts `y[i][j]`, symmetric tie counts `t[i][j]` and skipped
/// judgements over `n` wards. Skips never enter the likelihood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonDataset {
    n_wards: usize,
    wins: Vec<u32>,
    ties: Vec<u32>,
    skips: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    events: Vec<Judgement>,
}

impl ComparisonDataset {
    pub fn new(n_wards: usize) -> Self {
        Self {
            n_wards,
            wins: vec![0; n_wards * n_wards],
            ties: vec![0; n_wards * n_wards],
            skips: 0,
            events: Vec::new(),
        }
    }

    /// Builds a dataset from dense row-major count matrices.
    pub fn from_counts(n_wards: usize, wins: Vec<u32>, ties: Vec<u32>, skips: u64) -> Result<Self> {
        let expected = n_wards * n_wards;
        for len in [wins.len(), ties.len()] {
            if len != expected {
                return Err(Error::DimensionMismatch { expected, got: len });
            }
        }
        let data = Self {
            n_wards,
            wins,
            ties,
            skips,
            events: Vec::new(),
        };
        data.validate()?;
        Ok(data)
    }

    /// Folds raw events into counts, keeping the events.
    pub fn from_judgements(n_wards: usize, events: Vec<Judgement>) -> Result<Self> {
        let mut data = Self::new(n_wards);
        for e in &events {
            data.record(e.ward_i, e.ward_j, e.outcome)?;
        }
        data.events = events;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_wards;
        for i in 0..n {
            if self.wins[i * n + i] != 0 || self.ties[i * n + i] != 0 {
                return Err(Error::InvalidDataset(format!("non-zero diagonal at ward {i}")));
            }
            for j in (i + 1)..n {
                if self.ties[i * n + j] != self.ties[j * n + i] {
                    return Err(Error::InvalidDataset(format!(
                        "tie counts for wards {i} and {j} are not symmetric"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Adds one judgement. Ties are stored in both `t[i][j]` and `t[j][i]`.
    pub fn record(&mut self, i: usize, j: usize, outcome: Outcome) -> Result<()> {
        let n = self.n_wards;
        for index in [i, j] {
            if index >= n {
                return Err(Error::WardOutOfRange { index, n_wards: n });
            }
        }
        if i == j {
            return Err(Error::InvalidPair(i));
        }
        match outcome {
            Outcome::I => self.wins[i * n + j] += 1,
            Outcome::J => self.wins[j * n + i] += 1,
            Outcome::Tie => {
                self.ties[i * n + j] += 1;
                self.ties[j * n + i] += 1;
            }
            Outcome::Skip => self.skips += 1,
        }
        Ok(())
    }

    pub fn n_wards(&self) -> usize {
        self.n_wards
    }

    /// Times `i` was judged higher than `j`.
    pub fn wins(&self, i: usize, j: usize) -> u32 {
        self.wins[i * self.n_wards + j]
    }

    pub fn ties(&self, i: usize, j: usize) -> u32 {
        self.ties[i * self.n_wards + j]
    }

    /// Informative comparisons of the unordered pair: `y_ij + y_ji + t_ij`.
    pub fn n_compared(&self, i: usize, j: usize) -> u32 {
        self.wins(i, j) + self.wins(j, i) + self.ties(i, j)
    }

    pub fn skips(&self) -> u64 {
        self.skips
    }

    pub fn events(&self) -> &[Judgement] {
        &self.events
    }

    pub fn total_wins(&self) -> u64 {
        self.wins.iter().map(|&v| v as u64).sum()
    }

    /// Number of tie events (half the sum of the symmetric tie matrix).
    pub fn tie_events(&self) -> u64 {
        self.ties.iter().map(|&v| v as u64).sum::<u64>() / 2
    }

    /// Comparisons entering the likelihood (skips excluded).
    pub fn n_comparisons(&self) -> u64 {
        self.total_wins() + self.tie_events()
    }

    /// All recorded judgements including skips.
    pub fn total_judgements(&self) -> u64 {
        self.n_comparisons() + self.skips
    }

    /// Fraction of likelihood comparisons that were ties; zero when empty.
    pub fn tie_share(&self) -> f64 {
        let n = self.n_comparisons();
        if n == 0 {
            0.0
        } else {
            self.tie_events() as f64 / n as f64
        }
    }

    pub fn is_empty(&self) -> bool {
        self.n_comparisons() == 0
    }

    /// Ordered pairs `(i, j)` with `y_ij + t_ij ≥ 1` and that count.
    pub fn observed_pairs(&self) -> Vec<(usize, usize, u32)> {
        let n = self.n_wards;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let b = self.wins(i, j) + self.ties(i, j);
                if b > 0 {
                    out.push((i, j, b));
                }
            }
        }
        out
    }

    pub fn wins_matrix(&self) -> &[u32] {
        &self.wins
    }

    pub fn ties_matrix(&self) -> &[u32] {
        &self.ties
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct CsvRow {
    judge_id: String,
    ward_i: String,
    ward_j: String,
    outcome: String,
    timestamp: String,
}

/// Reads judgement events, resolving ward labels against `labels`.
pub fn read_judgements_csv<R: Read>(reader: R, labels: &[String]) -> Result<Vec<Judgement>> {
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(k, l)| (l.as_str(), k)).collect();
    let resolve = |label: &str| {
        index
            .get(label.trim())
            .copied()
            .ok_or_else(|| Error::UnknownWard(label.to_string()))
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut events = Vec::new();
    for (k, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let line = k + 2;
        let row = row?;
        let outcome: Outcome = row.outcome.parse().map_err(|e: Error| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let ward_i = resolve(&row.ward_i)?;
        let ward_j = resolve(&row.ward_j)?;
        if ward_i == ward_j {
            return Err(Error::Parse {
                line,
                message: format!("ward `{}` compared with itself", row.ward_i),
            });
        }
        events.push(Judgement {
            judge_id: row.judge_id,
            ward_i,
            ward_j,
            outcome,
            timestamp: row.timestamp,
        });
    }
    Ok(events)
}

/// Reads a judgement CSV straight into a dataset over `labels.len()` wards.
pub fn read_comparisons_csv<R: Read>(reader: R, labels: &[String]) -> Result<ComparisonDataset> {
    let events = read_judgements_csv(reader, labels)?;
    ComparisonDataset::from_judgements(labels.len(), events)
}

pub fn write_judgements_csv<W: Write>(writer: W, events: &[Judgement], labels: &[String]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for e in events {
        let label = |k: usize| {
            labels
                .get(k)
                .cloned()
                .ok_or(Error::WardOutOfRange { index: k, n_wards: labels.len() })
        };
        wtr.serialize(CsvRow {
            judge_id: e.judge_id.clone(),
            ward_i: label(e.ward_i)?,
            ward_j: label(e.ward_j)?,
            outcome: e.outcome.to_string(),
            timestamp: e.timestamp.clone(),
        })?;
    }
    wtr.flush()?;
    Ok(())
}
