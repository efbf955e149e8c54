//! Ward adjacency graphs, the adjacency CSV format and optional GeoJSON
//! geometry used for display.

use std::collections::{HashMap, HashSet};
use std::io::Read;

use faer::Mat;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Wards as graph nodes with edges between neighbouring wards.
#[derive(Clone, Debug, PartialEq)]
pub struct WardGraph {
    labels: Vec<String>,
    adjacency: Vec<u8>,
    geometry: Vec<Option<Value>>,
}

fn check_labels(labels: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::InvalidGraph(format!("duplicate ward label `{l}`")));
        }
    }
    Ok(())
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    let width = n.to_string().len().max(2);
    (1..=n).map(|k| format!("{prefix}{k:0width$}")).collect()
}

impl WardGraph {
    pub fn from_edges<I>(labels: Vec<String>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        check_labels(&labels)?;
        let n = labels.len();
        let mut adjacency = vec![0u8; n * n];
        for (a, b) in edges {
            for index in [a, b] {
                if index >= n {
                    return Err(Error::WardOutOfRange { index, n_wards: n });
                }
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at `{}`", labels[a])));
            }
            adjacency[a * n + b] = 1;
            adjacency[b * n + a] = 1;
        }
        Ok(Self {
            geometry: vec![None; n],
            labels,
            adjacency,
        })
    }

    /// Builds a graph from a dense 0/1 matrix, rejecting asymmetric input.
    pub fn from_adjacency(labels: Vec<String>, matrix: &[Vec<u8>]) -> Result<Self> {
        check_labels(&labels)?;
        let n = labels.len();
        if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: matrix.len(),
            });
        }
        let mut adjacency = vec![0u8; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = matrix[i][j];
                if v > 1 {
                    return Err(Error::InvalidGraph(format!("entry ({i}, {j}) is not 0/1")));
                }
                if v != matrix[j][i] {
                    return Err(Error::InvalidGraph(format!(
                        "adjacency is not symmetric at ({i}, {j})"
                    )));
                }
                if i == j && v != 0 {
                    return Err(Error::InvalidGraph(format!("non-zero diagonal at {i}")));
                }
                adjacency[i * n + j] = v;
            }
        }
        Ok(Self {
            geometry: vec![None; n],
            labels,
            adjacency,
        })
    }

    /// Graph with no edges.
    pub fn empty(n: usize) -> Self {
        Self::from_edges(numbered("W", n), []).expect("generated labels are unique")
    }

    pub fn path(n: usize) -> Self {
        Self::from_edges(numbered("W", n), (1..n).map(|k| (k - 1, k))).expect("valid path")
    }

    pub fn cycle(n: usize) -> Self {
        let mut edges: Vec<_> = (1..n).map(|k| (k - 1, k)).collect();
        if n > 2 {
            edges.push((n - 1, 0));
        }
        Self::from_edges(numbered("W", n), edges).expect("valid cycle")
    }

    pub fn star(n: usize) -> Self {
        Self::from_edges(numbered("W", n), (1..n).map(|k| (0, k))).expect("valid star")
    }

    /// Rook-adjacency lattice with `rows × cols` wards, numbered row by row.
    pub fn grid(rows: usize, cols: usize) -> Self {
        Self::lattice(rows, cols, rows * cols, numbered("W", rows * cols))
    }

    /// The first `n` cells of the most nearly square lattice holding `n` wards.
    pub fn near_square_grid(n: usize) -> Self {
        let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
        let rows = n.div_ceil(cols);
        Self::lattice(rows, cols, n, numbered("W", n))
    }

    fn lattice(rows: usize, cols: usize, n: usize, labels: Vec<String>) -> Self {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let k = r * cols + c;
                if k >= n {
                    continue;
                }
                if c + 1 < cols && k + 1 < n {
                    edges.push((k, k + 1));
                }
                if k + cols < n {
                    edges.push((k, k + cols));
                }
            }
        }
        Self::from_edges(labels, edges).expect("valid lattice")
    }

    /// A 95-ward planar stand-in for a county map: a 10×10 lattice missing
    /// its last five cells, split into four boroughs by quadrant. Returns the
    /// graph together with each ward's borough.
    pub fn surrogate_county() -> (Self, Vec<String>) {
        const ROWS: usize = 10;
        const COLS: usize = 10;
        const N: usize = 95;
        let mut labels = Vec::with_capacity(N);
        let mut regions = Vec::with_capacity(N);
        let mut counters: HashMap<&str, usize> = HashMap::new();
        for k in 0..N {
            let (r, c) = (k / COLS, k % COLS);
            let region = match (r < ROWS / 2, c < COLS / 2) {
                (true, true) => "Northwest",
                (true, false) => "Northeast",
                (false, true) => "Southwest",
                (false, false) => "Southeast",
            };
            let count = counters.entry(region).or_insert(0);
            *count += 1;
            labels.push(format!("{region} {:02}", count));
            regions.push(region.to_string());
        }
        (Self::lattice(ROWS, COLS, N, labels), regions)
    }

    /// Reads a `ward_a,ward_b` edge list. With `labels` the ward table is
    /// fixed and every label must be known; otherwise wards are numbered in
    /// order of first appearance.
    pub fn read_adjacency_csv<R: Read>(reader: R, labels: Option<Vec<String>>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Edge {
            ward_a: String,
            ward_b: String,
        }
        let fixed = labels.is_some();
        let mut labels = labels.unwrap_or_default();
        check_labels(&labels)?;
        let mut index: HashMap<String, usize> =
            labels.iter().enumerate().map(|(k, l)| (l.clone(), k)).collect();
        let mut edges = Vec::new();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for (k, row) in rdr.deserialize::<Edge>().enumerate() {
            let row = row?;
            let mut lookup = |label: String| -> Result<usize> {
                if let Some(&i) = index.get(&label) {
                    return Ok(i);
                }
                if fixed {
                    return Err(Error::UnknownWard(label));
                }
                labels.push(label.clone());
                index.insert(label, labels.len() - 1);
                Ok(labels.len() - 1)
            };
            let a = lookup(row.ward_a)?;
            let b = lookup(row.ward_b)?;
            if a == b {
                return Err(Error::Parse {
                    line: k + 2,
                    message: "self-loop in adjacency list".into(),
                });
            }
            edges.push((a, b));
        }
        Self::from_edges(labels, edges)
    }

    /// Attaches polygon geometry from a GeoJSON FeatureCollection whose
    /// features carry a `name` property. Returns how many wards matched.
    pub fn attach_geojson(&mut self, collection: &Value) -> Result<usize> {
        let features = collection
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::InvalidGraph("GeoJSON has no `features` array".into()))?;
        let mut matched = 0;
        for feature in features {
            let Some(name) = feature.pointer("/properties/name").and_then(Value::as_str) else {
                continue;
            };
            if let Some(k) = self.index_of(name) {
                self.geometry[k] = feature.get("geometry").cloned();
                matched += 1;
            }
        }
        Ok(matched)
    }

    pub fn to_geojson(&self) -> Value {
        let features: Vec<Value> = self
            .labels
            .iter()
            .zip(&self.geometry)
            .map(|(name, geometry)| {
                json!({
                    "type": "Feature",
                    "properties": { "name": name },
                    "geometry": geometry.clone().unwrap_or(Value::Null),
                })
            })
            .collect();
        json!({ "type": "FeatureCollection", "features": features })
    }

    pub fn n_wards(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn geometry(&self, ward: usize) -> Option<&Value> {
        self.geometry.get(ward).and_then(Option::as_ref)
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a * self.n_wards() + b] == 1
    }

    pub fn degree(&self, ward: usize) -> usize {
        let n = self.n_wards();
        self.adjacency[ward * n..(ward + 1) * n].iter().map(|&v| v as usize).sum()
    }

    /// Undirected edges with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n_wards();
        let mut out = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if self.is_adjacent(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn adjacency_matrix(&self) -> Mat<f64> {
        let n = self.n_wards();
        Mat::from_fn(n, n, |i, j| self.adjacency[i * n + j] as f64)
    }

    pub fn write_adjacency_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["ward_a", "ward_b"])?;
        for (a, b) in self.edges() {
            wtr.write_record([&self.labels[a], &self.labels[b]])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
