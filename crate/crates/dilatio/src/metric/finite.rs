use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{euclid, Real};

use super::METRIC_TOL;

/// A finite set of labelled points with a distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FiniteMetricSpace<T: Real> {
    pub ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<T>>>,
    pub dmat: Vec<Vec<T>>,
}

impl<T: Real> FiniteMetricSpace<T> {
    /// Builds a space, checking that the matrix is square and finite.
    pub fn new(ids: Vec<String>, dmat: Vec<Vec<T>>) -> Result<Self> {
        let n = ids.len();
        if dmat.len() != n || dmat.iter().any(|r| r.len() != n) {
            return Err(Error::MalformedInput(format!(
                "distance matrix is not {n}x{n}"
            )));
        }
        if dmat.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::MalformedInput("non-finite distance entry".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::MalformedInput(format!("duplicate id `{id}`")));
            }
        }
        Ok(FiniteMetricSpace {
            ids,
            coords: None,
            dmat,
        })
    }

    /// Euclidean point cloud with ids `p0, p1, ...`.
    pub fn from_points(points: &[Vec<T>]) -> Self {
        Self::from_points_with(points, euclid)
    }

    /// Point cloud with an arbitrary distance function.
    pub fn from_points_with<D: Fn(&[T], &[T]) -> T>(points: &[Vec<T>], dist: D) -> Self {
        let n = points.len();
        let mut dmat = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let d = dist(&points[i], &points[j]);
                dmat[i][j] = d;
                dmat[j][i] = d;
            }
        }
        FiniteMetricSpace {
            ids: (0..n).map(|i| format!("p{i}")).collect(),
            coords: Some(points.to_vec()),
            dmat,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn d(&self, i: usize, j: usize) -> T {
        self.dmat[i][j]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.ids
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| Error::UnknownPoint(id.to_string()))
    }

    pub fn diameter(&self) -> T {
        self.dmat.iter().flatten().copied().fold(T::zero(), T::max)
    }

    /// Subspace on the given indices.
    pub fn restrict(&self, idx: &[usize]) -> Self {
        FiniteMetricSpace {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            coords: self
                .coords
                .as_ref()
                .map(|c| idx.iter().map(|&i| c[i].clone()).collect()),
            dmat: idx
                .iter()
                .map(|&i| idx.iter().map(|&j| self.dmat[i][j]).collect())
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: FiniteMetricSpace<T> =
            serde_json::from_str(s).map_err(|e| Error::MalformedInput(e.to_string()))?;
        let mut out = Self::new(raw.ids, raw.dmat)?;
        out.coords = raw.coords;
        Ok(out)
    }

    /// Header row of ids followed by the full matrix.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.ids).expect("in-memory write");
        for row in &self.dmat {
            w.write_record(row.iter().map(|x| format!("{}", x.as_f64())))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn from_csv(s: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(s.as_bytes());
        let bad = |e: csv::Error| Error::MalformedInput(e.to_string());
        let ids: Vec<String> = r.headers().map_err(bad)?.iter().map(String::from).collect();
        let mut dmat = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(bad)?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map(T::lit)
                        .map_err(|_| Error::MalformedInput(format!("bad number `{f}`")))
                })
                .collect::<Result<Vec<T>>>()?;
            dmat.push(row);
        }
        Self::new(ids, dmat)
    }
}

/// A violated metric axiom with its witness indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    NonzeroDiagonal {
        i: usize,
    },
    Negative {
        i: usize,
        j: usize,
    },
    Asymmetric {
        i: usize,
        j: usize,
    },
    /// `d(i,k) > d(i,j) + d(j,k)`
    Triangle {
        i: usize,
        j: usize,
        k: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_metric(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every violated metric axiom, each with a witness.
pub fn validate_metric<T: Real>(space: &FiniteMetricSpace<T>) -> Result<ValidationReport> {
    let n = space.dmat.len();
    if space.dmat.iter().any(|r| r.len() != n) {
        return Err(Error::MalformedInput(
            "distance matrix is not square".into(),
        ));
    }
    if space.dmat.iter().flatten().any(|x| x.is_nan()) {
        return Err(Error::MalformedInput("NaN distance entry".into()));
    }
    let tol = T::lit(METRIC_TOL);
    let d = &space.dmat;
    let mut v = Vec::new();
    for i in 0..n {
        if d[i][i].abs() > tol {
            v.push(Violation::NonzeroDiagonal { i });
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && d[i][j] < -tol {
                v.push(Violation::Negative { i, j });
            }
            if i < j && (d[i][j] - d[j][i]).abs() > tol {
                v.push(Violation::Asymmetric { i, j });
            }
        }
    }
    for i in 0..n {
        for k in i + 1..n {
            for j in 0..n {
                if j != i && j != k && d[i][k] > d[i][j] + d[j][k] + tol {
                    v.push(Violation::Triangle { i, j, k });
                }
            }
        }
    }
    Ok(ValidationReport { violations: v })
}
