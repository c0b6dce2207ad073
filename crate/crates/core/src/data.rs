//! Observed-data containers, CSV ingestion and cross-fitting fold plans.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreatmentKind {
    Binary,
    Continuous,
}

/// One draw of (X, A, Y).
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: Vec<f64>,
    pub a: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<Observation>,
    kind: TreatmentKind,
    dim: usize,
}

impl Dataset {
    /// Validates finiteness, a shared covariate dimension and, for binary
    /// data, that every treatment is exactly 0 or 1.
    ///
    /// The "at least two distinct treatment values" rule for continuous data
    /// is checked at ingestion (see [`load_csv`]) and by
    /// [`Dataset::check_treatment_support`], so that degenerate designs can
    /// still be built programmatically.
    pub fn new(rows: Vec<Observation>, kind: TreatmentKind) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::Data("dataset must contain at least one row".into()))?;
        let dim = first.x.len();
        if dim == 0 {
            return Err(Error::Data("covariate dimension must be at least 1".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            let r = i + 1;
            if row.x.len() != dim {
                return Err(Error::Data(format!("row {r} has {} covariates, expected {dim}", row.x.len())));
            }
            for (j, v) in row.x.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: r, column: format!("x{}", j + 1) });
                }
            }
            if !row.a.is_finite() {
                return Err(Error::NonFinite { row: r, column: "a".into() });
            }
            if !row.y.is_finite() {
                return Err(Error::NonFinite { row: r, column: "y".into() });
            }
            if kind == TreatmentKind::Binary && row.a != 0.0 && row.a != 1.0 {
                return Err(Error::NonBinaryTreatment { row: r });
            }
        }
        Ok(Self { rows, kind, dim })
    }

    pub fn check_treatment_support(&self) -> Result<()> {
        if self.kind == TreatmentKind::Continuous {
            let a0 = self.rows[0].a;
            if self.rows.iter().all(|r| r.a == a0) {
                return Err(Error::Data("continuous treatment needs at least 2 distinct values".into()));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn kind(&self) -> TreatmentKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn treatments(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.a).collect()
    }

    pub fn outcomes(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y).collect()
    }

    /// Same rows, reinterpreted under another treatment kind.
    pub fn with_kind(&self, kind: TreatmentKind) -> Result<Dataset> {
        Dataset::new(self.rows.clone(), kind)
    }

    /// Copy of the dataset with every outcome mapped through `f`.
    pub fn map_outcomes(&self, f: impl Fn(f64) -> f64) -> Dataset {
        let rows = self.rows.iter().map(|r| Observation { x: r.x.clone(), a: r.a, y: f(r.y) }).collect();
        Dataset { rows, kind: self.kind, dim: self.dim }
    }
}

/// Reads a `x1,...,xd,a,y` CSV. Columns are matched by header name; lines
/// starting with `#` are metadata and skipped.
pub fn load_csv(path: impl AsRef<Path>, kind: TreatmentKind) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, kind)
}

pub fn read_csv<R: std::io::Read>(reader: R, kind: TreatmentKind) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();

    let find = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let mut x_cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(pos, h)| h.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()).map(|idx| (idx, pos)))
        .collect();
    x_cols.sort_unstable();
    if x_cols.is_empty() {
        return Err(Error::MissingColumn("x1".into()));
    }
    for (expect, &(idx, _)) in (1..).zip(&x_cols) {
        if idx != expect {
            return Err(Error::MissingColumn(format!("x{expect}")));
        }
    }
    let a_col = find("a")?;
    let y_col = find("y")?;

    let parse = |rec: &csv::StringRecord, pos: usize, row: usize, column: &str| -> Result<f64> {
        let raw = rec.get(pos).unwrap_or("");
        let v: f64 =
            raw.parse().map_err(|_| Error::NonNumeric { row, column: column.to_string(), value: raw.to_string() })?;
        if !v.is_finite() {
            return Err(Error::NonFinite { row, column: column.to_string() });
        }
        Ok(v)
    };

    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let x =
            x_cols.iter().map(|&(idx, pos)| parse(&rec, pos, row, &format!("x{idx}"))).collect::<Result<Vec<_>>>()?;
        let a = parse(&rec, a_col, row, "a")?;
        let y = parse(&rec, y_col, row, "y")?;
        if kind == TreatmentKind::Binary && a != 0.0 && a != 1.0 {
            return Err(Error::NonBinaryTreatment { row });
        }
        rows.push(Observation { x, a, y });
    }
    let ds = Dataset::new(rows, kind)?;
    ds.check_treatment_support()?;
    Ok(ds)
}

/// Writes the dataset with shortest round-trip float formatting, so that
/// reloading reproduces every value bit for bit. `comments` become leading
/// `# ` lines.
pub fn write_csv<W: Write>(ds: &Dataset, mut out: W, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let header: Vec<String> = (1..=ds.dim).map(|j| format!("x{j}")).chain(["a".to_string(), "y".to_string()]).collect();
    writeln!(out, "{}", header.join(","))?;
    for r in &ds.rows {
        let mut line = String::new();
        for v in &r.x {
            line.push_str(&format!("{v:?},"));
        }
        line.push_str(&format!("{:?},{:?}", r.a, r.y));
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Assignment of `n` observations to `k` cross-fitting folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldPlan {
    n: usize,
    k: usize,
    seed: u64,
    assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn fold_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    /// Rows evaluated in fold `j`.
    pub fn eval_indices(&self, j: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignment[i] == j).collect()
    }

    /// Rows used to train the predictors applied to fold `j`.
    pub fn train_indices(&self, j: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignment[i] != j).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Balanced random partition: a seeded shuffle dealt round-robin.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(Error::Config(format!("fold count must satisfy 2 <= k <= n (k={k}, n={n})")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok(FoldPlan { n, k, seed, assignment })
}
