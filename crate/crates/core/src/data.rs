//! Forecast datasets, CSV ingestion, and instrument construction.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{check_level, Family};

/// Aligned realizations `y`, forecasts `x` and a single state column `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastDataset {
    pub t: Vec<i64>,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// Additional named numeric columns (custom instruments, sigma recipes).
    pub extra: BTreeMap<String, Vec<f64>>,
}

impl ForecastDataset {
    pub fn new(t: Vec<i64>, y: Vec<f64>, x: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        let ds = ForecastDataset {
            t,
            y,
            x,
            z,
            extra: BTreeMap::new(),
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Dataset with time index `1..=T`.
    pub fn from_series(y: Vec<f64>, x: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        let t = (1..=y.len() as i64).collect();
        Self::new(t, y, x, z)
    }

    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.extra.insert(name.into(), values);
        self.validate()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if n < 2 {
            return Err(Error::InvalidData(format!(
                "sample size {n} is below the minimum of 2"
            )));
        }
        let lens = [
            ("t", self.t.len()),
            ("x", self.x.len()),
            ("z", self.z.len()),
        ];
        for (name, len) in lens
            .into_iter()
            .chain(self.extra.iter().map(|(k, v)| (k.as_str(), v.len())))
        {
            if len != n {
                return Err(Error::InvalidData(format!(
                    "column `{name}` has {len} rows, expected {n}"
                )));
            }
        }
        let series = [("y", &self.y), ("x", &self.x), ("z", &self.z)];
        for (name, col) in series
            .into_iter()
            .chain(self.extra.iter().map(|(k, v)| (k.as_str(), v)))
        {
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "column `{name}` has a missing or non-finite value at row {}",
                    i + 1
                )));
            }
        }
        if let Some(i) = self.t.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidData(format!(
                "time index is not strictly increasing at row {}",
                i + 2
            )));
        }
        Ok(())
    }

    /// Drops the first `n` rows.
    pub fn drop_first(&self, n: usize) -> Result<Self> {
        if n + 2 > self.len() {
            return Err(Error::InvalidData(format!(
                "dropping {n} rows leaves fewer than 2 of {}",
                self.len()
            )));
        }
        Ok(ForecastDataset {
            t: self.t[n..].to_vec(),
            y: self.y[n..].to_vec(),
            x: self.x[n..].to_vec(),
            z: self.z[n..].to_vec(),
            extra: self
                .extra
                .iter()
                .map(|(k, v)| (k.clone(), v[n..].to_vec()))
                .collect(),
        })
    }

    /// Replaces the state with the previous realization `y_{t-1}`, dropping
    /// the first row.
    pub fn with_lagged_state(&self) -> Result<Self> {
        let mut out = self.drop_first(1)?;
        out.z = self.y[..self.len() - 1].to_vec();
        Ok(out)
    }

    /// Replaces the state with the time index.
    pub fn with_time_state(&self) -> Self {
        let mut out = self.clone();
        out.z = self.t.iter().map(|&t| t as f64).collect();
        out
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        match name {
            "y" => Ok(&self.y),
            "x" => Ok(&self.x),
            "z" => Ok(&self.z),
            _ => self
                .extra
                .get(name)
                .map(Vec::as_slice)
                .ok_or_else(|| Error::MissingColumn(name.to_string())),
        }
    }

    /// Writes `t,y,x,z[,extra...]` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec!["t", "y", "x", "z"];
        header.extend(self.extra.keys().map(String::as_str));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![
                self.t[i].to_string(),
                fmt17(self.y[i]),
                fmt17(self.x[i]),
                fmt17(self.z[i]),
            ];
            rec.extend(self.extra.values().map(|v| fmt17(v[i])));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

/// Float formatting with 17 significant digits; parses back bit-exactly.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Where the state column comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StateSource {
    Column(String),
    /// `z_t = y_{t-1}`; the first row is dropped.
    LaggedRealization,
    /// `z_t = t`.
    Time,
}

impl FromStr for StateSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lag_y" => Ok(StateSource::LaggedRealization),
            "time" => Ok(StateSource::Time),
            _ => match s.strip_prefix("column:") {
                Some(c) if !c.is_empty() => Ok(StateSource::Column(c.to_string())),
                _ => Err(Error::InvalidArgument(format!(
                    "unknown state source `{s}` (expected column:<name>|lag_y|time)"
                ))),
            },
        }
    }
}

impl TryFrom<String> for StateSource {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StateSource> for String {
    fn from(s: StateSource) -> String {
        s.to_string()
    }
}

impl fmt::Display for StateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSource::Column(c) => write!(f, "column:{c}"),
            StateSource::LaggedRealization => f.write_str("lag_y"),
            StateSource::Time => f.write_str("time"),
        }
    }
}

/// Maps CSV header names onto dataset roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    /// Time column; `None` numbers rows `1..=T`.
    pub t: Option<String>,
    pub y: String,
    pub x: String,
    pub state: StateSource,
    /// Further columns to carry along (custom instruments, sigma columns).
    pub extra: Vec<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            t: Some("t".into()),
            y: "y".into(),
            x: "x".into(),
            state: StateSource::Column("z".into()),
            extra: Vec::new(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, map: &ColumnMap) -> Result<ForecastDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, map)
}

pub fn read_csv<R: std::io::Read>(reader: R, map: &ColumnMap) -> Result<ForecastDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let index_of = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let mut wanted: Vec<String> = vec![map.y.clone(), map.x.clone()];
    if let Some(t) = &map.t {
        wanted.push(t.clone());
    }
    if let StateSource::Column(c) = &map.state {
        wanted.push(c.clone());
    }
    wanted.extend(map.extra.iter().cloned());
    let idx: Vec<usize> = wanted.iter().map(|w| index_of(w)).collect::<Result<_>>()?;
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); wanted.len()];

    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        // header is line 1, so data row r sits on line r + 2
        let row = r + 1;
        if rec.len() != header.len() {
            return Err(Error::LengthMismatch {
                row,
                expected: header.len(),
                found: rec.len(),
            });
        }
        for (k, &i) in idx.iter().enumerate() {
            let cell = &rec[i];
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                row,
                column: wanted[k].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumeric {
                    row,
                    column: wanted[k].clone(),
                    value: cell.to_string(),
                });
            }
            cols[k].push(v);
        }
    }

    let mut cols = cols.into_iter();
    let y = cols.next().unwrap_or_default();
    let x = cols.next().unwrap_or_default();
    let t: Vec<i64> = match &map.t {
        Some(name) => {
            let raw = cols.next().unwrap_or_default();
            raw.iter()
                .enumerate()
                .map(|(i, &v)| {
                    if v.fract() == 0.0 {
                        Ok(v as i64)
                    } else {
                        Err(Error::NonNumeric {
                            row: i + 1,
                            column: name.clone(),
                            value: v.to_string(),
                        })
                    }
                })
                .collect::<Result<_>>()?
        }
        None => (1..=y.len() as i64).collect(),
    };
    let z = match &map.state {
        StateSource::Column(_) => cols.next().unwrap_or_default(),
        _ => vec![0.0; y.len()],
    };
    let mut ds = ForecastDataset {
        t,
        y,
        x,
        z,
        extra: BTreeMap::new(),
    };
    for name in &map.extra {
        ds.extra.insert(name.clone(), cols.next().unwrap_or_default());
    }
    ds.validate()?;
    match map.state {
        StateSource::Column(_) => Ok(ds),
        StateSource::LaggedRealization => ds.with_lagged_state(),
        StateSource::Time => Ok(ds.with_time_state()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TermKind {
    Constant,
    Forecast,
    Realization,
    State,
    /// `e = x - y`.
    ForecastError,
    SquaredForecastError,
    /// `V(x, y)` at the recipe's fixed identification level.
    IdentificationValue,
    Custom(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstrumentTerm {
    pub kind: TermKind,
    pub lag: usize,
    /// Flip the sign (e.g. `y - x` instead of `x - y`).
    pub negate: bool,
}

impl InstrumentTerm {
    pub fn new(kind: TermKind, lag: usize) -> Self {
        InstrumentTerm {
            kind,
            lag,
            negate: false,
        }
    }

    pub fn negated(mut self) -> Self {
        self.negate = !self.negate;
        self
    }

    fn effective_lag(&self) -> usize {
        if self.kind == TermKind::Constant {
            0
        } else {
            self.lag
        }
    }
}

impl fmt::Display for InstrumentTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negate {
            f.write_str("-")?;
        }
        match &self.kind {
            TermKind::Constant => return f.write_str("const"),
            TermKind::Forecast => f.write_str("x")?,
            TermKind::Realization => f.write_str("y")?,
            TermKind::State => f.write_str("z")?,
            TermKind::ForecastError => f.write_str("e")?,
            TermKind::SquaredForecastError => f.write_str("e2")?,
            TermKind::IdentificationValue => f.write_str("v")?,
            TermKind::Custom(name) => write!(f, "col:{name}")?,
        }
        if self.lag > 0 {
            write!(f, "@{}", self.lag)?;
        }
        Ok(())
    }
}

impl FromStr for InstrumentTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (negate, body) = match s.strip_prefix('-') {
            Some(b) => (true, b),
            None => (false, s),
        };
        let (name, lag) = match body.rsplit_once('@') {
            Some((n, l)) => (
                n,
                l.parse::<usize>()
                    .map_err(|_| Error::Recipe(format!("bad lag in term `{s}`")))?,
            ),
            None => (body, 0),
        };
        let kind = match name {
            "const" | "1" => TermKind::Constant,
            "x" => TermKind::Forecast,
            "y" => TermKind::Realization,
            "z" => TermKind::State,
            "e" => TermKind::ForecastError,
            "e2" => TermKind::SquaredForecastError,
            "v" => TermKind::IdentificationValue,
            _ => match name.strip_prefix("col:") {
                Some(c) if !c.is_empty() => TermKind::Custom(c.to_string()),
                _ => return Err(Error::Recipe(format!("unknown term `{s}`"))),
            },
        };
        let uses_realization = matches!(
            kind,
            TermKind::Realization
                | TermKind::ForecastError
                | TermKind::SquaredForecastError
                | TermKind::IdentificationValue
        );
        if uses_realization && lag == 0 {
            return Err(Error::Recipe(format!(
                "term `{s}` uses the realization being forecast; give it a lag of at least 1"
            )));
        }
        Ok(InstrumentTerm { kind, lag, negate })
    }
}

/// Ordered list of instrument terms.
///
/// Text form: comma-separated `[-]name[@lag]` with names `const`, `x`, `y`,
/// `z`, `e`, `e2`, `v`, `col:<name>`; or one of the presets `gdp`
/// (`const,x,-e@1,v@1`) and `sim` (`const,x,e@1,e2@1,x@1,e@2,e2@2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct InstrumentRecipe {
    pub terms: Vec<InstrumentTerm>,
}

impl InstrumentRecipe {
    pub fn new(terms: Vec<InstrumentTerm>) -> Self {
        InstrumentRecipe { terms }
    }

    /// `w_t = (1, x_t, y_{t-1} - x_{t-1}, V(x_{t-1}, y_{t-1}))`.
    pub fn gdp() -> Self {
        "const,x,-e@1,v@1".parse().expect("valid preset")
    }

    /// Constant, forecast, lagged error and squared error, plus one further
    /// lag of each non-constant term (q = 7).
    pub fn simulation() -> Self {
        "const,x,e@1,e2@1,x@1,e@2,e2@2".parse().expect("valid preset")
    }

    /// Every non-constant term lagged by `k` more periods.
    pub fn shifted(&self, k: usize) -> Self {
        InstrumentRecipe {
            terms: self
                .terms
                .iter()
                .map(|t| {
                    let mut t = t.clone();
                    if t.kind != TermKind::Constant {
                        t.lag += k;
                    }
                    t
                })
                .collect(),
        }
    }

    pub fn max_lag(&self) -> usize {
        self.terms.iter().map(InstrumentTerm::effective_lag).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

impl FromStr for InstrumentRecipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gdp" => return Ok(Self::gdp()),
            "sim" => return Ok(Self::simulation()),
            "" => return Err(Error::Recipe("empty recipe (q = 0)".into())),
            _ => {}
        }
        let terms = s
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<InstrumentTerm>>>()?;
        Ok(InstrumentRecipe { terms })
    }
}

impl fmt::Display for InstrumentRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl TryFrom<String> for InstrumentRecipe {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InstrumentRecipe> for String {
    fn from(r: InstrumentRecipe) -> String {
        r.to_string()
    }
}

/// `T_eff × q` instrument matrix aligned with the dataset after dropping
/// its first `dropped` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentMatrix {
    pub w: DMatrix<f64>,
    pub labels: Vec<String>,
    pub dropped: usize,
}

impl InstrumentMatrix {
    pub fn q(&self) -> usize {
        self.w.ncols()
    }

    pub fn rows(&self) -> usize {
        self.w.nrows()
    }

    /// Wraps a hand-built matrix (no rows dropped).
    pub fn from_matrix(w: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != w.ncols() {
            return Err(Error::Shape(format!(
                "{} labels for {} instrument columns",
                labels.len(),
                w.ncols()
            )));
        }
        Ok(InstrumentMatrix {
            w,
            labels,
            dropped: 0,
        })
    }
}

/// Builds the instrument matrix. `identification_level` is the fixed level
/// at which `v` terms evaluate `V(x, y)`.
pub fn build_instruments(
    ds: &ForecastDataset,
    recipe: &InstrumentRecipe,
    family: Family,
    identification_level: f64,
) -> Result<InstrumentMatrix> {
    if recipe.is_empty() {
        return Err(Error::Recipe("empty recipe (q = 0)".into()));
    }
    let n = ds.len();
    let max_lag = recipe.max_lag();
    if max_lag + 2 > n {
        return Err(Error::Recipe(format!(
            "lag {max_lag} exceeds T - 2 = {}",
            n.saturating_sub(2)
        )));
    }
    if recipe
        .terms
        .iter()
        .any(|t| t.kind == TermKind::IdentificationValue)
    {
        check_level(identification_level)?;
    }
    let rows = n - max_lag;
    let mut w = DMatrix::zeros(rows, recipe.len());
    let mut labels = Vec::with_capacity(recipe.len());
    for (j, term) in recipe.terms.iter().enumerate() {
        let custom = match &term.kind {
            TermKind::Custom(name) => Some(ds.column(name)?),
            _ => None,
        };
        let sign = if term.negate { -1.0 } else { 1.0 };
        for r in 0..rows {
            let i = r + max_lag - term.effective_lag();
            let (x, y) = (ds.x[i], ds.y[i]);
            let v = match &term.kind {
                TermKind::Constant => 1.0,
                TermKind::Forecast => x,
                TermKind::Realization => y,
                TermKind::State => ds.z[i],
                TermKind::ForecastError => x - y,
                TermKind::SquaredForecastError => (x - y) * (x - y),
                TermKind::IdentificationValue => {
                    family.identification_unchecked(x, y, identification_level)
                }
                TermKind::Custom(_) => custom.expect("resolved above")[i],
            };
            w[(r, j)] = sign * v;
        }
        let label = term.to_string();
        let col = w.column(j);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::Recipe(format!("instrument `{label}` is not finite")));
        }
        if col.iter().all(|&v| v == 0.0) {
            return Err(Error::Recipe(format!("instrument `{label}` is identically zero")));
        }
        labels.push(label);
    }
    Ok(InstrumentMatrix {
        w,
        labels,
        dropped: max_lag,
    })
}

/// Instruments together with the dataset rows they align with.
pub fn align(
    ds: &ForecastDataset,
    recipe: &InstrumentRecipe,
    family: Family,
    identification_level: f64,
) -> Result<(ForecastDataset, InstrumentMatrix)> {
    let w = build_instruments(ds, recipe, family, identification_level)?;
    let aligned = ds.drop_first(w.dropped)?;
    Ok((aligned, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(n: usize) -> ForecastDataset {
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        let z: Vec<f64> = (0..n).map(|i| i as f64 / 10.0).collect();
        ForecastDataset::from_series(y, x, z).unwrap()
    }

    #[test]
    fn reads_small_file() {
        let text = "t,y,x,z\n1,0.5,1.0,0.1\n2,0.25,0.0,0.2\n3,1.5,1.25,0.3\n";
        let ds = read_csv(text.as_bytes(), &ColumnMap::default()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.t, vec![1, 2, 3]);
        assert_eq!(ds.x, vec![1.0, 0.0, 1.25]);
    }

    #[test]
    fn shuffled_columns_with_map() {
        let ordered = "t,y,x,z\n1,0.5,1.0,0.1\n2,0.25,0.0,0.2\n3,1.5,1.25,0.3\n";
        let shuffled = "fc,state,time,obs\n1.0,0.1,1,0.5\n0.0,0.2,2,0.25\n1.25,0.3,3,1.5\n";
        let map = ColumnMap {
            t: Some("time".into()),
            y: "obs".into(),
            x: "fc".into(),
            state: StateSource::Column("state".into()),
            extra: vec![],
        };
        let a = read_csv(ordered.as_bytes(), &ColumnMap::default()).unwrap();
        let b = read_csv(shuffled.as_bytes(), &map).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_numeric_cell_names_row() {
        let text = "t,y,x,z\n1,0.5,1.0,0.1\n2,abc,0.0,0.2\n";
        let err = read_csv(text.as_bytes(), &ColumnMap::default()).unwrap_err();
        match err {
            Error::NonNumeric { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_string(text).contains("row 2"));
    }

    fn err_string(text: &str) -> String {
        read_csv(text.as_bytes(), &ColumnMap::default())
            .unwrap_err()
            .to_string()
    }

    #[test]
    fn missing_column_and_ragged_rows() {
        let text = "t,y,x\n1,0.5,1.0\n2,0.1,0.0\n";
        assert!(matches!(
            read_csv(text.as_bytes(), &ColumnMap::default()),
            Err(Error::MissingColumn(c)) if c == "z"
        ));
        let ragged = "t,y,x,z\n1,0.5,1.0,0.1\n2,0.1,0.0\n";
        assert!(matches!(
            read_csv(ragged.as_bytes(), &ColumnMap::default()),
            Err(Error::LengthMismatch { row: 2, .. })
        ));
        let empty_cell = "t,y,x,z\n1,0.5,1.0,0.1\n2,,0.0,0.3\n";
        assert!(matches!(
            read_csv(empty_cell.as_bytes(), &ColumnMap::default()),
            Err(Error::NonNumeric { row: 2, .. })
        ));
    }

    #[test]
    fn time_must_increase() {
        let text = "t,y,x,z\n2,0.5,1.0,0.1\n1,0.1,0.0,0.3\n";
        assert!(matches!(
            read_csv(text.as_bytes(), &ColumnMap::default()),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn lagged_state_drops_first_row() {
        let text = "t,y,x\n1,0.5,1.0\n2,0.1,0.0\n3,0.7,0.2\n";
        let map = ColumnMap {
            state: StateSource::LaggedRealization,
            ..ColumnMap::default()
        };
        let ds = read_csv(text.as_bytes(), &map).unwrap();
        assert_eq!(ds.t, vec![2, 3]);
        assert_eq!(ds.z, vec![0.5, 0.1]);
    }

    #[test]
    fn constant_recipe() {
        let ds = fixture(5);
        let w = build_instruments(&ds, &"const".parse().unwrap(), Family::Quantile, 0.5).unwrap();
        assert_eq!(w.w, DMatrix::from_element(5, 1, 1.0));
        assert_eq!(w.dropped, 0);
    }

    #[test]
    fn lagged_forecast_error() {
        let ds = fixture(5);
        let w = build_instruments(&ds, &"const,e@1".parse().unwrap(), Family::Quantile, 0.5)
            .unwrap();
        assert_eq!(w.w.shape(), (4, 2));
        for r in 0..4 {
            assert_eq!(w.w[(r, 1)], ds.x[r] - ds.y[r]);
        }
        let neg = build_instruments(&ds, &"const,-e@1".parse().unwrap(), Family::Quantile, 0.5)
            .unwrap();
        assert_eq!(neg.w[(0, 1)], ds.y[0] - ds.x[0]);
    }

    #[test]
    fn simulation_recipe_matches_hand_built() {
        let ds = fixture(10);
        let w = build_instruments(&ds, &InstrumentRecipe::simulation(), Family::Expectile, 0.5)
            .unwrap();
        assert_eq!(w.q(), 7);
        assert_eq!(w.rows(), 8);
        let e = |i: usize| ds.x[i] - ds.y[i];
        for r in 0..8 {
            let i = r + 2;
            let hand = [
                1.0,
                ds.x[i],
                e(i - 1),
                e(i - 1) * e(i - 1),
                ds.x[i - 1],
                e(i - 2),
                e(i - 2) * e(i - 2),
            ];
            for (j, h) in hand.iter().enumerate() {
                assert_eq!(w.w[(r, j)], *h);
            }
        }
    }

    #[test]
    fn gdp_recipe_uses_identification_level() {
        let ds = fixture(6);
        let w = build_instruments(&ds, &InstrumentRecipe::gdp(), Family::Quantile, 0.3).unwrap();
        for r in 0..w.rows() {
            let v = if ds.y[r] <= ds.x[r] { 0.7 } else { -0.3 };
            assert!((w.w[(r, 3)] - v).abs() < 1e-15);
            assert_eq!(w.w[(r, 2)], ds.y[r] - ds.x[r]);
        }
    }

    #[test]
    fn recipe_errors() {
        let ds = fixture(5);
        assert!("".parse::<InstrumentRecipe>().is_err());
        assert!("const,q@1".parse::<InstrumentRecipe>().is_err());
        assert!(build_instruments(&ds, &"x@4".parse().unwrap(), Family::Quantile, 0.5).is_err());
        assert!(build_instruments(&ds, &"x@3".parse().unwrap(), Family::Quantile, 0.5).is_ok());
        let zero = ForecastDataset::from_series(vec![1.0; 4], vec![1.0; 4], vec![0.0; 4]).unwrap();
        assert!(build_instruments(&zero, &"const,e@1".parse().unwrap(), Family::Quantile, 0.5)
            .is_err());
        for leaky in ["y", "e", "e2", "v", "-e"] {
            assert!(leaky.parse::<InstrumentRecipe>().is_err(), "{leaky}");
        }
    }

    #[test]
    fn recipe_text_round_trip() {
        let r = InstrumentRecipe::simulation();
        assert_eq!(r.to_string().parse::<InstrumentRecipe>().unwrap(), r);
        assert_eq!(r.shifted(1).max_lag(), 3);
        assert_eq!(r.shifted(1).terms[0].lag, 0);
    }
}
