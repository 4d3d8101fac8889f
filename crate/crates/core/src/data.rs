//! Domain types, CSV ingestion and the per-capita treatment aggregation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UnitId {
    pub name: String,
    pub index: usize,
}

impl UnitId {
    pub fn new(name: impl Into<String>, index: usize) -> Self {
        Self {
            name: name.into(),
            index,
        }
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Units named `u0..u{n-1}`, used for synthetic samples.
pub fn numbered_units(n: usize) -> Vec<UnitId> {
    (0..n).map(|i| UnitId::new(format!("u{i}"), i)).collect()
}

fn check_units(units: &[UnitId]) -> Result<()> {
    let mut seen = HashSet::with_capacity(units.len());
    for (i, u) in units.iter().enumerate() {
        if u.index != i {
            return Err(Error::InvalidData(format!(
                "unit {:?} has index {} at row {i}",
                u.name, u.index
            )));
        }
        if !seen.insert(u.name.as_str()) {
            return Err(Error::DuplicateUnit(u.name.clone()));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubsidyRecord {
    pub unit: UnitId,
    pub year: i32,
    pub subsidy_type: String,
    pub amount: f64,
    pub population: f64,
}

/// `n` trajectories observed on a common, strictly increasing time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalSample<T> {
    grid: Vec<T>,
    curves: Vec<Vec<T>>,
    units: Vec<UnitId>,
}

impl<T: Scalar> FunctionalSample<T> {
    pub fn new(grid: Vec<T>, curves: Vec<Vec<T>>, units: Vec<UnitId>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::Empty("functional sample without curves"));
        }
        if grid.is_empty() {
            return Err(Error::Empty("functional sample without grid points"));
        }
        if curves.len() != units.len() {
            return Err(Error::InvalidData(format!(
                "{} curves but {} units",
                curves.len(),
                units.len()
            )));
        }
        if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidData("grid must be finite and strictly increasing".into()));
        }
        for (c, u) in curves.iter().zip(&units) {
            if c.len() != grid.len() {
                return Err(Error::InvalidData(format!(
                    "curve {:?} has {} values for {} grid points",
                    u.name,
                    c.len(),
                    grid.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!("curve {:?} has a non-finite value", u.name)));
            }
        }
        check_units(&units)?;
        Ok(Self { grid, curves, units })
    }

    /// Sample with units named `u0..`.
    pub fn from_curves(grid: Vec<T>, curves: Vec<Vec<T>>) -> Result<Self> {
        let units = numbered_units(curves.len());
        Self::new(grid, curves, units)
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn curves(&self) -> &[Vec<T>] {
        &self.curves
    }

    pub fn curve(&self, i: usize) -> &[T] {
        &self.curves[i]
    }

    pub fn units(&self) -> &[UnitId] {
        &self.units
    }

    /// Number of curves.
    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// Number of grid points.
    pub fn grid_len(&self) -> usize {
        self.grid.len()
    }

    /// Value of every curve at grid position `j`.
    pub fn column(&self, j: usize) -> Vec<T> {
        self.curves.iter().map(|c| c[j]).collect()
    }

    /// Sub-sample of the given rows; units are re-indexed in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let curves = rows.iter().map(|&i| self.curves[i].clone()).collect();
        let units = rows
            .iter()
            .enumerate()
            .map(|(k, &i)| UnitId::new(self.units[i].name.clone(), k))
            .collect();
        Self::new(self.grid.clone(), curves, units)
    }

    /// Applies `f` to every curve value.
    pub fn map_values(&self, f: impl Fn(T) -> T) -> Result<Self> {
        let curves = self.curves.iter().map(|c| c.iter().map(|&v| f(v)).collect()).collect();
        Self::new(self.grid.clone(), curves, self.units.clone())
    }
}

/// Outcome vectors, one row per unit.
#[derive(Clone, Debug, PartialEq)]
pub struct MultivariateSample<T> {
    points: Vec<Vec<T>>,
    units: Vec<UnitId>,
    variable_names: Vec<String>,
}

impl<T: Scalar> MultivariateSample<T> {
    pub fn new(points: Vec<Vec<T>>, units: Vec<UnitId>, variable_names: Vec<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("multivariate sample without rows"));
        }
        if variable_names.is_empty() {
            return Err(Error::Empty("multivariate sample without variables"));
        }
        if points.len() != units.len() {
            return Err(Error::InvalidData(format!(
                "{} rows but {} units",
                points.len(),
                units.len()
            )));
        }
        for (p, u) in points.iter().zip(&units) {
            if p.len() != variable_names.len() {
                return Err(Error::InvalidData(format!(
                    "row {:?} has {} values for {} variables",
                    u.name,
                    p.len(),
                    variable_names.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!("row {:?} has a non-finite value", u.name)));
            }
        }
        check_units(&units)?;
        Ok(Self {
            points,
            units,
            variable_names,
        })
    }

    /// Sample with units `u0..` and variables `a1..`.
    pub fn from_points(points: Vec<Vec<T>>) -> Result<Self> {
        let l = points.first().map_or(0, Vec::len);
        let names = (1..=l).map(|k| format!("a{k}")).collect();
        let units = numbered_units(points.len());
        Self::new(points, units, names)
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn units(&self) -> &[UnitId] {
        &self.units
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Dimension `l` of each row.
    pub fn dim(&self) -> usize {
        self.variable_names.len()
    }

    /// Rows reordered to follow `units` by name.
    pub fn aligned_to(&self, units: &[UnitId]) -> Result<Self> {
        if units.len() != self.units.len() {
            return Err(Error::UnitMismatch);
        }
        let by_name: HashMap<&str, usize> = self.units.iter().map(|u| (u.name.as_str(), u.index)).collect();
        let mut points = Vec::with_capacity(units.len());
        for u in units {
            let &i = by_name.get(u.name.as_str()).ok_or(Error::UnitMismatch)?;
            points.push(self.points[i].clone());
        }
        let units = units
            .iter()
            .enumerate()
            .map(|(k, u)| UnitId::new(u.name.clone(), k))
            .collect();
        Self::new(points, units, self.variable_names.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DepthMethod {
    Mbd,
    Fm,
    Ed,
    Projection,
}

impl DepthMethod {
    pub const FUNCTIONAL: [DepthMethod; 3] = [DepthMethod::Mbd, DepthMethod::Fm, DepthMethod::Ed];

    pub fn as_str(self) -> &'static str {
        match self {
            DepthMethod::Mbd => "mbd",
            DepthMethod::Fm => "fm",
            DepthMethod::Ed => "ed",
            DepthMethod::Projection => "projection",
        }
    }
}

impl fmt::Display for DepthMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DepthMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mbd" => Ok(DepthMethod::Mbd),
            "fm" => Ok(DepthMethod::Fm),
            "ed" => Ok(DepthMethod::Ed),
            "projection" | "pd" => Ok(DepthMethod::Projection),
            other => Err(Error::invalid(format!("unknown depth method {other:?}"))),
        }
    }
}

/// Per-unit depth values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthVector<T> {
    pub values: Vec<T>,
    pub method: DepthMethod,
    pub units: Vec<UnitId>,
}

impl<T: Scalar> DepthVector<T> {
    pub fn new(values: Vec<T>, method: DepthMethod, units: Vec<UnitId>) -> Self {
        debug_assert_eq!(values.len(), units.len());
        debug_assert!(
            values.iter().all(|&v| v >= T::zero() && v <= T::one()),
            "depth outside [0, 1]"
        );
        Self { values, method, units }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(file))
}

fn malformed(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => malformed(path, line, format!("{kind:?}")),
    }
}

fn expect_header(path: &Path, rdr: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(malformed(
            path,
            1,
            format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn parse_field<V: FromStr>(path: &Path, line: u64, field: &str, what: &str) -> Result<V> {
    field
        .parse()
        .map_err(|_| malformed(path, line, format!("non-numeric {what} {field:?}")))
}

/// Reads a long-format `unit,year,subsidy_type,amount,population` file.
pub fn load_subsidies(path: impl AsRef<Path>) -> Result<Vec<SubsidyRecord>> {
    let path = path.as_ref();
    let mut rdr = csv_reader(path)?;
    expect_header(
        path,
        &mut rdr,
        &["unit", "year", "subsidy_type", "amount", "population"],
    )?;

    let mut unit_index: HashMap<String, usize> = HashMap::new();
    let mut keys = HashSet::new();
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 5 {
            return Err(malformed(
                path,
                line,
                format!("expected 5 columns, found {}", row.len()),
            ));
        }
        let name = row[0].to_string();
        let year: i32 = parse_field(path, line, &row[1], "year")?;
        let subsidy_type = row[2].to_string();
        let amount: f64 = parse_field(path, line, &row[3], "amount")?;
        let population: f64 = parse_field(path, line, &row[4], "population")?;
        if !amount.is_finite() || !population.is_finite() {
            return Err(malformed(path, line, "non-finite number"));
        }
        if amount < 0.0 {
            return Err(Error::NegativeAmount {
                unit: name,
                year,
                amount,
            });
        }
        if population <= 0.0 {
            return Err(Error::NonPositivePopulation {
                unit: name,
                year,
                population,
            });
        }
        if !keys.insert((name.clone(), year, subsidy_type.clone())) {
            return Err(Error::DuplicateRecord {
                unit: name,
                year,
                subsidy_type,
            });
        }
        let next = unit_index.len();
        let index = *unit_index.entry(name.clone()).or_insert(next);
        records.push(SubsidyRecord {
            unit: UnitId::new(name, index),
            year,
            subsidy_type,
            amount,
            population,
        });
    }
    Ok(records)
}

/// Reads a wide-format `unit,<var1>,...,<varl>` outcome file.
pub fn load_outcomes<T: Scalar>(path: impl AsRef<Path>) -> Result<MultivariateSample<T>> {
    let path = path.as_ref();
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 2 || &headers[0] != "unit" {
        return Err(malformed(path, 1, "expected header `unit,<name1>,...`"));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();

    let mut units = Vec::new();
    let mut points = Vec::new();
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != headers.len() {
            return Err(malformed(
                path,
                line,
                format!("ragged row: expected {} columns, found {}", headers.len(), row.len()),
            ));
        }
        let name = row[0].to_string();
        if !seen.insert(name.clone()) {
            return Err(Error::DuplicateUnit(name));
        }
        let mut point = Vec::with_capacity(names.len());
        for cell in row.iter().skip(1) {
            let v: f64 = parse_field(path, line, cell, "cell")?;
            point.push(T::lit(v));
        }
        units.push(UnitId::new(name, units.len()));
        points.push(point);
    }
    MultivariateSample::new(points, units, names)
}

/// Per-capita treatment trajectories: for each unit and year, the sum of all
/// subsidy amounts divided by that year's population.
///
/// The grid is the set of years observed for every unit; units are ordered by
/// name so the result does not depend on record order.
pub fn aggregate_h<T: Scalar>(records: &[SubsidyRecord]) -> Result<FunctionalSample<T>> {
    if records.is_empty() {
        return Err(Error::Empty("no subsidy records"));
    }
    // year -> (type -> amount, population)
    type Years<'a> = BTreeMap<i32, (BTreeMap<&'a str, f64>, f64)>;
    let mut table: BTreeMap<&str, Years> = BTreeMap::new();
    for r in records {
        let years = table.entry(r.unit.name.as_str()).or_default();
        let (amounts, population) = years.entry(r.year).or_insert_with(|| (BTreeMap::new(), r.population));
        if *population != r.population {
            return Err(Error::InconsistentPopulation {
                unit: r.unit.name.clone(),
                year: r.year,
            });
        }
        if amounts.insert(r.subsidy_type.as_str(), r.amount).is_some() {
            return Err(Error::DuplicateRecord {
                unit: r.unit.name.clone(),
                year: r.year,
                subsidy_type: r.subsidy_type.clone(),
            });
        }
    }

    let mut common: Option<BTreeSet<i32>> = None;
    for years in table.values() {
        let ys: BTreeSet<i32> = years.keys().copied().collect();
        common = Some(match common {
            None => ys,
            Some(c) => c.intersection(&ys).copied().collect(),
        });
    }
    let common = common.unwrap_or_default();
    if common.is_empty() {
        return Err(Error::NoCommonYears);
    }
    for (unit, years) in &table {
        if years.len() > common.len() {
            log::info!(
                "unit {unit}: dropping {} year(s) not observed for every unit",
                years.len() - common.len()
            );
        }
    }

    let grid: Vec<T> = common.iter().map(|&y| T::lit(f64::from(y))).collect();
    let mut curves = Vec::with_capacity(table.len());
    let mut units = Vec::with_capacity(table.len());
    for (k, (unit, years)) in table.iter().enumerate() {
        let curve = common
            .iter()
            .map(|y| {
                let (amounts, population) = &years[y];
                let total: f64 = amounts.values().sum();
                T::lit(total / population)
            })
            .collect();
        curves.push(curve);
        units.push(UnitId::new(*unit, k));
    }
    FunctionalSample::new(grid, curves, units)
}

/// Formats a real with 17 significant digits.
pub fn fmt_real<T: Scalar>(x: T) -> String {
    let x = x.as_f64();
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.16e}")
    }
}

/// Writes curves in long format `unit,t,value`.
pub fn write_curves<T: Scalar, W: Write>(sample: &FunctionalSample<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidData(e.to_string());
    w.write_record(["unit", "t", "value"]).map_err(io)?;
    for (unit, curve) in sample.units().iter().zip(sample.curves()) {
        for (t, v) in sample.grid().iter().zip(curve) {
            w.write_record([unit.name.as_str(), &fmt_real(*t), &fmt_real(*v)])
                .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::InvalidData(e.to_string()))?;
    Ok(())
}

/// Reads curves in long format `unit,t,value`; every unit must be observed
/// on the same set of time points.
pub fn load_curves<T: Scalar>(path: impl AsRef<Path>) -> Result<FunctionalSample<T>> {
    let path = path.as_ref();
    let mut rdr = csv_reader(path)?;
    expect_header(path, &mut rdr, &["unit", "t", "value"])?;

    let mut order: Vec<String> = Vec::new();
    let mut obs: HashMap<String, Vec<(f64, f64)>> = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 3 {
            return Err(malformed(
                path,
                line,
                format!("expected 3 columns, found {}", row.len()),
            ));
        }
        let t: f64 = parse_field(path, line, &row[1], "time")?;
        let v: f64 = parse_field(path, line, &row[2], "value")?;
        let name = &row[0];
        if !obs.contains_key(name) {
            order.push(name.to_string());
        }
        obs.entry(name.to_string()).or_default().push((t, v));
    }
    if order.is_empty() {
        return Err(Error::Empty("curve file without rows"));
    }

    let mut grid: Option<Vec<f64>> = None;
    let mut curves = Vec::with_capacity(order.len());
    for name in &order {
        let mut points = obs.remove(name).unwrap_or_default();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidData(format!("unit {name:?} repeats a time point")));
        }
        let ts: Vec<f64> = points.iter().map(|p| p.0).collect();
        match &grid {
            None => grid = Some(ts),
            Some(g) if *g != ts => {
                return Err(Error::InvalidData(format!(
                    "unit {name:?} is observed on a different grid"
                )))
            }
            Some(_) => {}
        }
        curves.push(points.iter().map(|p| T::lit(p.1)).collect());
    }
    let grid = grid.unwrap_or_default().into_iter().map(T::lit).collect();
    let units = order.into_iter().enumerate().map(|(i, n)| UnitId::new(n, i)).collect();
    FunctionalSample::new(grid, curves, units)
}
