//! Tabular input: CSV loading, attribute classification and scatterplot
//! enumeration.
//!
//! A [`Table`] is read-only after [`load_table`]. Columns are typed by
//! content: a column is numeric when every non-empty cell parses as a
//! number, otherwise it stays text. [`classify_attributes`] then splits
//! columns into measures (high-cardinality numeric) and categories.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::Point;

/// Numeric columns with at most this many distinct values are categories.
pub const DEFAULT_CATEGORICAL_THRESHOLD: usize = 20;

/// Category-split enumeration refuses attributes with more values than this.
pub const DEFAULT_MAX_CATEGORY_VALUES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvFormat {
    pub delimiter: u8,
    /// Cells use `,` as the decimal separator (`1,5` is one and a half).
    pub decimal_comma: bool,
}

impl Default for CsvFormat {
    fn default() -> Self {
        Self {
            delimiter: b',',
            decimal_comma: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    /// Missing cells are `None`. Non-finite values parse and are kept.
    Numeric(Vec<Option<f64>>),
    Text(Vec<Option<String>>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Column::Numeric(_))
    }

    /// Finite numeric value at `row`, if any.
    pub fn finite(&self, row: usize) -> Option<f64> {
        match self {
            Column::Numeric(v) => v[row].filter(|x| x.is_finite()),
            Column::Text(_) => None,
        }
    }

    /// The value at `row` as a category key. Numbers use their shortest
    /// round-trip decimal form.
    pub fn category_key(&self, row: usize) -> Option<String> {
        match self {
            Column::Numeric(v) => v[row].filter(|x| x.is_finite()).map(format_number_key),
            Column::Text(v) => v[row].clone(),
        }
    }
}

fn format_number_key(x: f64) -> String {
    // -0 and 0 are the same category.
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    name: String,
    columns: Vec<(String, Column)>,
    row_count: usize,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<(String, Column)>) -> Result<Self> {
        let row_count = columns.first().map_or(0, |(_, c)| c.len());
        let mut seen = HashSet::new();
        for (name, col) in &columns {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidSpec(format!(
                    "duplicate column name `{name}`"
                )));
            }
            if col.len() != row_count {
                return Err(Error::InvalidSpec(format!(
                    "column `{name}` has {} rows, expected {row_count}",
                    col.len()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            columns,
            row_count,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn columns(&self) -> &[(String, Column)] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    fn require(&self, name: &str) -> Result<&Column> {
        self.column(name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    /// Distinct non-missing values of a column, ordered numerically for
    /// numeric columns and lexicographically for text.
    pub fn distinct_values(&self, name: &str) -> Result<Vec<String>> {
        let col = self.require(name)?;
        Ok(match col {
            Column::Numeric(values) => {
                let mut nums: Vec<f64> = values
                    .iter()
                    .flatten()
                    .copied()
                    .filter(|x| x.is_finite())
                    .map(|x| if x == 0.0 { 0.0 } else { x })
                    .collect();
                nums.sort_by(f64::total_cmp);
                nums.dedup();
                nums.into_iter().map(format_number_key).collect()
            }
            Column::Text(values) => {
                let set: std::collections::BTreeSet<String> =
                    values.iter().flatten().cloned().collect();
                set.into_iter().collect()
            }
        })
    }
}

/// Parses CSV bytes into a [`Table`].
///
/// Quoting follows RFC 4180. Errors carry the 1-based line number of the
/// offending row, counting the header as line 1.
pub fn load_table(name: &str, mut source: impl Read, format: CsvFormat) -> Result<Table> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(Error::EmptyTable);
    }
    check_quotes(&bytes)?;

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes.as_slice());

    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut seen = HashSet::new();
    for h in &headers {
        if h.is_empty() {
            return Err(Error::Parse {
                row: 1,
                message: "empty column name".into(),
            });
        }
        if !seen.insert(h.as_str()) {
            return Err(Error::Parse {
                row: 1,
                message: format!("duplicate column name `{h}`"),
            });
        }
    }

    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        for (col, field) in cells.iter_mut().zip(record.iter()) {
            let field = field.trim();
            col.push((!field.is_empty()).then(|| field.to_string()));
        }
    }

    let columns = headers
        .into_iter()
        .zip(cells)
        .map(|(name, raw)| (name, type_column(raw, format.decimal_comma)))
        .collect();
    Table::new(name, columns)
}

fn type_column(raw: Vec<Option<String>>, decimal_comma: bool) -> Column {
    let parse = |s: &str| -> Option<f64> {
        if decimal_comma {
            s.replace(',', ".").parse().ok()
        } else {
            s.parse().ok()
        }
    };
    let mut numbers = Vec::with_capacity(raw.len());
    for cell in &raw {
        match cell {
            None => numbers.push(None),
            Some(s) => match parse(s) {
                Some(x) => numbers.push(Some(x)),
                None => return Column::Text(raw),
            },
        }
    }
    Column::Numeric(numbers)
}

fn csv_error(err: csv::Error) -> Error {
    let row = err.position().map_or(0, |p| p.line());
    let message = match err.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        _ => err.to_string(),
    };
    Error::Parse { row, message }
}

/// The csv crate accepts an unterminated quoted field at end of input, so
/// quote balance is checked up front.
fn check_quotes(bytes: &[u8]) -> Result<()> {
    let mut line = 1u64;
    let mut open_line = 0u64;
    let mut in_quotes = false;
    for &b in bytes {
        match b {
            b'"' => {
                in_quotes = !in_quotes;
                if in_quotes {
                    open_line = line;
                }
            }
            b'\n' => line += 1,
            _ => {}
        }
    }
    if in_quotes {
        return Err(Error::Parse {
            row: open_line,
            message: "unterminated quoted field".into(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Measure,
    Category,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureStats {
    pub name: String,
    /// `None` when the column holds no finite value.
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Missing or non-finite cells.
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeCatalog {
    pub measures: Vec<String>,
    pub categories: Vec<String>,
    /// Aligned with `measures`.
    pub stats: Vec<MeasureStats>,
}

impl AttributeCatalog {
    pub fn is_measure(&self, name: &str) -> bool {
        self.measures.iter().any(|m| m == name)
    }

    pub fn is_category(&self, name: &str) -> bool {
        self.categories.iter().any(|c| c == name)
    }
}

/// Splits columns into measures and categories.
///
/// Numeric columns with more than `threshold` distinct finite values are
/// measures; everything else is a category. `overrides` win, but a text
/// column cannot be forced to a measure.
pub fn classify_attributes(
    table: &Table,
    overrides: &BTreeMap<String, AttributeKind>,
    threshold: usize,
) -> Result<AttributeCatalog> {
    if table.row_count() == 0 {
        return Err(Error::EmptyTable);
    }
    for name in overrides.keys() {
        table.require(name)?;
    }

    let mut catalog = AttributeCatalog {
        measures: Vec::new(),
        categories: Vec::new(),
        stats: Vec::new(),
    };
    for (name, col) in table.columns() {
        let kind = match (overrides.get(name), col) {
            (Some(AttributeKind::Measure), Column::Text(_)) => {
                return Err(Error::InvalidConfig(format!(
                    "text column `{name}` cannot be a measure"
                )))
            }
            (Some(kind), _) => *kind,
            (None, Column::Text(_)) => AttributeKind::Category,
            (None, Column::Numeric(values)) => {
                if distinct_finite_exceeds(values, threshold) {
                    AttributeKind::Measure
                } else {
                    AttributeKind::Category
                }
            }
        };
        match kind {
            AttributeKind::Measure => {
                catalog.measures.push(name.clone());
                catalog.stats.push(measure_stats(name, col));
            }
            AttributeKind::Category => catalog.categories.push(name.clone()),
        }
    }
    Ok(catalog)
}

fn distinct_finite_exceeds(values: &[Option<f64>], threshold: usize) -> bool {
    let mut seen = HashSet::new();
    for x in values.iter().flatten().filter(|x| x.is_finite()) {
        let x = if *x == 0.0 { 0.0 } else { *x };
        seen.insert(x.to_bits());
        if seen.len() > threshold {
            return true;
        }
    }
    false
}

fn measure_stats(name: &str, col: &Column) -> MeasureStats {
    let mut stats = MeasureStats {
        name: name.to_string(),
        min: None,
        max: None,
        missing: 0,
    };
    for row in 0..col.len() {
        match col.finite(row) {
            Some(x) => {
                stats.min = Some(stats.min.map_or(x, |m| m.min(x)));
                stats.max = Some(stats.max.map_or(x, |m| m.max(x)));
            }
            None => stats.missing += 1,
        }
    }
    stats
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpecFilter {
    pub attribute: String,
    pub value: String,
}

/// One candidate scatterplot: two measures, optionally restricted to the
/// rows where a category attribute takes one value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr")]
pub struct ScatterplotSpec {
    pub id: String,
    pub x_attr: String,
    pub y_attr: String,
    pub filter: Option<SpecFilter>,
}

#[derive(Deserialize)]
struct SpecRepr {
    id: Option<String>,
    x_attr: String,
    y_attr: String,
    filter: Option<SpecFilter>,
}

impl TryFrom<SpecRepr> for ScatterplotSpec {
    type Error = Error;

    fn try_from(repr: SpecRepr) -> Result<Self> {
        let spec = ScatterplotSpec::new(repr.x_attr, repr.y_attr, repr.filter)?;
        match repr.id {
            Some(id) if id != spec.id => Err(Error::InvalidSpec(format!(
                "id `{id}` does not match its fields (expected `{}`)",
                spec.id
            ))),
            _ => Ok(spec),
        }
    }
}

impl ScatterplotSpec {
    pub fn new(
        x_attr: impl Into<String>,
        y_attr: impl Into<String>,
        filter: Option<SpecFilter>,
    ) -> Result<Self> {
        let x_attr = x_attr.into();
        let y_attr = y_attr.into();
        if x_attr == y_attr {
            return Err(Error::InvalidSpec(format!(
                "x and y are the same attribute `{x_attr}`"
            )));
        }
        let id = spec_id(&x_attr, &y_attr, filter.as_ref());
        Ok(Self {
            id,
            x_attr,
            y_attr,
            filter,
        })
    }
}

/// `x~y` or `x~y@attr=value`, with `%`, `~`, `@`, `=` and `/` in names
/// percent-escaped so the mapping is injective and path-safe.
fn spec_id(x: &str, y: &str, filter: Option<&SpecFilter>) -> String {
    let mut id = String::new();
    escape_into(&mut id, x);
    id.push('~');
    escape_into(&mut id, y);
    if let Some(f) = filter {
        id.push('@');
        escape_into(&mut id, &f.attribute);
        id.push('=');
        escape_into(&mut id, &f.value);
    }
    id
}

fn escape_into(out: &mut String, s: &str) {
    for c in s.chars() {
        match c {
            '%' | '~' | '@' | '=' | '/' => {
                let _ = write!(out, "%{:02X}", c as u32);
            }
            _ => out.push(c),
        }
    }
}

/// Every unordered pair of measures, `x_attr < y_attr`, sorted.
pub fn enumerate_pairwise(catalog: &AttributeCatalog) -> Vec<ScatterplotSpec> {
    let mut names: Vec<&str> = catalog.measures.iter().map(String::as_str).collect();
    names.sort_unstable();
    names.dedup();
    let mut specs = Vec::with_capacity(names.len() * names.len().saturating_sub(1) / 2);
    for (i, x) in names.iter().enumerate() {
        for y in &names[i + 1..] {
            specs.push(ScatterplotSpec::new(*x, *y, None).expect("distinct names"));
        }
    }
    specs
}

/// One spec per distinct value of `cat_attr`, ordered by value.
pub fn enumerate_by_category(
    table: &Table,
    catalog: &AttributeCatalog,
    x_attr: &str,
    y_attr: &str,
    cat_attr: &str,
    max_values: usize,
) -> Result<Vec<ScatterplotSpec>> {
    for attr in [x_attr, y_attr, cat_attr] {
        if table.column(attr).is_none() {
            return Err(Error::UnknownAttribute(attr.to_string()));
        }
    }
    for attr in [x_attr, y_attr] {
        if !catalog.is_measure(attr) {
            return Err(Error::InvalidSpec(format!("`{attr}` is not a measure")));
        }
    }
    if !catalog.is_category(cat_attr) {
        return Err(Error::InvalidSpec(format!(
            "`{cat_attr}` is not a category"
        )));
    }
    let values = table.distinct_values(cat_attr)?;
    if values.len() > max_values {
        return Err(Error::Cardinality {
            attribute: cat_attr.to_string(),
            distinct: values.len(),
            max: max_values,
        });
    }
    values
        .into_iter()
        .map(|value| {
            ScatterplotSpec::new(
                x_attr,
                y_attr,
                Some(SpecFilter {
                    attribute: cat_attr.to_string(),
                    value,
                }),
            )
        })
        .collect()
}

/// A scatterplot's points in data units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPointSet {
    pub spec: ScatterplotSpec,
    pub points: Vec<Point>,
    /// Rows passing the filter but lacking a finite x or y.
    pub dropped_rows: usize,
}

impl RawPointSet {
    /// The empty-plot signal: no row survived. Callers building a
    /// collection keep such plots and flag them.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Extracts the points of one spec, preserving row order.
pub fn materialize(table: &Table, spec: &ScatterplotSpec) -> Result<RawPointSet> {
    let xs = table.require(&spec.x_attr)?;
    let ys = table.require(&spec.y_attr)?;
    for (attr, col) in [(&spec.x_attr, xs), (&spec.y_attr, ys)] {
        if !col.is_numeric() {
            return Err(Error::InvalidSpec(format!("`{attr}` is not numeric")));
        }
    }
    let filter = match &spec.filter {
        Some(f) => Some((table.require(&f.attribute)?, f.value.as_str())),
        None => None,
    };

    let mut points = Vec::new();
    let mut dropped_rows = 0;
    for row in 0..table.row_count() {
        if let Some((col, value)) = filter {
            if col.category_key(row).as_deref() != Some(value) {
                continue;
            }
        }
        match (xs.finite(row), ys.finite(row)) {
            (Some(x), Some(y)) => points.push(Point::new(x, y)),
            _ => dropped_rows += 1,
        }
    }
    Ok(RawPointSet {
        spec: spec.clone(),
        points,
        dropped_rows,
    })
}
