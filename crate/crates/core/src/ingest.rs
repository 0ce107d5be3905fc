//! Loading, validating and merging the raw cumulative series and the static
//! country features into a [`Panel`].
//!
//! Input formats:
//!
//! * time-series CSV: first column `Country`, remaining columns ISO dates
//!   (`YYYY-MM-DD`, daily and contiguous), cells unsigned cumulative counts;
//!   one file per series kind;
//! * static CSV: first column `Country`, remaining columns canonical or
//!   aliased feature names (see [`STATIC_FEATURES`] and
//!   [`canonical_static_name`]), cells decimal or empty.
//!
//! The panel export is a directory holding one `<country>.csv` per country
//! with columns `date,active,deaths_daily,recovered_daily` plus a
//! `statics.csv` in the static input format.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The 36 static country features, in canonical column order.
pub const STATIC_FEATURES: [&str; 36] = [
    "latitude",
    "longitude",
    "population",
    "Density",
    "Urban-Pop",
    "Fertility",
    "Median-Age",
    "Avg-Temperature",
    "Avg-Humidity",
    "Male-Birth",
    "MF",
    "MF-14",
    "MF-25",
    "MF-54",
    "MF-64",
    "MF-65+",
    "Smokers",
    "Bed-Capacity",
    "% Female-Lung",
    "% Male-Lung",
    "% Lung",
    "Pneumonia-Death-100K",
    "H1N1-Underestimate",
    "H1N1-Confirmed",
    "H1N1-Deaths",
    "Annual-Precipitation",
    "Property-Affordability",
    "Health-Care",
    "GDP-2019",
    "Health-Expenses",
    "Health-Expenses-1M",
    "Gathering-Limit",
    "Nonessential-Close-Days",
    "Gathering-Limit-Days",
    "School-Close-Days",
    "PublicPlace-Close-Days",
];

/// Header spellings used by the public country-feature datasets, mapped to
/// canonical names. Matching is on the normalized form (see [`normalize`]).
const STATIC_ALIASES: &[(&str, &str)] = &[
    ("lat", "latitude"),
    ("long", "longitude"),
    ("lng", "longitude"),
    ("lon", "longitude"),
    ("pop", "population"),
    ("urbanpopulation", "Urban-Pop"),
    ("fertilityrate", "Fertility"),
    ("avgtemp", "Avg-Temperature"),
    ("avghumidity", "Avg-Humidity"),
    ("sex0", "Male-Birth"),
    ("sexratio", "MF"),
    ("sex14", "MF-14"),
    ("sex25", "MF-25"),
    ("sex54", "MF-54"),
    ("sex64", "MF-64"),
    ("sex65plus", "MF-65+"),
    ("hospibed", "Bed-Capacity"),
    ("lung", "% Lung"),
    ("femalelung", "% Female-Lung"),
    ("malelung", "% Male-Lung"),
    ("pneumonia", "Pneumonia-Death-100K"),
    ("h1n1underestimated", "H1N1-Underestimate"),
    ("h1n1cases", "H1N1-Confirmed"),
    ("h1n1geographicspread", "H1N1-Confirmed"),
    ("h1n1death", "H1N1-Deaths"),
    ("precipitation", "Annual-Precipitation"),
    ("affordability", "Property-Affordability"),
    ("healthcareindex", "Health-Care"),
    ("gdp2019", "GDP-2019"),
    ("healthexp", "Health-Expenses"),
    ("healthperpop", "Health-Expenses-1M"),
    ("gatheringlimit", "Gathering-Limit"),
    ("nonessential", "Nonessential-Close-Days"),
    ("gathering", "Gathering-Limit-Days"),
    ("schools", "School-Close-Days"),
    ("publicplace", "PublicPlace-Close-Days"),
];

/// Country spellings that differ between sources, mapped to one name.
const COUNTRY_ALIASES: &[(&str, &str)] = &[
    ("US", "United States"),
    ("USA", "United States"),
    ("United States of America", "United States"),
    ("UK", "United Kingdom"),
    ("Korea, South", "South Korea"),
    ("Republic of Korea", "South Korea"),
    ("Czechia", "Czech Republic"),
    ("Taiwan*", "Taiwan"),
    ("Mainland China", "China"),
    ("Russian Federation", "Russia"),
    ("Iran (Islamic Republic of)", "Iran"),
    ("Viet Nam", "Vietnam"),
    ("Burma", "Myanmar"),
    ("Cote d'Ivoire", "Ivory Coast"),
    ("Côte d'Ivoire", "Ivory Coast"),
    ("Congo (Kinshasa)", "DR Congo"),
    ("Democratic Republic of the Congo", "DR Congo"),
    ("Congo (Brazzaville)", "Republic of the Congo"),
    ("North Macedonia", "Macedonia"),
    ("Turkiye", "Turkey"),
    ("Türkiye", "Turkey"),
];

pub fn canonical_country(name: &str) -> String {
    let name = name.trim();
    COUNTRY_ALIASES
        .iter()
        .find(|(alias, _)| *alias == name)
        .map(|(_, canon)| (*canon).to_string())
        .unwrap_or_else(|| name.to_string())
}

/// Lowercase and keep only ASCII alphanumerics and `+`.
fn normalize(header: &str) -> String {
    header
        .chars()
        .filter(|c| c.is_ascii_alphanumeric() || *c == '+')
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

pub fn canonical_static_name(header: &str) -> Option<&'static str> {
    let key = normalize(header);
    STATIC_FEATURES
        .iter()
        .find(|name| normalize(name) == key)
        .copied()
        .or_else(|| {
            STATIC_ALIASES
                .iter()
                .find(|(alias, _)| *alias == key)
                .map(|(_, canon)| *canon)
        })
}

fn static_position(name: &str) -> Option<usize> {
    STATIC_FEATURES.iter().position(|n| *n == name)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SeriesKind {
    Confirmed,
    Deaths,
    Recovered,
}

impl std::fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SeriesKind::Confirmed => "total-confirmed",
            SeriesKind::Deaths => "total-deaths",
            SeriesKind::Recovered => "total-recovered",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesRow {
    pub country: String,
    pub values: Vec<u64>,
}

/// Cumulative counts, one row per country, one column per day.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSeriesTable {
    pub kind: SeriesKind,
    pub dates: Vec<NaiveDate>,
    pub rows: Vec<SeriesRow>,
}

impl RawSeriesTable {
    /// Serializes in the input layout read by [`read_timeseries`].
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["Country".to_string()];
        header.extend(self.dates.iter().map(|d| d.to_string()));
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut rec = vec![row.country.clone()];
            rec.extend(row.values.iter().map(|v| v.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8 input")
    }
}

fn malformed(source: &str, line: u64, message: impl Into<String>) -> Error {
    Error::MalformedCsv {
        path: source.to_string(),
        line,
        message: message.into(),
    }
}

fn csv_error(source: &str, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    malformed(source, line, e.to_string())
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io(path, e))
}

pub fn load_timeseries_csv(path: impl AsRef<Path>, kind: SeriesKind) -> Result<RawSeriesTable> {
    let path = path.as_ref();
    read_timeseries(open(path)?, kind, &path.display().to_string())
}

pub fn read_timeseries<R: Read>(reader: R, kind: SeriesKind, source: &str) -> Result<RawSeriesTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    if headers.len() < 2 || !headers[0].eq_ignore_ascii_case("country") {
        return Err(malformed(source, 1, "expected a `Country` column followed by dates"));
    }
    let mut dates = Vec::with_capacity(headers.len() - 1);
    for h in headers.iter().skip(1) {
        let d = NaiveDate::parse_from_str(h, "%Y-%m-%d")
            .map_err(|_| malformed(source, 1, format!("bad date header {h:?}")))?;
        if let Some(&prev) = dates.last() {
            if d <= prev {
                return Err(malformed(source, 1, format!("date {d} does not follow {prev}")));
            }
            if d != prev + chrono::Days::new(1) {
                return Err(Error::GapInDates {
                    path: source.to_string(),
                    before: prev.to_string(),
                    after: d.to_string(),
                });
            }
        }
        dates.push(d);
    }
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(source, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let country = record[0].to_string();
        if country.is_empty() {
            return Err(malformed(source, line, "empty country name"));
        }
        if !seen.insert(country.clone()) {
            return Err(malformed(source, line, format!("duplicate country {country:?}")));
        }
        let mut values = Vec::with_capacity(dates.len());
        for cell in record.iter().skip(1) {
            match cell.parse::<u64>() {
                Ok(v) => values.push(v),
                Err(_) => match cell.replace('−', "-").parse::<i64>() {
                    Ok(v) if v < 0 => {
                        return Err(Error::NegativeCumulative {
                            path: source.to_string(),
                            line,
                            country,
                            value: v,
                        })
                    }
                    _ => return Err(malformed(source, line, format!("bad count {cell:?}"))),
                },
            }
        }
        rows.push(SeriesRow { country, values });
    }
    Ok(RawSeriesTable { kind, dates, rows })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StaticRow {
    pub country: String,
    pub values: Vec<Option<f64>>,
}

/// Static features with canonical column names, in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticFeatureTable {
    pub columns: Vec<String>,
    pub rows: Vec<StaticRow>,
    /// Dropped columns and similar non-fatal findings.
    pub warnings: Vec<String>,
}

impl StaticFeatureTable {
    pub fn value(&self, country: &str, feature: &str) -> Option<f64> {
        let col = self.columns.iter().position(|c| c == feature)?;
        self.rows
            .iter()
            .find(|r| r.country == country)
            .and_then(|r| r.values[col])
    }
}

impl StaticFeatureTable {
    /// Serializes in the input layout read by [`read_static`]. Missing
    /// values are written as empty cells.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["Country".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut rec = vec![row.country.clone()];
            rec.extend(row.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8 input")
    }
}

/// Loads a static-feature CSV. Unknown columns are dropped with a warning,
/// or rejected with [`Error::UnmappableHeader`] when `strict` is set.
pub fn load_static_csv(path: impl AsRef<Path>, strict: bool) -> Result<StaticFeatureTable> {
    let path = path.as_ref();
    read_static(open(path)?, &path.display().to_string(), strict)
}

pub fn read_static<R: Read>(reader: R, source: &str, strict: bool) -> Result<StaticFeatureTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    if headers.is_empty() || !matches!(normalize(&headers[0]).as_str(), "country" | "countryregion") {
        return Err(malformed(source, 1, "expected a `Country` first column"));
    }
    let mut warnings = Vec::new();
    // (csv column, canonical position)
    let mut mapping: Vec<(usize, usize)> = Vec::new();
    for (i, h) in headers.iter().enumerate().skip(1) {
        match canonical_static_name(h).and_then(static_position) {
            Some(pos) if mapping.iter().any(|&(_, p)| p == pos) => {
                warnings.push(format!("{source}: duplicate column {h:?} for {} ignored", STATIC_FEATURES[pos]));
            }
            Some(pos) => mapping.push((i, pos)),
            None if strict => {
                return Err(Error::UnmappableHeader {
                    path: source.to_string(),
                    header: h.to_string(),
                })
            }
            None => {
                log::warn!("{source}: dropping unknown column {h:?}");
                warnings.push(format!("{source}: dropped unknown column {h:?}"));
            }
        }
    }
    mapping.sort_by_key(|&(_, pos)| pos);
    let columns: Vec<String> = mapping.iter().map(|&(_, p)| STATIC_FEATURES[p].to_string()).collect();
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(source, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let country = record[0].to_string();
        if !seen.insert(country.clone()) {
            return Err(malformed(source, line, format!("duplicate country {country:?}")));
        }
        let mut values = Vec::with_capacity(mapping.len());
        for &(col, pos) in &mapping {
            let cell = record.get(col).unwrap_or("");
            let value = if cell.is_empty() || matches!(cell.to_ascii_lowercase().as_str(), "na" | "nan" | "n/a") {
                None
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| malformed(source, line, format!("bad number {cell:?}")))?;
                if !v.is_finite() {
                    return Err(malformed(source, line, format!("non-finite number {cell:?}")));
                }
                Some(v)
            };
            if STATIC_FEATURES[pos] == "H1N1-Underestimate" {
                if let Some(v) = value {
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::InvalidStaticValue {
                            path: source.to_string(),
                            country,
                            feature: STATIC_FEATURES[pos].to_string(),
                            value: v,
                        });
                    }
                }
            }
            values.push(value);
        }
        rows.push(StaticRow { country, values });
    }
    Ok(StaticFeatureTable {
        columns,
        rows,
        warnings,
    })
}

/// Per-country derived daily series and static vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountrySeries {
    pub name: String,
    /// `confirmed − deaths − recovered` (cumulative), per day.
    pub active: Vec<f64>,
    /// Day-over-day increase of cumulative deaths; day 0 carries the
    /// cumulative count itself so the series sums back to the cumulative one.
    pub deaths_daily: Vec<f64>,
    pub recovered_daily: Vec<f64>,
    pub statics: Vec<f64>,
}

/// Clean, aligned per-country data on a shared daily date axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub dates: Vec<NaiveDate>,
    pub static_names: Vec<String>,
    /// Sorted by name.
    pub countries: Vec<CountrySeries>,
}

#[derive(Clone, Debug, Default)]
pub struct MergeOptions {
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MergeReport {
    pub countries: Vec<String>,
    /// Countries present in some input but not in all, with the inputs
    /// lacking them.
    pub dropped_countries: Vec<(String, String)>,
    pub dropped_features: Vec<String>,
    pub warnings: Vec<String>,
}

fn daily_increments(cum: &[u64], country: &str, kind: SeriesKind, warnings: &mut Vec<String>) -> Vec<f64> {
    let mut out = Vec::with_capacity(cum.len());
    for (t, &v) in cum.iter().enumerate() {
        if t == 0 {
            out.push(v as f64);
            continue;
        }
        let prev = cum[t - 1];
        if v < prev {
            warnings.push(format!(
                "{country}: {kind} decreases by {} at day {t}; daily value clamped to 0",
                prev - v
            ));
            out.push(0.0);
        } else {
            out.push((v - prev) as f64);
        }
    }
    out
}

/// Intersects countries across all inputs, drops static columns missing for
/// any retained country, and derives active cases and daily increments.
pub fn merge_and_clean(
    confirmed: &RawSeriesTable,
    deaths: &RawSeriesTable,
    recovered: &RawSeriesTable,
    statics: &[StaticFeatureTable],
    options: &MergeOptions,
) -> Result<(Panel, MergeReport)> {
    for (table, kind) in [
        (confirmed, SeriesKind::Confirmed),
        (deaths, SeriesKind::Deaths),
        (recovered, SeriesKind::Recovered),
    ] {
        if table.kind != kind {
            return Err(Error::Config(format!("expected a {kind} table, got {}", table.kind)));
        }
        if table.rows.is_empty() || table.dates.is_empty() {
            return Err(Error::EmptyIntersection);
        }
    }
    if confirmed.dates != deaths.dates || confirmed.dates != recovered.dates {
        return Err(Error::SeriesLengthMismatch(format!(
            "confirmed {}..{} ({} days), deaths {} days, recovered {} days",
            confirmed.dates[0],
            confirmed.dates[confirmed.dates.len() - 1],
            confirmed.dates.len(),
            deaths.dates.len(),
            recovered.dates.len()
        )));
    }
    let mut report = MergeReport::default();

    let index_series = |t: &RawSeriesTable| -> BTreeMap<String, usize> {
        t.rows
            .iter()
            .enumerate()
            .map(|(i, r)| (canonical_country(&r.country), i))
            .collect()
    };
    let series_idx = [index_series(confirmed), index_series(deaths), index_series(recovered)];
    let static_idx: Vec<BTreeMap<String, usize>> = statics
        .iter()
        .map(|s| {
            s.rows
                .iter()
                .enumerate()
                .map(|(i, r)| (canonical_country(&r.country), i))
                .collect()
        })
        .collect();
    let mut source_names: Vec<String> = ["confirmed", "deaths", "recovered"].iter().map(|s| s.to_string()).collect();
    source_names.extend((0..statics.len()).map(|i| format!("statics[{i}]")));
    let all_maps: Vec<&BTreeMap<String, usize>> = series_idx.iter().chain(static_idx.iter()).collect();
    let union: BTreeSet<&String> = all_maps.iter().flat_map(|m| m.keys()).collect();
    let mut kept = Vec::new();
    for name in union {
        let missing: Vec<&str> = all_maps
            .iter()
            .zip(&source_names)
            .filter(|(m, _)| !m.contains_key(name))
            .map(|(_, s)| s.as_str())
            .collect();
        if missing.is_empty() {
            kept.push(name.clone());
        } else {
            log::warn!("excluding {name}: absent from {}", missing.join(", "));
            report.dropped_countries.push((name.clone(), missing.join(",")));
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyIntersection);
    }

    // static columns: value from the first table that has one
    let lookup = |country: &str, feature: &str| -> Option<f64> {
        statics.iter().zip(&static_idx).find_map(|(table, idx)| {
            let col = table.columns.iter().position(|c| c == feature)?;
            let row = *idx.get(country)?;
            table.rows[row].values[col]
        })
    };
    let mut static_names = Vec::new();
    for feature in STATIC_FEATURES {
        let offered = statics.iter().any(|s| s.columns.iter().any(|c| c == feature));
        if !offered {
            continue;
        }
        if kept.iter().all(|c| lookup(c, feature).is_some()) {
            static_names.push(feature.to_string());
        } else {
            report.dropped_features.push(feature.to_string());
        }
    }
    if !report.dropped_features.is_empty() {
        log::warn!("dropping static features not available for every country: {:?}", report.dropped_features);
    }

    let first = options
        .start
        .map(|d| confirmed.dates.partition_point(|&x| x < d))
        .unwrap_or(0);
    let last = options
        .end
        .map(|d| confirmed.dates.partition_point(|&x| x <= d))
        .unwrap_or(confirmed.dates.len());
    if first >= last {
        return Err(Error::SeriesLengthMismatch(format!(
            "date range {:?}..{:?} selects no days",
            options.start, options.end
        )));
    }
    let dates = confirmed.dates[first..last].to_vec();

    let mut countries = Vec::with_capacity(kept.len());
    for name in &kept {
        let c = &confirmed.rows[series_idx[0][name]].values;
        let d = &deaths.rows[series_idx[1][name]].values;
        let r = &recovered.rows[series_idx[2][name]].values;
        if c.len() != confirmed.dates.len() || d.len() != c.len() || r.len() != c.len() {
            return Err(Error::SeriesLengthMismatch(format!("{name}: row length differs from date axis")));
        }
        let active: Vec<f64> = (first..last)
            .map(|t| c[t] as f64 - d[t] as f64 - r[t] as f64)
            .collect();
        let deaths_daily = daily_increments(d, name, SeriesKind::Deaths, &mut report.warnings)[first..last].to_vec();
        let recovered_daily =
            daily_increments(r, name, SeriesKind::Recovered, &mut report.warnings)[first..last].to_vec();
        let statics_vec = static_names
            .iter()
            .map(|f| lookup(name, f).expect("availability checked"))
            .collect();
        countries.push(CountrySeries {
            name: name.clone(),
            active,
            deaths_daily,
            recovered_daily,
            statics: statics_vec,
        });
    }
    for w in &report.warnings {
        log::warn!("{w}");
    }
    report.countries = kept;
    Ok((
        Panel {
            dates,
            static_names,
            countries,
        },
        report,
    ))
}

/// File-system-safe stem for a country's export file.
pub fn country_file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

impl Panel {
    pub fn country_index(&self, name: &str) -> Option<usize> {
        let canon = canonical_country(name);
        self.countries.iter().position(|c| c.name == canon)
    }

    pub fn country(&self, name: &str) -> Option<&CountrySeries> {
        self.country_index(name).map(|i| &self.countries[i])
    }

    pub fn len_days(&self) -> usize {
        self.dates.len()
    }

    /// Cumulative (confirmed, deaths, recovered) reconstructed from the
    /// stored daily series of country `idx`.
    pub fn cumulative(&self, idx: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let c = &self.countries[idx];
        let running = |v: &[f64]| {
            v.iter()
                .scan(0.0, |acc, x| {
                    *acc += x;
                    Some(*acc)
                })
                .collect::<Vec<f64>>()
        };
        let deaths = running(&c.deaths_daily);
        let recovered = running(&c.recovered_daily);
        let confirmed = c
            .active
            .iter()
            .zip(&deaths)
            .zip(&recovered)
            .map(|((a, d), r)| a + d + r)
            .collect();
        (confirmed, deaths, recovered)
    }

    /// Cumulative input tables equivalent to this panel. Fails when a value
    /// is not a non-negative integer.
    pub fn to_series_tables(&self) -> Result<[RawSeriesTable; 3]> {
        let mut tables = [SeriesKind::Confirmed, SeriesKind::Deaths, SeriesKind::Recovered].map(|kind| RawSeriesTable {
            kind,
            dates: self.dates.clone(),
            rows: Vec::new(),
        });
        for (i, c) in self.countries.iter().enumerate() {
            let (conf, d, r) = self.cumulative(i);
            for (table, values) in tables.iter_mut().zip([conf, d, r]) {
                let ints = values
                    .iter()
                    .map(|&v| {
                        if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 {
                            Ok(v as u64)
                        } else {
                            Err(Error::Config(format!("{}: value {v} is not a count", c.name)))
                        }
                    })
                    .collect::<Result<Vec<u64>>>()?;
                table.rows.push(SeriesRow {
                    country: c.name.clone(),
                    values: ints,
                });
            }
        }
        Ok(tables)
    }

    pub fn to_static_table(&self) -> StaticFeatureTable {
        StaticFeatureTable {
            columns: self.static_names.clone(),
            rows: self
                .countries
                .iter()
                .map(|c| StaticRow {
                    country: c.name.clone(),
                    values: c.statics.iter().map(|&v| Some(v)).collect(),
                })
                .collect(),
            warnings: Vec::new(),
        }
    }

    /// Writes the panel export into `dir` (created if needed).
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut stems = BTreeSet::new();
        for c in &self.countries {
            let stem = country_file_stem(&c.name);
            if stem == "statics" || !stems.insert(stem.clone()) {
                return Err(Error::Config(format!("country file name collision for {:?}", c.name)));
            }
            let mut out = String::from("date,active,deaths_daily,recovered_daily\n");
            for (t, date) in self.dates.iter().enumerate() {
                out.push_str(&format!(
                    "{date},{},{},{}\n",
                    c.active[t], c.deaths_daily[t], c.recovered_daily[t]
                ));
            }
            let path = dir.join(format!("{stem}.csv"));
            fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join("statics.csv");
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["Country".to_string()];
        header.extend(self.static_names.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for c in &self.countries {
            let mut rec = vec![c.name.clone()];
            rec.extend(c.statics.iter().map(|v| v.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        let bytes = w.into_inner().expect("in-memory write");
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    }

    /// Reads a directory written by [`Panel::export`].
    pub fn import(dir: impl AsRef<Path>) -> Result<Panel> {
        let dir = dir.as_ref();
        let statics = load_static_csv(dir.join("statics.csv"), true)?;
        let mut countries = Vec::with_capacity(statics.rows.len());
        let mut dates: Option<Vec<NaiveDate>> = None;
        for row in &statics.rows {
            let path = dir.join(format!("{}.csv", country_file_stem(&row.country)));
            let source = path.display().to_string();
            let mut rdr = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_reader(open(&path)?);
            let mut these = Vec::new();
            let (mut active, mut deaths_daily, mut recovered_daily) = (Vec::new(), Vec::new(), Vec::new());
            for record in rdr.records() {
                let record = record.map_err(|e| csv_error(&source, e))?;
                let line = record.position().map(|p| p.line()).unwrap_or(0);
                if record.len() != 4 {
                    return Err(malformed(&source, line, "expected 4 columns"));
                }
                these.push(
                    NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
                        .map_err(|_| malformed(&source, line, "bad date"))?,
                );
                let num = |s: &str| -> Result<f64> {
                    s.parse().map_err(|_| malformed(&source, line, format!("bad number {s:?}")))
                };
                active.push(num(&record[1])?);
                deaths_daily.push(num(&record[2])?);
                recovered_daily.push(num(&record[3])?);
            }
            match &dates {
                None => dates = Some(these),
                Some(d) if *d != these => {
                    return Err(Error::SeriesLengthMismatch(format!("{source}: date axis differs")))
                }
                Some(_) => {}
            }
            let values = row
                .values
                .iter()
                .map(|v| v.ok_or_else(|| malformed("statics.csv", 0, format!("missing static for {}", row.country))))
                .collect::<Result<Vec<f64>>>()?;
            countries.push(CountrySeries {
                name: row.country.clone(),
                active,
                deaths_daily,
                recovered_daily,
                statics: values,
            });
        }
        countries.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(Panel {
            dates: dates.ok_or(Error::EmptyIntersection)?,
            static_names: statics.columns,
            countries,
        })
    }
}
