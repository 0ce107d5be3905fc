//! Seeded synthetic panels and sample sets with known structure, for tests,
//! benchmarks and demos.

use chrono::NaiveDate;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ingest::{
    merge_and_clean, CountrySeries, MergeOptions, Panel, RawSeriesTable, SeriesKind, SeriesRow, StaticFeatureTable, StaticRow,
    STATIC_FEATURES,
};
use crate::samples::{FeatureSpec, SampleSet};

pub fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 22).expect("valid date")
}

fn dates(days: usize) -> Vec<NaiveDate> {
    (0..days).map(|d| start_date() + chrono::Days::new(d as u64)).collect()
}

pub fn static_names() -> Vec<String> {
    STATIC_FEATURES.iter().map(|s| s.to_string()).collect()
}

/// 36 plausible static values. Latitude drives temperature down and
/// fertility drives median age down, so the static heatmap has structure.
fn static_vector<R: Rng>(rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..STATIC_FEATURES.len()).map(|_| rng.random_range(0.0..100.0)).collect();
    let lat: f64 = rng.random_range(-40.0..65.0);
    v[0] = lat;
    v[1] = rng.random_range(-120.0..150.0);
    v[2] = rng.random_range(1e6..2e8_f64).round();
    let fertility: f64 = rng.random_range(1.1..6.0);
    v[5] = fertility;
    v[6] = 50.0 - 5.0 * fertility + rng.random_range(-3.0..3.0);
    v[7] = 30.0 - 0.4 * lat.abs() + rng.random_range(-4.0..4.0);
    let underestimate = STATIC_FEATURES.iter().position(|&n| n == "H1N1-Underestimate").expect("listed");
    v[underestimate] = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
    v
}

fn country_name(i: usize) -> String {
    format!("Country{i:02}")
}

/// A panel whose active series follows
/// `a[t+1] = 1.95·a[t] − 0.97·a[t−1] + c`, with `c` linear in the
/// country's statics, so every future active count is an exact linear
/// function of the window features. Observations carry Gaussian noise of
/// standard deviation `noise_rel` times the mean |active|.
pub fn linear_panel(countries: usize, days: usize, noise_rel: f64, seed: u64) -> Panel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta: Vec<f64> = (0..STATIC_FEATURES.len()).map(|_| rng.random_range(0.0..0.05)).collect();
    let mut out = Vec::with_capacity(countries);
    for i in 0..countries {
        let statics = static_vector(&mut rng);
        // population is the only static far outside [−150, 150]
        let scaled: f64 = statics
            .iter()
            .zip(&beta)
            .enumerate()
            .map(|(j, (s, b))| b * s / if j == 2 { 1e6 } else { 1.0 })
            .sum();
        let c = 10.0 + scaled;
        let mut active = vec![rng.random_range(100.0..1000.0), rng.random_range(100.0..1000.0)];
        while active.len() < days {
            let n = active.len();
            active.push(1.95 * active[n - 1] - 0.97 * active[n - 2] + c);
        }
        active.truncate(days);
        out.push(CountrySeries {
            name: country_name(i),
            active,
            deaths_daily: (0..days).map(|_| rng.random_range(0.0..50.0_f64).round()).collect(),
            recovered_daily: (0..days).map(|_| rng.random_range(0.0..400.0_f64).round()).collect(),
            statics,
        });
    }
    let scale = out.iter().flat_map(|c| c.active.iter()).map(|v| v.abs()).sum::<f64>() / (countries * days).max(1) as f64;
    if noise_rel > 0.0 {
        let normal = Normal::new(0.0, noise_rel * scale).expect("finite sd");
        for c in &mut out {
            for v in &mut c.active {
                *v += normal.sample(&mut rng);
            }
        }
    }
    Panel {
        dates: dates(days),
        static_names: static_names(),
        countries: out,
    }
}

/// Cumulative confirmed/deaths/recovered tables from a discrete SIR
/// outbreak per country (with a lockdown that cuts transmission), plus a
/// static table. All counts are non-decreasing integers.
pub fn epidemic_tables(countries: usize, days: usize, seed: u64) -> ([RawSeriesTable; 3], StaticFeatureTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = dates(days);
    let mut tables = [SeriesKind::Confirmed, SeriesKind::Deaths, SeriesKind::Recovered].map(|kind| RawSeriesTable {
        kind,
        dates: axis.clone(),
        rows: Vec::new(),
    });
    let mut statics = StaticFeatureTable {
        columns: static_names(),
        rows: Vec::new(),
        warnings: Vec::new(),
    };
    for i in 0..countries {
        let s = static_vector(&mut rng);
        let population = s[2];
        let beta0 = rng.random_range(0.22..0.4);
        let gamma = rng.random_range(0.06..0.12);
        let mortality = rng.random_range(0.01..0.06);
        let lockdown = rng.random_range(15..40);
        let damping = rng.random_range(0.25..0.6);
        let (mut sus, mut inf): (f64, f64) = (population, rng.random_range(2.0..40.0));
        let (mut c, mut d, mut r) = (inf, 0.0_f64, 0.0_f64);
        let mut rows = [Vec::new(), Vec::new(), Vec::new()];
        for t in 0..days {
            rows[0].push(c.floor() as u64);
            rows[1].push(d.floor() as u64);
            rows[2].push(r.floor() as u64);
            let beta = if t >= lockdown { beta0 * damping } else { beta0 };
            let jitter = 1.0 + 0.05 * rng.sample::<f64, _>(StandardNormal);
            let new_inf = (beta * jitter.max(0.5) * sus * inf / population).min(sus);
            let removed = gamma * inf;
            sus -= new_inf;
            inf += new_inf - removed;
            c += new_inf;
            d += mortality * removed;
            r += (1.0 - mortality) * removed;
        }
        let name = country_name(i);
        for (table, values) in tables.iter_mut().zip(rows) {
            table.rows.push(SeriesRow {
                country: name.clone(),
                values,
            });
        }
        statics.rows.push(StaticRow {
            country: name,
            values: s.into_iter().map(Some).collect(),
        });
    }
    (tables, statics)
}

/// [`epidemic_tables`] merged into a panel.
pub fn epidemic_panel(countries: usize, days: usize, seed: u64) -> Result<Panel> {
    let ([c, d, r], statics) = epidemic_tables(countries, days, seed);
    Ok(merge_and_clean(&c, &d, &r, &[statics], &MergeOptions::default())?.0)
}

/// Writes [`epidemic_tables`] as input CSVs into `dir`: `confirmed.csv`,
/// `deaths.csv`, `recovered.csv` and `statics.csv`, in that order.
pub fn write_epidemic_csvs(dir: impl AsRef<Path>, countries: usize, days: usize, seed: u64) -> Result<[PathBuf; 4]> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ([c, d, r], statics) = epidemic_tables(countries, days, seed);
    let files = [
        ("confirmed.csv", c.to_csv()),
        ("deaths.csv", d.to_csv()),
        ("recovered.csv", r.to_csv()),
        ("statics.csv", statics.to_csv()),
    ];
    let mut paths = Vec::with_capacity(4);
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths.try_into().expect("four files"))
}

/// Gaussian design with `y = Σ_{j∈support} β_j x_j + noise`, `|β_j|` in
/// [1, 3], noise standard deviation `noise_rel` times the signal's. Every
/// horizon up to `k_max` gets the same target. Returns the support.
pub fn sparse_linear_samples(rows: usize, n_features: usize, n_support: usize, k_max: usize, noise_rel: f64, seed: u64) -> (SampleSet, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((rows, n_features), |_| rng.sample::<f64, _>(StandardNormal));
    let mut support: Vec<usize> = rand::seq::index::sample(&mut rng, n_features, n_support).into_vec();
    support.sort_unstable();
    let beta: Vec<f64> = support
        .iter()
        .map(|_| rng.random_range(1.0..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let signal: Array1<f64> = x
        .rows()
        .into_iter()
        .map(|r| support.iter().zip(&beta).map(|(&j, b)| b * r[j]).sum())
        .collect();
    let sd = (signal.iter().map(|v| v * v).sum::<f64>() / rows as f64).sqrt();
    let y: Array1<f64> = if noise_rel > 0.0 {
        let normal = Normal::new(0.0, noise_rel * sd).expect("finite sd");
        signal.mapv(|v| v + normal.sample(&mut rng))
    } else {
        signal
    };
    let groups: Vec<usize> = (0..rows).map(|r| r % 10).collect();
    let samples = SampleSet::from_parts(x, vec![y; k_max], &groups, FeatureSpec::anonymous(n_features)).expect("consistent shapes");
    (samples, support)
}

/// Same design, targets replaced by independent standard normal draws
/// scaled to each original target's spread.
pub fn noise_targets(samples: &SampleSet, seed: u64) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets = samples
        .targets
        .iter()
        .map(|t| {
            let n = t.len().max(1) as f64;
            let mean = t.sum() / n;
            let sd = (t.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt().max(1.0);
            t.mapv(|_| mean + sd * rng.sample::<f64, _>(StandardNormal))
        })
        .collect();
    samples.with_targets(targets).expect("same shape")
}
