//! CSV and JSON files read and written by the command-line tool.
//!
//! Every CSV starts with `# key: value` comment lines carrying at least
//! `format_version`; the column header follows.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{check_format_version, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::estimator::CiMethod;
use crate::protocol::{MeasurementRecord, T1Sample};
use crate::timeseries::{histogram_fit, summarize, SummaryStats, WindowEstimate};

/// Fraction of malformed data rows above which a read fails.
pub const MAX_MALFORMED_FRACTION: f64 = 0.001;

pub const RECORD_COLUMNS: [&str; 8] = ["cycle", "wall_time", "point", "m", "variant", "shots", "ones", "sequence_id"];

pub const ESTIMATE_COLUMNS: [&str; 25] = [
    "point",
    "window",
    "first_cycle",
    "last_cycle",
    "midpoint_h",
    "epsilon",
    "epsilon_lo",
    "epsilon_hi",
    "epsilon_inc",
    "epsilon_inc_lo",
    "epsilon_inc_hi",
    "epsilon_coh",
    "epsilon_coh_lo",
    "epsilon_coh_hi",
    "diamond_lower",
    "diamond_upper",
    "p",
    "p_lo",
    "p_hi",
    "u",
    "u_lo",
    "u_hi",
    "ci_method",
    "consistency",
    "fit_status",
];

pub const HISTOGRAM_COLUMNS: [&str; 10] =
    ["point", "quantity", "bin", "lo", "hi", "count", "expected", "mu", "sigma", "degenerate"];

pub const T1_COLUMNS: [&str; 4] = ["cycle", "time_h", "frequency_ghz", "t1_s"];

pub const SERIES_COLUMNS: [&str; 12] = [
    "point",
    "midpoint_h",
    "epsilon",
    "epsilon_lo",
    "epsilon_hi",
    "epsilon_inc",
    "epsilon_inc_lo",
    "epsilon_inc_hi",
    "epsilon_coh",
    "epsilon_coh_lo",
    "epsilon_coh_hi",
    "fit_status",
];

/// `# key: value` lines at the top of a file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Header {
    pub entries: Vec<(String, String)>,
}

impl Header {
    pub fn new(kind: &str) -> Self {
        Self { entries: vec![("kind".into(), kind.into()), ("format_version".into(), FORMAT_VERSION.into())] }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("# {k}: {v}\n")).collect()
    }

    fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .map_while(|l| l.strip_prefix('#'))
            .filter_map(|l| l.split_once(':'))
            .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
            .collect();
        Self { entries }
    }

    fn check(&self, kind: &str) -> Result<()> {
        let version = self.get("format_version").ok_or_else(|| Error::Malformed("missing format_version header".into()))?;
        check_format_version(version)?;
        match self.get("kind") {
            Some(k) if k != kind => Err(Error::Malformed(format!("expected a {kind} file, found {k}"))),
            _ => Ok(()),
        }
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// Header comments, column names, then one row per item.
pub fn csv_bytes<T: Serialize>(header: &Header, columns: &[&str], rows: &[T]) -> Result<Vec<u8>> {
    let mut buf = header.render().into_bytes();
    {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
        w.write_record(columns)?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

/// Rows of a CSV file plus the data lines that failed to parse.
#[derive(Debug, Clone)]
pub struct CsvFile<T> {
    pub header: Header,
    pub rows: Vec<T>,
    pub malformed: Vec<(u64, String)>,
}

/// Reads `kind` rows, tolerating up to [`MAX_MALFORMED_FRACTION`] malformed
/// lines. `check` adds row-level validation.
pub fn read_csv<T, F>(path: &Path, kind: &str, columns: &[&str], check: F) -> Result<CsvFile<T>>
where
    T: DeserializeOwned,
    F: Fn(&T) -> std::result::Result<(), String>,
{
    let text = std::fs::read_to_string(path)?;
    let header = Header::parse(&text);
    header.check(kind)?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).flexible(true).from_reader(text.as_bytes());
    let found = reader.headers()?.clone();
    if found.iter().ne(columns.iter().copied()) {
        return Err(Error::Malformed(format!("{}: expected columns {}", path.display(), columns.join(","))));
    }
    let mut rows = Vec::new();
    let mut malformed = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                malformed.push((line, e.to_string()));
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        match record.deserialize::<T>(Some(&found)) {
            Ok(row) => match check(&row) {
                Ok(()) => rows.push(row),
                Err(msg) => malformed.push((line, msg)),
            },
            Err(e) => malformed.push((line, e.to_string())),
        }
    }
    let total = rows.len() + malformed.len();
    if !malformed.is_empty() && malformed.len() as f64 > MAX_MALFORMED_FRACTION * total as f64 {
        let listing: Vec<String> = malformed.iter().take(20).map(|(l, m)| format!("line {l}: {m}")).collect();
        return Err(Error::Malformed(format!(
            "{}: {} of {total} rows malformed\n{}",
            path.display(),
            malformed.len(),
            listing.join("\n")
        )));
    }
    Ok(CsvFile { header, rows, malformed })
}

pub fn records_header(config_hash: &str, seed: u64) -> Header {
    Header::new("records").with("config_hash", config_hash).with("seed", seed)
}

pub fn write_records(path: &Path, header: &Header, records: &[MeasurementRecord]) -> Result<()> {
    write_atomic(path, &csv_bytes(header, &RECORD_COLUMNS, records)?)
}

pub fn read_records(path: &Path) -> Result<CsvFile<MeasurementRecord>> {
    read_csv(path, "records", &RECORD_COLUMNS, |r: &MeasurementRecord| {
        if r.shots == 0 || r.ones > r.shots {
            Err(format!("invalid counts {}/{}", r.ones, r.shots))
        } else if !r.wall_time.is_finite() {
            Err("non-finite wall_time".into())
        } else {
            Ok(())
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T1Row {
    pub cycle: u32,
    pub time_h: f64,
    pub frequency_ghz: f64,
    pub t1_s: Option<f64>,
}

impl From<&T1Sample> for T1Row {
    fn from(s: &T1Sample) -> Self {
        Self { cycle: s.cycle, time_h: s.wall_time, frequency_ghz: s.frequency, t1_s: s.t1 }
    }
}

pub fn write_t1(path: &Path, header: &Header, samples: &[T1Sample]) -> Result<()> {
    let rows: Vec<T1Row> = samples.iter().map(T1Row::from).collect();
    write_atomic(path, &csv_bytes(header, &T1_COLUMNS, &rows)?)
}

pub fn read_t1(path: &Path) -> Result<CsvFile<T1Row>> {
    read_csv(path, "t1_grid", &T1_COLUMNS, |_: &T1Row| Ok(()))
}

/// One window of one operating point. Numeric fields are empty when the fit
/// failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatesRow {
    pub point: String,
    pub window: usize,
    pub first_cycle: u32,
    pub last_cycle: u32,
    pub midpoint_h: f64,
    pub epsilon: Option<f64>,
    pub epsilon_lo: Option<f64>,
    pub epsilon_hi: Option<f64>,
    pub epsilon_inc: Option<f64>,
    pub epsilon_inc_lo: Option<f64>,
    pub epsilon_inc_hi: Option<f64>,
    pub epsilon_coh: Option<f64>,
    pub epsilon_coh_lo: Option<f64>,
    pub epsilon_coh_hi: Option<f64>,
    pub diamond_lower: Option<f64>,
    pub diamond_upper: Option<f64>,
    pub p: Option<f64>,
    pub p_lo: Option<f64>,
    pub p_hi: Option<f64>,
    pub u: Option<f64>,
    pub u_lo: Option<f64>,
    pub u_hi: Option<f64>,
    pub ci_method: Option<CiMethod>,
    pub consistency: Option<String>,
    pub fit_status: String,
}

impl EstimatesRow {
    /// ε, ε_inc, ε_coh when the window was fitted.
    pub fn values(&self) -> Option<[f64; 3]> {
        Some([self.epsilon?, self.epsilon_inc?, self.epsilon_coh?])
    }
}

impl From<&WindowEstimate> for EstimatesRow {
    fn from(w: &WindowEstimate) -> Self {
        let b = w.budget.as_ref().ok();
        let ci = |k: usize| (b.map(|b| b.ci[k].lo), b.map(|b| b.ci[k].hi));
        let (e_lo, e_hi) = ci(0);
        let (i_lo, i_hi) = ci(1);
        let (c_lo, c_hi) = ci(2);
        Self {
            point: w.point.clone(),
            window: w.index,
            first_cycle: w.first_cycle,
            last_cycle: w.last_cycle,
            midpoint_h: w.midpoint,
            epsilon: b.map(|b| b.epsilon),
            epsilon_lo: e_lo,
            epsilon_hi: e_hi,
            epsilon_inc: b.map(|b| b.epsilon_inc),
            epsilon_inc_lo: i_lo,
            epsilon_inc_hi: i_hi,
            epsilon_coh: b.map(|b| b.epsilon_coh),
            epsilon_coh_lo: c_lo,
            epsilon_coh_hi: c_hi,
            diamond_lower: b.map(|b| b.diamond_lower),
            diamond_upper: b.map(|b| b.diamond_upper),
            p: b.map(|b| b.p),
            p_lo: b.map(|b| b.rate_ci[0].lo),
            p_hi: b.map(|b| b.rate_ci[0].hi),
            u: b.map(|b| b.u),
            u_lo: b.map(|b| b.rate_ci[1].lo),
            u_hi: b.map(|b| b.rate_ci[1].hi),
            ci_method: b.map(|b| b.ci_method),
            consistency: b.map(|b| b.consistency.as_str().to_owned()),
            fit_status: w.status().to_owned(),
        }
    }
}

pub fn write_estimates(path: &Path, header: &Header, rows: &[EstimatesRow]) -> Result<()> {
    write_atomic(path, &csv_bytes(header, &ESTIMATE_COLUMNS, rows)?)
}

pub fn read_estimates(path: &Path) -> Result<CsvFile<EstimatesRow>> {
    read_csv(path, "estimates", &ESTIMATE_COLUMNS, |_: &EstimatesRow| Ok(()))
}

pub const QUANTITIES: [&str; 3] = ["epsilon", "epsilon_inc", "epsilon_coh"];

/// [`SummaryStats`] with the interquartile range spelled out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantitySummary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub iqr: f64,
    pub cv_percent: Option<f64>,
}

impl From<SummaryStats> for QuantitySummary {
    fn from(s: SummaryStats) -> Self {
        Self {
            count: s.count,
            mean: s.mean,
            sd: s.sd,
            median: s.median,
            q25: s.q25,
            q75: s.q75,
            iqr: s.iqr(),
            cv_percent: s.cv_percent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub windows: usize,
    pub failed_windows: usize,
    /// Keyed by quantity name; absent with fewer than two fitted windows.
    pub quantities: BTreeMap<String, Option<QuantitySummary>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub points: BTreeMap<String, PointSummary>,
}

fn by_point(rows: &[EstimatesRow]) -> BTreeMap<&str, Vec<&EstimatesRow>> {
    let mut map: BTreeMap<&str, Vec<&EstimatesRow>> = BTreeMap::new();
    for r in rows {
        map.entry(r.point.as_str()).or_default().push(r);
    }
    map
}

pub fn summarize_estimates(rows: &[EstimatesRow], config_hash: Option<&str>) -> Summary {
    let points = by_point(rows)
        .into_iter()
        .map(|(label, rs)| {
            let fitted: Vec<[f64; 3]> = rs.iter().filter_map(|r| r.values()).collect();
            let quantities = QUANTITIES
                .iter()
                .enumerate()
                .map(|(k, q)| {
                    let values: Vec<f64> = fitted.iter().map(|v| v[k]).collect();
                    (q.to_string(), summarize(&values).ok().map(QuantitySummary::from))
                })
                .collect();
            let summary = PointSummary { windows: rs.len(), failed_windows: rs.len() - fitted.len(), quantities };
            (label.to_owned(), summary)
        })
        .collect();
    Summary { format_version: FORMAT_VERSION.into(), config_hash: config_hash.map(str::to_owned), points }
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(summary)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub point: String,
    pub quantity: String,
    pub bin: usize,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub expected: f64,
    pub mu: f64,
    pub sigma: f64,
    pub degenerate: bool,
}

/// Histogram and normal fit of every quantity of every point. Points with
/// fewer than two fitted windows are skipped.
pub fn histogram_rows(rows: &[EstimatesRow], bins: usize) -> Vec<HistogramRow> {
    let mut out = Vec::new();
    for (label, rs) in by_point(rows) {
        let fitted: Vec<[f64; 3]> = rs.iter().filter_map(|r| r.values()).collect();
        for (k, q) in QUANTITIES.iter().enumerate() {
            let values: Vec<f64> = fitted.iter().map(|v| v[k]).collect();
            let Ok(h) = histogram_fit(&values, bins) else { continue };
            for (i, &count) in h.counts.iter().enumerate() {
                let (lo, hi) = h.bin_edges(i);
                out.push(HistogramRow {
                    point: label.to_owned(),
                    quantity: q.to_string(),
                    bin: i,
                    lo,
                    hi,
                    count,
                    expected: h.expected(i),
                    mu: h.mu,
                    sigma: h.sigma,
                    degenerate: h.degenerate,
                });
            }
        }
    }
    out
}

pub fn write_histograms(path: &Path, header: &Header, rows: &[HistogramRow]) -> Result<()> {
    write_atomic(path, &csv_bytes(header, &HISTOGRAM_COLUMNS, rows)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub point: String,
    pub midpoint_h: f64,
    pub epsilon: Option<f64>,
    pub epsilon_lo: Option<f64>,
    pub epsilon_hi: Option<f64>,
    pub epsilon_inc: Option<f64>,
    pub epsilon_inc_lo: Option<f64>,
    pub epsilon_inc_hi: Option<f64>,
    pub epsilon_coh: Option<f64>,
    pub epsilon_coh_lo: Option<f64>,
    pub epsilon_coh_hi: Option<f64>,
    pub fit_status: String,
}

/// Plot series ordered by point then midpoint. Failed windows stay as gaps.
pub fn series_rows(rows: &[EstimatesRow]) -> Vec<SeriesRow> {
    let mut out: Vec<SeriesRow> = rows
        .iter()
        .map(|r| SeriesRow {
            point: r.point.clone(),
            midpoint_h: r.midpoint_h,
            epsilon: r.epsilon,
            epsilon_lo: r.epsilon_lo,
            epsilon_hi: r.epsilon_hi,
            epsilon_inc: r.epsilon_inc,
            epsilon_inc_lo: r.epsilon_inc_lo,
            epsilon_inc_hi: r.epsilon_inc_hi,
            epsilon_coh: r.epsilon_coh,
            epsilon_coh_lo: r.epsilon_coh_lo,
            epsilon_coh_hi: r.epsilon_coh_hi,
            fit_status: r.fit_status.clone(),
        })
        .collect();
    out.sort_by(|a, b| a.point.cmp(&b.point).then(a.midpoint_h.total_cmp(&b.midpoint_h)));
    out
}

pub fn write_series(path: &Path, header: &Header, rows: &[SeriesRow]) -> Result<()> {
    write_atomic(path, &csv_bytes(header, &SERIES_COLUMNS, rows)?)
}
