//! Reading samples and price series from CSV, and turning prices into
//! returns.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::NaiveDate;

use crate::calibration::TestReport;
use crate::error::{Error, Result};
use crate::group::SymmetryGroup;
use crate::points::Points;
use crate::procedures::{symmetry_mmd_test, TestConfig};
use crate::reference::Generator;

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Loads a numeric CSV with a header row; one observation per line.
pub fn load_sample_csv(path: impl AsRef<Path>) -> Result<Points> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let p = rdr.headers()?.len();
    if p == 0 {
        return Err(parse_error(path, 1, "missing header row"));
    }
    let mut data = Vec::new();
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(n + 2, |pos| pos.line() as usize);
        if rec.len() != p {
            return Err(parse_error(
                path,
                line,
                format!("expected {p} fields, found {}", rec.len()),
            ));
        }
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                parse_error(path, line, format!("column {}: {field:?} is not a number", col + 1))
            })?;
            if !v.is_finite() {
                return Err(parse_error(path, line, format!("column {}: value is not finite", col + 1)));
            }
            data.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(parse_error(path, 1, "no data rows"));
    }
    let points = Points::new(data, n, p)?;
    if let Some((i, j)) = points.find_duplicate_rows() {
        log::warn!(
            "{}: data rows {} and {} are identical; rank-based tests will reject tied data unless jittered",
            path.display(),
            i + 1,
            j + 1
        );
    }
    Ok(points)
}

/// Adjusted closing prices of one asset, dates strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub asset: String,
    pub prices: Vec<(NaiveDate, f64)>,
}

impl PriceSeries {
    pub fn new(asset: impl Into<String>, mut prices: Vec<(NaiveDate, f64)>) -> Result<Self> {
        let asset = asset.into();
        prices.sort_by_key(|(d, _)| *d);
        if let Some(w) = prices.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid(format!("{asset}: date {} appears twice", w[0].0)));
        }
        if let Some((d, v)) = prices.iter().find(|(_, v)| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid(format!("{asset}: price {v} on {d} is not positive")));
        }
        Ok(Self { asset, prices })
    }
}

/// Loads `date,adj_close` rows (ISO dates); the asset is named after the
/// file stem.
pub fn load_price_csv(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let find = |names: &[&str]| {
        headers
            .iter()
            .position(|h| names.iter().any(|n| h.eq_ignore_ascii_case(n)))
    };
    let date_col = find(&["date"]).unwrap_or(0);
    let price_col = find(&["adj_close", "adj close", "adjclose", "close", "price"]).unwrap_or(1);
    let mut prices = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(k + 2, |pos| pos.line() as usize);
        let date = rec
            .get(date_col)
            .and_then(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok())
            .ok_or_else(|| parse_error(path, line, "expected an ISO-8601 date (YYYY-MM-DD)"))?;
        let price: f64 = rec
            .get(price_col)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_error(path, line, "expected a numeric price"))?;
        if price.is_nan() || price <= 0.0 {
            return Err(parse_error(path, line, format!("price {price} is not positive")));
        }
        prices.push((date, price));
    }
    let asset = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "asset".into());
    PriceSeries::new(asset, prices)
}

/// Simple returns of several assets on their common dates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    pub assets: Vec<String>,
    /// Date of each return row (the later of the two prices).
    pub dates: Vec<NaiveDate>,
    pub returns: Points,
}

/// `R_t = P_t / P_{t−1} − 1` over the dates every series shares.
pub fn prices_to_returns(series: &[PriceSeries]) -> Result<ReturnsPanel> {
    if series.is_empty() {
        return Err(Error::invalid("no price series given"));
    }
    let mut common: BTreeSet<NaiveDate> = series[0].prices.iter().map(|(d, _)| *d).collect();
    for s in &series[1..] {
        let dates: BTreeSet<NaiveDate> = s.prices.iter().map(|(d, _)| *d).collect();
        common = common.intersection(&dates).copied().collect();
    }
    if common.len() < 2 {
        return Err(Error::invalid(format!(
            "the series share {} date(s); at least 2 are needed",
            common.len()
        )));
    }
    let dates: Vec<NaiveDate> = common.into_iter().collect();
    let aligned: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            let mut it = s.prices.iter().peekable();
            dates
                .iter()
                .map(|d| {
                    while it.peek().is_some_and(|(e, _)| e < d) {
                        it.next();
                    }
                    it.peek().expect("date is common to every series").1
                })
                .collect()
        })
        .collect();
    let t = dates.len() - 1;
    let p = series.len();
    let mut data = Vec::with_capacity(t * p);
    for k in 1..dates.len() {
        for col in &aligned {
            data.push(col[k] / col[k - 1] - 1.0);
        }
    }
    Ok(ReturnsPanel {
        assets: series.iter().map(|s| s.asset.clone()).collect(),
        dates: dates[1..].to_vec(),
        returns: Points::new(data, t, p)?,
    })
}

/// OT-MMD test of exchangeability of the asset returns, with the
/// permutation group and a sorted-Gaussian reference.
pub fn exchangeability_report(panel: &ReturnsPanel, cfg: &TestConfig) -> Result<TestReport> {
    let (n, p) = (panel.returns.n(), panel.returns.p());
    if p < 2 {
        return Err(Error::invalid("exchangeability needs at least two assets"));
    }
    if n < 10 {
        return Err(Error::invalid(format!("exchangeability needs at least 10 return rows, got {n}")));
    }
    let group = SymmetryGroup::parse("permutation", p)?;
    let cfg = TestConfig {
        reference: Some(cfg.reference.clone().unwrap_or(Generator::SortedGaussian)),
        ..cfg.clone()
    };
    let mut report = symmetry_mmd_test(&panel.returns, &group, &cfg)?;
    if let serde_json::Value::Object(m) = &mut report.details {
        m.insert("assets".into(), serde_json::json!(panel.assets));
        m.insert(
            "first_date".into(),
            serde_json::json!(panel.dates.first().map(|d| d.to_string())),
        );
        m.insert(
            "last_date".into(),
            serde_json::json!(panel.dates.last().map(|d| d.to_string())),
        );
    }
    report.test = "returns".into();
    Ok(report)
}
