//! Transaction files to a chronological basket stream, and the stream to
//! fixed-length day windows.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Basket, Window, ANONYMOUS_USER, SECONDS_PER_DAY};

/// Exact header of the canonical interchange file.
pub const CANONICAL_HEADER: [&str; 5] = ["basket_id", "timestamp", "user_id", "product_id", "price"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimestampConvention {
    /// `YYYY-MM-DD`, optionally followed by `THH:MM:SS` or ` HH:MM:SS`.
    Iso8601,
    /// Integer (or fractional) day number; day `n` starts at `n * 86400`.
    DayNumber,
    EpochSeconds,
}

/// Physical column names for each logical field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub basket_id: String,
    pub timestamp: String,
    pub user_id: String,
    pub product_id: String,
    /// Absent price column means every item is priced at 1.0.
    pub price: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionRecordFormat {
    pub columns: ColumnMap,
    pub timestamp: TimestampConvention,
    pub delimiter: u8,
}

impl TransactionRecordFormat {
    /// The interchange layout written by [`write_canonical`].
    pub fn canonical() -> Self {
        TransactionRecordFormat {
            columns: ColumnMap {
                basket_id: "basket_id".into(),
                timestamp: "timestamp".into(),
                user_id: "user_id".into(),
                product_id: "product_id".into(),
                price: Some("price".into()),
            },
            timestamp: TimestampConvention::EpochSeconds,
            delimiter: b',',
        }
    }

    /// Complete Journey `transaction_data.csv`. `SALES_VALUE` is read as the
    /// item price.
    pub fn complete_journey() -> Self {
        TransactionRecordFormat {
            columns: ColumnMap {
                basket_id: "BASKET_ID".into(),
                timestamp: "DAY".into(),
                user_id: "household_key".into(),
                product_id: "PRODUCT_ID".into(),
                price: Some("SALES_VALUE".into()),
            },
            timestamp: TimestampConvention::DayNumber,
            delimiter: b',',
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "canonical" => Some(Self::canonical()),
            "cj" | "complete-journey" => Some(Self::complete_journey()),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let c = &self.columns;
        let mut names = vec![&c.basket_id, &c.timestamp, &c.user_id, &c.product_id];
        if let Some(p) = &c.price {
            names.push(p);
        }
        let distinct: HashSet<_> = names.iter().collect();
        if distinct.len() != names.len() {
            return Err(Error::Format(
                "logical columns must map to distinct physical columns".into(),
            ));
        }
        Ok(())
    }
}

/// A skipped input row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedTransactions {
    pub baskets: Vec<Basket>,
    pub skipped: Vec<RowError>,
}

struct Resolved {
    basket: usize,
    timestamp: usize,
    user: usize,
    product: usize,
    price: Option<usize>,
}

fn resolve(headers: &csv::StringRecord, format: &TransactionRecordFormat) -> Result<Resolved> {
    let find = |field: &'static str, name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                field,
                column: name.to_string(),
            })
    };
    let c = &format.columns;
    Ok(Resolved {
        basket: find("basket_id", &c.basket_id)?,
        timestamp: find("timestamp", &c.timestamp)?,
        user: find("user_id", &c.user_id)?,
        product: find("product_id", &c.product_id)?,
        price: c.price.as_deref().map(|p| find("price", p)).transpose()?,
    })
}

pub fn parse_timestamp(raw: &str, convention: TimestampConvention) -> Option<f64> {
    let raw = raw.trim();
    let t = match convention {
        TimestampConvention::EpochSeconds => raw.parse::<f64>().ok()?,
        TimestampConvention::DayNumber => raw.parse::<f64>().ok()? * SECONDS_PER_DAY,
        TimestampConvention::Iso8601 => {
            let dt = NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S")
                .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S"))
                .or_else(|_| {
                    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight is valid"))
                })
                .ok()?;
            dt.and_utc().timestamp() as f64
        }
    };
    t.is_finite().then_some(t)
}

/// Groups delimiter-separated rows into baskets.
///
/// Rows of one basket need not be contiguous. Repeated `(basket, product)`
/// rows keep the first price. Rows that fail to parse are skipped and
/// reported with their line number; a missing column is fatal. Output is
/// sorted by timestamp, ties by basket id.
pub fn parse_transactions<R: Read>(
    source: R,
    format: &TransactionRecordFormat,
) -> Result<ParsedTransactions> {
    format.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let cols = resolve(&headers, format)?;

    let mut out = ParsedTransactions::default();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                out.skipped.push(RowError {
                    line,
                    message: e.to_string(),
                });
                if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                    return Err(e.into());
                }
                continue;
            }
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&record, &cols, format) {
            Ok((basket_id, ts, user, product, price)) => {
                let slot = *by_id.entry(basket_id.clone()).or_insert_with(|| {
                    out.baskets.push(Basket::new(basket_id, ts, user));
                    out.baskets.len() - 1
                });
                out.baskets[slot].push_item(product, price);
            }
            Err(message) => out.skipped.push(RowError { line, message }),
        }
    }
    sort_baskets(&mut out.baskets);
    Ok(out)
}

type Row = (String, f64, String, String, Option<f64>);

fn parse_row(
    record: &csv::StringRecord,
    cols: &Resolved,
    format: &TransactionRecordFormat,
) -> std::result::Result<Row, String> {
    let field = |i: usize, name: &str| {
        record
            .get(i)
            .map(str::trim)
            .ok_or_else(|| format!("missing field `{name}`"))
    };
    let basket = field(cols.basket, "basket_id")?;
    if basket.is_empty() {
        return Err("empty basket_id".into());
    }
    let ts_raw = field(cols.timestamp, "timestamp")?;
    let ts = parse_timestamp(ts_raw, format.timestamp)
        .ok_or_else(|| format!("bad timestamp `{ts_raw}`"))?;
    let user = field(cols.user, "user_id")?;
    let user = if user.is_empty() { ANONYMOUS_USER } else { user };
    let product = field(cols.product, "product_id")?;
    if product.is_empty() {
        return Err("empty product_id".into());
    }
    let price = match cols.price {
        None => Some(1.0),
        Some(i) => {
            let raw = field(i, "price")?;
            if raw.is_empty() {
                None
            } else {
                let p: f64 = raw.parse().map_err(|_| format!("bad price `{raw}`"))?;
                if !p.is_finite() || p < 0.0 {
                    return Err(format!("price must be a nonnegative number, got `{raw}`"));
                }
                Some(p)
            }
        }
    };
    Ok((basket.to_string(), ts, user.to_string(), product.to_string(), price))
}

/// Timestamp ascending, ties by basket id.
pub fn sort_baskets(baskets: &mut [Basket]) {
    baskets.sort_by(|a, b| {
        a.timestamp
            .total_cmp(&b.timestamp)
            .then_with(|| a.id.cmp(&b.id))
    });
}

/// Merges independently parsed sources into one chronological stream.
pub fn merge_streams(streams: impl IntoIterator<Item = Vec<Basket>>) -> Vec<Basket> {
    let mut all: Vec<Basket> = streams.into_iter().flatten().collect();
    sort_baskets(&mut all);
    all
}

/// Partitions a sorted stream into windows of `window_days` days starting at
/// the midnight of the first basket. Empty windows are emitted so indices are
/// contiguous.
pub fn window_stream(baskets: &[Basket], window_days: u32) -> Result<Vec<Window>> {
    if window_days == 0 {
        return Err(Error::InvalidArgument("window_days must be positive".into()));
    }
    if let Some(pair) = baskets
        .windows(2)
        .find(|w| w[1].timestamp < w[0].timestamp)
    {
        return Err(Error::Unsorted {
            earlier: pair[1].id.clone(),
            earlier_ts: pair[1].timestamp,
            later: pair[0].id.clone(),
            later_ts: pair[0].timestamp,
        });
    }
    let Some(first) = baskets.first() else {
        return Ok(Vec::new());
    };
    let origin = (first.timestamp / SECONDS_PER_DAY).floor() * SECONDS_PER_DAY;
    let span = SECONDS_PER_DAY * window_days as f64;
    let mut windows: Vec<Window> = Vec::new();
    for b in baskets {
        let idx = ((b.timestamp - origin) / span).floor() as usize;
        while windows.len() <= idx {
            let i = windows.len();
            windows.push(Window {
                index: i,
                start: origin + i as f64 * span,
                end: origin + (i + 1) as f64 * span,
                baskets: Vec::new(),
            });
        }
        windows[idx].baskets.push(b.clone());
    }
    Ok(windows)
}

/// Writes the canonical interchange CSV. Items without a price are written at
/// 1.0, matching how a price-less source is read.
pub fn write_canonical<W: Write>(baskets: &[Basket], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(CANONICAL_HEADER)?;
    for b in baskets {
        let ts = b.timestamp.to_string();
        for item in &b.items {
            let price = item.price.unwrap_or(1.0).to_string();
            w.write_record([b.id.as_str(), &ts, &b.user, &item.product, &price])?;
        }
    }
    w.flush().map_err(|e| Error::io("<canonical output>", e))?;
    Ok(())
}

/// Dataset-level counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetSummary {
    pub users: usize,
    pub products: usize,
    pub baskets: usize,
    pub transactions: usize,
    pub days: usize,
}

pub fn summarize(baskets: &[Basket]) -> DatasetSummary {
    let users: HashSet<&str> = baskets.iter().map(|b| b.user.as_str()).collect();
    let products: HashSet<&str> = baskets.iter().flat_map(|b| b.products()).collect();
    let days = match (baskets.first(), baskets.last()) {
        (Some(f), Some(l)) => {
            ((l.timestamp / SECONDS_PER_DAY).floor() - (f.timestamp / SECONDS_PER_DAY).floor())
                as usize
                + 1
        }
        _ => 0,
    };
    DatasetSummary {
        users: users.len(),
        products: products.len(),
        baskets: baskets.len(),
        transactions: baskets.iter().map(|b| b.items.len()).sum(),
        days,
    }
}
