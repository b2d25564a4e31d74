//! Price series ingestion, splitting, scaling and sliding-window datasets.

use std::fs::File;
use std::path::Path;

use thiserror::Error;

use crate::month::Month;
use crate::Float;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("column {column:?} not found; available: {available:?}")]
    MissingColumn { column: String, available: Vec<String> },
    #[error("row {row}: unparseable date {value:?}")]
    BadDate { row: usize, value: String },
    #[error("row {row}: non-numeric value {value:?} in column {column:?}")]
    BadValue { row: usize, column: String, value: String },
    #[error("row {row}: non-finite value in column {column:?}")]
    NonFinite { row: usize, column: String },
    #[error("row {row}: missing month {expected} (found {found})")]
    MonthGap { row: usize, expected: Month, found: Month },
    #[error("row {row}: duplicate or unordered date {found}")]
    Unordered { row: usize, found: Month },
    #[error("series needs at least 2 points, got {0}")]
    TooShort(usize),
    #[error("train ratio must be in (0, 1), got {0}")]
    BadRatio(f64),
    #[error("split leaves an empty part (n={n}, ratio={ratio})")]
    EmptySplit { n: usize, ratio: f64 },
    #[error("constant training sample: min-max scaler undefined")]
    ConstantSeries,
    #[error("window stride must be 1, got {0}")]
    BadStride(usize),
    #[error("lookback must be at least 1")]
    ZeroLookback,
    #[error("need more than {lookback} points to window, got {len}")]
    WindowTooLong { len: usize, lookback: usize },
}

/// A dated univariate monthly price sequence.
///
/// Invariants enforced at construction: dates strictly increasing with no
/// calendar gaps, all values finite, length at least 2.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries<S> {
    name: String,
    dates: Vec<Month>,
    values: Vec<S>,
}

impl<S: Float> PriceSeries<S> {
    pub fn new(
        name: impl Into<String>,
        dates: Vec<Month>,
        values: Vec<S>,
    ) -> Result<Self, DataError> {
        let name = name.into();
        if dates.len() < 2 {
            return Err(DataError::TooShort(dates.len()));
        }
        assert_eq!(dates.len(), values.len(), "dates/values length mismatch");
        for (i, pair) in dates.windows(2).enumerate() {
            let expected = pair[0].succ();
            if pair[1] < expected {
                return Err(DataError::Unordered { row: i + 2, found: pair[1] });
            }
            if pair[1] != expected {
                return Err(DataError::MonthGap { row: i + 2, expected, found: pair[1] });
            }
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::NonFinite { row: i + 1, column: name.clone() });
            }
        }
        Ok(Self { name, dates, values })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dates(&self) -> &[Month] {
        &self.dates
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first_date(&self) -> Month {
        self.dates[0]
    }

    pub fn last_date(&self) -> Month {
        *self.dates.last().expect("non-empty by invariant")
    }
}

/// Load one named column of a monthly price CSV.
///
/// Expected layout: header row, first column `date` as `YYYY-MM`, remaining
/// columns named numeric series. Rows are sorted by date before validation so
/// a shuffled file still loads; a true gap or duplicate is an error naming the
/// offending row.
pub fn load_series<S: Float>(path: impl AsRef<Path>, column: &str) -> Result<PriceSeries<S>, DataError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| DataError::Io { path: display.clone(), source })?;
    let mut reader = csv::Reader::from_reader(file);

    let headers = reader
        .headers()
        .map_err(|source| DataError::Csv { path: display.clone(), source })?
        .clone();
    let col_idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| DataError::MissingColumn {
            column: column.to_string(),
            available: headers.iter().skip(1).map(str::to_string).collect(),
        })?;
    if col_idx == 0 {
        // Column 0 is the date axis, not a series.
        return Err(DataError::MissingColumn {
            column: column.to_string(),
            available: headers.iter().skip(1).map(str::to_string).collect(),
        });
    }

    let mut rows: Vec<(Month, S, usize)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // 1-based, after header
        let record = record.map_err(|source| DataError::Csv { path: display.clone(), source })?;
        let date_raw = record.get(0).unwrap_or_default();
        let date: Month = date_raw
            .parse()
            .map_err(|_| DataError::BadDate { row, value: date_raw.to_string() })?;
        let raw = record.get(col_idx).unwrap_or_default();
        let value: f64 = raw.trim().parse().map_err(|_| DataError::BadValue {
            row,
            column: column.to_string(),
            value: raw.to_string(),
        })?;
        if !value.is_finite() {
            return Err(DataError::NonFinite { row, column: column.to_string() });
        }
        rows.push((date, S::cast(value), row));
    }
    rows.sort_by_key(|(date, _, _)| *date);

    if rows.len() < 2 {
        return Err(DataError::TooShort(rows.len()));
    }
    for pair in rows.windows(2) {
        let (prev, _, _) = pair[0];
        let (next, _, row) = pair[1];
        let expected = prev.succ();
        if next == prev {
            return Err(DataError::Unordered { row, found: next });
        }
        if next != expected {
            return Err(DataError::MonthGap { row, expected, found: next });
        }
    }
    let dates = rows.iter().map(|(d, _, _)| *d).collect();
    let values = rows.iter().map(|(_, v, _)| *v).collect();
    PriceSeries::new(column, dates, values)
}

/// Chronological split: the first `floor(ratio · m)` points train, the rest test.
pub fn train_test_split<S: Float>(
    series: &PriceSeries<S>,
    train_ratio: f64,
) -> Result<(PriceSeries<S>, PriceSeries<S>), DataError> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(DataError::BadRatio(train_ratio));
    }
    let n = series.len();
    let cut = (train_ratio * n as f64).floor() as usize;
    if cut == 0 || cut == n {
        return Err(DataError::EmptySplit { n, ratio: train_ratio });
    }
    // Each half must itself be a valid series (length >= 2).
    if cut < 2 || n - cut < 2 {
        return Err(DataError::EmptySplit { n, ratio: train_ratio });
    }
    let train = PriceSeries::new(
        series.name(),
        series.dates[..cut].to_vec(),
        series.values[..cut].to_vec(),
    )?;
    let test = PriceSeries::new(
        series.name(),
        series.dates[cut..].to_vec(),
        series.values[cut..].to_vec(),
    )?;
    Ok((train, test))
}

/// Affine map of the fit sample onto `[0, 1]`.
///
/// Fit on the training split only; values outside the fit range (test months
/// beyond the training extremes) legitimately map outside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMaxScaler<S> {
    lo: S,
    hi: S,
}

impl<S: Float> MinMaxScaler<S> {
    pub fn fit(values: &[S]) -> Result<Self, DataError> {
        if values.len() < 2 {
            return Err(DataError::TooShort(values.len()));
        }
        let mut lo = S::infinity();
        let mut hi = S::neg_infinity();
        for v in values {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        if hi <= lo {
            return Err(DataError::ConstantSeries);
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> S {
        self.lo
    }

    pub fn hi(&self) -> S {
        self.hi
    }

    pub fn transform_one(&self, x: S) -> S {
        (x - self.lo) / (self.hi - self.lo)
    }

    pub fn invert_one(&self, z: S) -> S {
        z * (self.hi - self.lo) + self.lo
    }

    pub fn transform(&self, values: &[S]) -> Vec<S> {
        values.iter().map(|x| self.transform_one(*x)).collect()
    }

    pub fn invert(&self, scaled: &[S]) -> Vec<S> {
        scaled.iter().map(|z| self.invert_one(*z)).collect()
    }
}

/// Supervised (features, label) pairs cut from a scaled series by a sliding
/// window of width `lookback`, moving one month at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset<S> {
    features: Vec<S>,
    labels: Vec<S>,
    lookback: usize,
    stride: usize,
}

impl<S: Float> WindowedDataset<S> {
    /// Assemble a dataset from an already-flattened feature matrix
    /// (`labels.len() × lookback`, row-major) and its labels. The sliding
    /// window path is [`make_windows`]; this door exists for supervised pairs
    /// that come from somewhere else (simulations, fixtures).
    pub fn from_parts(
        features: Vec<S>,
        labels: Vec<S>,
        lookback: usize,
    ) -> Result<Self, DataError> {
        if lookback == 0 {
            return Err(DataError::ZeroLookback);
        }
        if features.len() != labels.len() * lookback {
            return Err(DataError::WindowTooLong { len: features.len(), lookback });
        }
        Ok(Self { features, labels, lookback, stride: 1 })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn lookback(&self) -> usize {
        self.lookback
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// `(examples, stride, lookback)` — the 3-D layout the windows fill.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.len(), self.stride, self.lookback)
    }

    pub fn feature_row(&self, i: usize) -> &[S] {
        &self.features[i * self.lookback..(i + 1) * self.lookback]
    }

    pub fn label(&self, i: usize) -> S {
        self.labels[i]
    }

    pub fn labels(&self) -> &[S] {
        &self.labels
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[S], S)> + '_ {
        (0..self.len()).map(move |i| (self.feature_row(i), self.labels[i]))
    }
}

/// Cut `scaled` into windows: example `i` is `(scaled[i..i+lookback], scaled[i+lookback])`.
///
/// Only stride 1 is accepted; it is the one movement rule under which the
/// example count is exactly `m - lookback`.
pub fn make_windows<S: Float>(
    scaled: &[S],
    lookback: usize,
    stride: usize,
) -> Result<WindowedDataset<S>, DataError> {
    if lookback == 0 {
        return Err(DataError::ZeroLookback);
    }
    if stride != 1 {
        return Err(DataError::BadStride(stride));
    }
    let m = scaled.len();
    if m <= lookback {
        return Err(DataError::WindowTooLong { len: m, lookback });
    }
    let examples = m - lookback;
    let mut features = Vec::with_capacity(examples * lookback);
    let mut labels = Vec::with_capacity(examples);
    for i in 0..examples {
        features.extend_from_slice(&scaled[i..i + lookback]);
        labels.push(scaled[i + lookback]);
    }
    Ok(WindowedDataset { features, labels, lookback, stride })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn months(start: &str, n: usize) -> Vec<Month> {
        let mut out = Vec::with_capacity(n);
        let mut m: Month = start.parse().unwrap();
        for _ in 0..n {
            out.push(m);
            m = m.succ();
        }
        out
    }

    fn write_csv(rows: &[(&str, f64)]) -> tempdir::TempCsv {
        tempdir::TempCsv::new(rows)
    }

    mod tempdir {
        use std::io::Write;
        use std::path::PathBuf;

        pub struct TempCsv {
            pub path: PathBuf,
        }

        impl TempCsv {
            pub fn new(rows: &[(&str, f64)]) -> Self {
                let mut path = std::env::temp_dir();
                let unique = format!(
                    "pricecast-data-test-{}-{}.csv",
                    std::process::id(),
                    rows.as_ptr() as usize
                );
                path.push(unique);
                let mut f = std::fs::File::create(&path).unwrap();
                writeln!(f, "date,price").unwrap();
                for (d, v) in rows {
                    writeln!(f, "{d},{v}").unwrap();
                }
                Self { path }
            }
        }

        impl Drop for TempCsv {
            fn drop(&mut self) {
                let _ = std::fs::remove_file(&self.path);
            }
        }
    }

    #[test]
    fn loads_small_file() {
        let csv = write_csv(&[("2020-01", 1.0), ("2020-02", 2.0), ("2020-03", 3.0)]);
        let series: PriceSeries<f64> = load_series(&csv.path, "price").unwrap();
        assert_eq!(series.len(), 3);
        assert_eq!(series.first_date().to_string(), "2020-01");
        assert_eq!(series.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn gap_is_an_error_naming_the_missing_month() {
        let csv = write_csv(&[("2020-01", 1.0), ("2020-03", 3.0)]);
        let err = load_series::<f64>(&csv.path, "price").unwrap_err();
        match err {
            DataError::MonthGap { expected, .. } => {
                assert_eq!(expected.to_string(), "2020-02");
            }
            other => panic!("expected MonthGap, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_lists_available_ones() {
        let csv = write_csv(&[("2020-01", 1.0), ("2020-02", 2.0)]);
        let err = load_series::<f64>(&csv.path, "oil").unwrap_err();
        match err {
            DataError::MissingColumn { available, .. } => assert_eq!(available, vec!["price"]),
            other => panic!("expected MissingColumn, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_value_reports_row() {
        let mut path = std::env::temp_dir();
        path.push(format!("pricecast-badval-{}.csv", std::process::id()));
        std::fs::write(&path, "date,price\n2020-01,1.0\n2020-02,oops\n").unwrap();
        let err = load_series::<f64>(&path, "price").unwrap_err();
        std::fs::remove_file(&path).unwrap();
        match err {
            DataError::BadValue { row, .. } => assert_eq!(row, 3),
            other => panic!("expected BadValue, got {other:?}"),
        }
    }

    #[test]
    fn split_uses_floor_rule() {
        let n = 708;
        let series =
            PriceSeries::new("x", months("1960-01", n), vec![1.0f64; n].iter().enumerate().map(|(i, _)| i as f64).collect())
                .unwrap();
        let (train, test) = train_test_split(&series, 0.7).unwrap();
        assert_eq!((train.len(), test.len()), (495, 213));
        assert_eq!(test.first_date(), train.last_date().succ());

        let ten = PriceSeries::new("x", months("2000-01", 10), (0..10).map(|i| i as f64).collect()).unwrap();
        let (a, b) = train_test_split(&ten, 0.5).unwrap();
        assert_eq!((a.len(), b.len()), (5, 5));
    }

    #[test]
    fn split_rejects_degenerate_ratios() {
        let ten = PriceSeries::new("x", months("2000-01", 10), (0..10).map(|i| i as f64).collect()).unwrap();
        assert!(matches!(train_test_split(&ten, 0.0), Err(DataError::BadRatio(_))));
        assert!(matches!(train_test_split(&ten, 1.0), Err(DataError::BadRatio(_))));
        // 0.99 of 10 -> floor 9, test part of one point cannot form a series.
        assert!(matches!(train_test_split(&ten, 0.99), Err(DataError::EmptySplit { .. })));
    }

    #[test]
    fn scaler_maps_fit_sample_to_unit_interval() {
        let scaler = MinMaxScaler::fit(&[2.0f64, 4.0, 6.0]).unwrap();
        assert_eq!(scaler.transform(&[2.0, 4.0, 6.0]), vec![0.0, 0.5, 1.0]);
        // Out-of-range values are allowed to leave [0, 1].
        assert_eq!(scaler.transform(&[8.0]), vec![1.5]);
        let x = 3.7;
        assert!((scaler.invert_one(scaler.transform_one(x)) - x).abs() < 1e-12);
    }

    #[test]
    fn scaler_rejects_constant_sample() {
        assert!(matches!(MinMaxScaler::fit(&[5.0f64, 5.0, 5.0]), Err(DataError::ConstantSeries)));
    }

    #[test]
    fn scaler_round_trip_on_random_values() {
        let scaler = MinMaxScaler::fit(&[-3.0f64, 11.0]).unwrap();
        let mut r = rng::stream(3, rng::Stream::Simulation, 0);
        for _ in 0..1000 {
            let x: f64 = rng::uniform::<f64>(&mut r) * 200.0 - 100.0;
            let back = scaler.invert_one(scaler.transform_one(x));
            let rel = (back - x).abs() / x.abs().max(1.0);
            assert!(rel < 1e-12, "x={x} back={back}");
        }
    }

    #[test]
    fn windows_match_definition() {
        let ds = make_windows(&[1.0f64, 2.0, 3.0, 4.0, 5.0], 2, 1).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.shape(), (3, 1, 2));
        assert_eq!(ds.feature_row(0), &[1.0, 2.0]);
        assert_eq!(ds.feature_row(1), &[2.0, 3.0]);
        assert_eq!(ds.feature_row(2), &[3.0, 4.0]);
        assert_eq!(ds.labels(), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn window_count_is_m_minus_lookback() {
        let xs: Vec<f64> = (0..495).map(|i| i as f64).collect();
        let ds = make_windows(&xs, 2, 1).unwrap();
        assert_eq!(ds.len(), 493);
    }

    #[test]
    fn windowing_rejects_short_series_and_bad_stride() {
        assert!(matches!(
            make_windows(&[1.0f64, 2.0], 2, 1),
            Err(DataError::WindowTooLong { .. })
        ));
        assert!(matches!(make_windows(&[1.0f64, 2.0, 3.0], 2, 2), Err(DataError::BadStride(2))));
        assert!(matches!(make_windows(&[1.0f64, 2.0, 3.0], 0, 1), Err(DataError::ZeroLookback)));
    }

    #[test]
    fn label_equals_next_rows_last_feature() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let ds = make_windows(&xs, 4, 1).unwrap();
        for i in 0..ds.len() - 1 {
            assert_eq!(ds.label(i), *ds.feature_row(i + 1).last().unwrap());
        }
    }

    #[test]
    fn split_then_window_never_leaks_test_labels_into_train_features() {
        let n = 60;
        let series = PriceSeries::new("x", months("2000-01", n), (0..n).map(|i| i as f64).collect()).unwrap();
        let (train, test) = train_test_split(&series, 0.7).unwrap();
        let train_ds = make_windows(train.values(), 5, 1).unwrap();
        let max_train_feature = train_ds
            .rows()
            .flat_map(|(row, _)| row.iter().copied().collect::<Vec<_>>())
            .fold(f64::NEG_INFINITY, f64::max);
        // Values are the index itself, so any test label is strictly larger
        // than everything seen in training windows.
        for v in test.values() {
            assert!(*v > max_train_feature);
        }
    }
}
