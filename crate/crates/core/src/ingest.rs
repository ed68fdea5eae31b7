//! Loading, spatial reduction, standardization and chronological splitting
//! of daily multivariate series.
//!
//! The canonical desk-scale input is a flat CSV with header
//! `date,sit,ssh,u,v,vtot` (ISO-8601 dates, one row per day, no gaps).
//! Gridded inputs arrive as one flat file per variable with header
//! `date,lat,lon,value` and are reduced to a regional daily mean with
//! [`spatial_average`].
//!
//! Standardization uses the population (divide-by-N) standard deviation.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{KgcmError, Result};

/// Default column schema of the desk-scale CSV (after the `date` column).
pub const DEFAULT_SCHEMA: [&str; 5] = ["sit", "ssh", "u", "v", "vtot"];

/// Dated, gap-free daily series with named feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    dates: Vec<NaiveDate>,
    feature_names: Vec<String>,
    features: Array2<f64>,
}

impl TimeSeriesFrame {
    /// Builds a frame, checking every invariant (daily step, shape, finite
    /// values, non-negative `vtot` when present).
    pub fn new(
        dates: Vec<NaiveDate>,
        feature_names: Vec<String>,
        features: Array2<f64>,
    ) -> Result<Self> {
        if features.nrows() != dates.len() {
            return Err(KgcmError::Shape(format!(
                "{} dates but {} feature rows",
                dates.len(),
                features.nrows()
            )));
        }
        if features.ncols() != feature_names.len() {
            return Err(KgcmError::Shape(format!(
                "{} feature names but {} columns",
                feature_names.len(),
                features.ncols()
            )));
        }
        for (k, w) in dates.windows(2).enumerate() {
            let step = (w[1] - w[0]).num_days();
            if step == 0 {
                return Err(KgcmError::Data(format!("duplicate date at row {}", k + 1)));
            }
            if step != 1 {
                return Err(KgcmError::Data(format!("date gap at row {}", k + 1)));
            }
        }
        if let Some(((r, c), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(KgcmError::Data(format!(
                "non-finite value at row {r}, column {}",
                feature_names[c]
            )));
        }
        let frame = Self {
            dates,
            feature_names,
            features,
        };
        if let Some(j) = frame.column_index("vtot") {
            if let Some(r) = frame.features.column(j).iter().position(|&v| v < 0.0) {
                return Err(KgcmError::Data(format!("negative vtot at row {r}")));
            }
        }
        Ok(frame)
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .column_index(name)
            .ok_or_else(|| KgcmError::Data(format!("unknown feature '{name}'")))?;
        Ok(self.features.column(j).to_vec())
    }

    /// Contiguous row range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> TimeSeriesFrame {
        TimeSeriesFrame {
            dates: self.dates[start..end].to_vec(),
            feature_names: self.feature_names.clone(),
            features: self.features.slice(ndarray::s![start..end, ..]).to_owned(),
        }
    }

    /// Concatenates frames that follow each other day by day.
    pub fn concat(parts: &[&TimeSeriesFrame]) -> Result<TimeSeriesFrame> {
        let first = parts
            .first()
            .ok_or_else(|| KgcmError::InvalidArgument("nothing to concatenate".into()))?;
        let dates = parts.iter().flat_map(|p| p.dates.iter().copied()).collect();
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let features = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| KgcmError::Shape(e.to_string()))?;
        TimeSeriesFrame::new(dates, first.feature_names.clone(), features)
    }

    /// Writes the frame as CSV with a leading `date` column.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)
            .map_err(|e| KgcmError::Data(format!("{}: {e}", path.display())))?;
        let mut header = vec!["date".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header).map_err(csv_err(path))?;
        for (d, row) in self.dates.iter().zip(self.features.rows()) {
            let mut rec = vec![d.format("%Y-%m-%d").to_string()];
            rec.extend(row.iter().map(|v| format!("{v}")));
            w.write_record(&rec).map_err(csv_err(path))?;
        }
        w.flush().map_err(|e| KgcmError::io(path, e))
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> KgcmError + '_ {
    move |e| KgcmError::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

/// Reads a daily CSV whose header is `date` followed by exactly `schema`.
///
/// Errors carry the 1-based data row (header excluded) and column name.
pub fn load_series(path: &Path, schema: &[&str]) -> Result<TimeSeriesFrame> {
    let perr = |msg: String| KgcmError::Parse {
        path: path.to_path_buf(),
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| perr(e.to_string()))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| perr(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.first().map(String::as_str) != Some("date") {
        return Err(perr("missing column 'date' in first position".into()));
    }
    for name in schema {
        if !header.iter().any(|h| h == name) {
            return Err(perr(format!("missing column '{name}'")));
        }
    }
    let col_of: Vec<usize> = schema
        .iter()
        .map(|name| header.iter().position(|h| h == name).unwrap())
        .collect();

    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| perr(format!("row {row}: {e}")))?;
        let date = parse_date(rec.get(0).unwrap_or(""))
            .ok_or_else(|| perr(format!("unparseable date at row {row}")))?;
        if let Some(prev) = dates.last() {
            let step = date.signed_duration_since(*prev).num_days();
            if step == 0 {
                return Err(perr(format!("duplicate date at row {row}")));
            }
            if step != 1 {
                return Err(perr(format!("date gap at row {row}")));
            }
        }
        dates.push(date);
        for (&c, name) in col_of.iter().zip(schema) {
            let cell = rec.get(c).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| {
                perr(format!("non-numeric cell '{cell}' at row {row}, column {name}"))
            })?;
            if !v.is_finite() {
                return Err(perr(format!("missing value at row {row}, column {name}")));
            }
            values.push(v);
        }
    }
    let features = Array2::from_shape_vec((dates.len(), schema.len()), values)
        .map_err(|e| KgcmError::Shape(e.to_string()))?;
    TimeSeriesFrame::new(
        dates,
        schema.iter().map(|s| s.to_string()).collect(),
        features,
    )
    .map_err(|e| perr(e.to_string()))
}

/// One variable on a regular (time, lat, lon) grid; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedField {
    pub dates: Vec<NaiveDate>,
    pub lats: Vec<f64>,
    pub lons: Vec<f64>,
    /// Row-major `[time][lat][lon]`.
    pub values: Vec<Option<f64>>,
}

impl GriddedField {
    pub fn get(&self, t: usize, i: usize, j: usize) -> Option<f64> {
        self.values[(t * self.lats.len() + i) * self.lons.len() + j]
    }

    /// Parses a flat `date,lat,lon,value` file. Empty or non-finite values and
    /// grid points absent from the file are missing cells.
    pub fn load(path: &Path) -> Result<Self> {
        let perr = |msg: String| KgcmError::Parse {
            path: path.to_path_buf(),
            msg,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| perr(e.to_string()))?;
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| perr(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let idx = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| perr(format!("missing column '{name}'")))
        };
        let (cd, cla, clo, cv) = (idx("date")?, idx("lat")?, idx("lon")?, idx("value")?);

        let mut cells: Vec<(NaiveDate, f64, f64, Option<f64>)> = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let row = k + 1;
            let rec = rec.map_err(|e| perr(format!("row {row}: {e}")))?;
            let date = parse_date(&rec[cd])
                .ok_or_else(|| perr(format!("unparseable date at row {row}")))?;
            let num = |c: usize, name: &str| -> Result<f64> {
                rec[c].parse::<f64>().map_err(|_| {
                    perr(format!("non-numeric cell '{}' at row {row}, column {name}", &rec[c]))
                })
            };
            let lat = num(cla, "lat")?;
            let lon = num(clo, "lon")?;
            let value = match rec[cv].trim() {
                "" => None,
                s => {
                    let v: f64 = s.parse().map_err(|_| {
                        perr(format!("non-numeric cell '{s}' at row {row}, column value"))
                    })?;
                    v.is_finite().then_some(v)
                }
            };
            cells.push((date, lat, lon, value));
        }

        let mut dates: Vec<NaiveDate> = cells.iter().map(|c| c.0).collect();
        dates.sort();
        dates.dedup();
        let axis = |get: fn(&(NaiveDate, f64, f64, Option<f64>)) -> f64| {
            let mut v: Vec<f64> = cells.iter().map(get).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let lats = axis(|c| c.1);
        let lons = axis(|c| c.2);
        for (k, w) in dates.windows(2).enumerate() {
            if (w[1] - w[0]).num_days() != 1 {
                return Err(perr(format!("date gap after distinct date {}", k + 1)));
            }
        }
        let date_pos: BTreeMap<NaiveDate, usize> =
            dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        let find = |axis: &[f64], x: f64| axis.binary_search_by(|a| a.total_cmp(&x)).unwrap();
        let mut values = vec![None; dates.len() * lats.len() * lons.len()];
        for (d, la, lo, v) in cells {
            let t = date_pos[&d];
            let pos = (t * lats.len() + find(&lats, la)) * lons.len() + find(&lons, lo);
            values[pos] = v;
        }
        Ok(Self {
            dates,
            lats,
            lons,
            values,
        })
    }
}

/// Indices of latitudes inside `[lat_min, lat_max]` (inclusive).
pub fn latitude_subset(lats: &[f64], lat_min: f64, lat_max: f64) -> Vec<usize> {
    lats.iter()
        .enumerate()
        .filter(|(_, &l)| l >= lat_min && l <= lat_max)
        .map(|(i, _)| i)
        .collect()
}

/// Cell weighting for [`spatial_average`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AreaWeighting {
    /// Plain arithmetic mean over retained cells.
    #[default]
    Unweighted,
    /// Each cell weighted by cos(latitude).
    CosLatitude,
}

fn average_field(
    field: &GriddedField,
    rows: &[usize],
    weighting: AreaWeighting,
    name: &str,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(field.dates.len());
    for t in 0..field.dates.len() {
        let mut sum = 0.0;
        let mut wsum = 0.0;
        for &i in rows {
            let w = match weighting {
                AreaWeighting::Unweighted => 1.0,
                AreaWeighting::CosLatitude => field.lats[i].to_radians().cos(),
            };
            for j in 0..field.lons.len() {
                if let Some(v) = field.get(t, i, j) {
                    sum += w * v;
                    wsum += w;
                }
            }
        }
        if wsum == 0.0 {
            return Err(KgcmError::Data(format!(
                "{name}: every cell missing on {}",
                field.dates[t]
            )));
        }
        out.push(sum / wsum);
    }
    Ok(out)
}

/// Reduces each named gridded variable to its daily regional mean over the
/// latitude band `[lat_min, lat_max]`. Missing cells are excluded.
///
/// All fields must share the same dates.
pub fn spatial_average(
    fields: &[(String, GriddedField)],
    lat_min: f64,
    lat_max: f64,
    weighting: AreaWeighting,
) -> Result<TimeSeriesFrame> {
    let (_, first) = fields
        .first()
        .ok_or_else(|| KgcmError::InvalidArgument("no gridded fields".into()))?;
    let dates = first.dates.clone();
    let mut columns = Vec::with_capacity(fields.len());
    for (name, field) in fields {
        if field.dates != dates {
            return Err(KgcmError::Data(format!("{name}: dates differ from {}", fields[0].0)));
        }
        let rows = latitude_subset(&field.lats, lat_min, lat_max);
        if rows.is_empty() {
            return Err(KgcmError::Data(format!(
                "{name}: no latitudes within [{lat_min}, {lat_max}]"
            )));
        }
        columns.push(average_field(field, &rows, weighting, name)?);
    }
    let t = dates.len();
    let features = Array2::from_shape_fn((t, columns.len()), |(r, c)| columns[c][r]);
    TimeSeriesFrame::new(dates, fields.iter().map(|(n, _)| n.clone()).collect(), features)
}

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl StandardizationStats {
    pub fn fit(frame: &TimeSeriesFrame) -> Result<Self> {
        let n = frame.len() as f64;
        if frame.is_empty() {
            return Err(KgcmError::Data("cannot standardize an empty frame".into()));
        }
        let mut mean = Vec::new();
        let mut sd = Vec::new();
        for (j, col) in frame.features.columns().into_iter().enumerate() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            let s = var.sqrt();
            if !(s > 1e-12 * m.abs().max(1.0)) {
                return Err(KgcmError::Data(format!(
                    "zero-variance feature '{}'",
                    frame.feature_names[j]
                )));
            }
            mean.push(m);
            sd.push(s);
        }
        Ok(Self {
            feature_names: frame.feature_names.clone(),
            mean,
            sd,
        })
    }

    fn check(&self, frame: &TimeSeriesFrame) -> Result<()> {
        if self.feature_names != frame.feature_names {
            return Err(KgcmError::Shape(format!(
                "stats for {:?} applied to {:?}",
                self.feature_names, frame.feature_names
            )));
        }
        Ok(())
    }

    pub fn inverse(&self, frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
        self.check(frame)?;
        let mut f = frame.features.clone();
        for (j, mut col) in f.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| v * self.sd[j] + self.mean[j]);
        }
        Ok(TimeSeriesFrame {
            dates: frame.dates.clone(),
            feature_names: frame.feature_names.clone(),
            features: f,
        })
    }
}

/// Standardizes `frame`; with `stats == None` the statistics are fitted on
/// `frame` itself (which must then be the training split).
///
/// Standardized frames may hold negative `vtot`, so the result bypasses the
/// physical-range check of [`TimeSeriesFrame::new`].
pub fn standardize(
    frame: &TimeSeriesFrame,
    stats: Option<&StandardizationStats>,
) -> Result<(TimeSeriesFrame, StandardizationStats)> {
    let stats = match stats {
        Some(s) => {
            s.check(frame)?;
            s.clone()
        }
        None => StandardizationStats::fit(frame)?,
    };
    let mut f = frame.features.clone();
    for (j, mut col) in f.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|v| (v - stats.mean[j]) / stats.sd[j]);
    }
    Ok((
        TimeSeriesFrame {
            dates: frame.dates.clone(),
            feature_names: frame.feature_names.clone(),
            features: f,
        },
        stats,
    ))
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitFractions {
    /// Segment lengths: `floor(T*f)` for train and val, remainder to test.
    pub fn lengths(&self, total: usize) -> Result<(usize, usize, usize)> {
        let fr = [self.train, self.val, self.test];
        if fr.iter().any(|f| !(*f > 0.0)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(KgcmError::Config(format!(
                "split fractions {fr:?} must be positive and sum to 1"
            )));
        }
        // Guard the floor against representation error such as 0.7*100 = 70.00000000000001
        // or 0.15*100 = 14.999999999999998.
        let floor = |f: f64| ((total as f64) * f + 1e-9).floor() as usize;
        let train = floor(self.train);
        let val = floor(self.val);
        Ok((train, val, total - train - val))
    }
}

/// Contiguous train/validation/test frames in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: TimeSeriesFrame,
    pub val: TimeSeriesFrame,
    pub test: TimeSeriesFrame,
}

/// Splits chronologically; every segment must hold at least `min_len` rows.
pub fn chronological_split(
    frame: &TimeSeriesFrame,
    fractions: SplitFractions,
    min_len: usize,
) -> Result<Splits> {
    let (a, b, _) = fractions.lengths(frame.len())?;
    let splits = Splits {
        train: frame.slice(0, a),
        val: frame.slice(a, a + b),
        test: frame.slice(a + b, frame.len()),
    };
    for (name, s) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        if s.len() < min_len {
            return Err(KgcmError::Data(format!(
                "{name} segment has {} rows, need at least {min_len}",
                s.len()
            )));
        }
    }
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn day(i: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Duration::days(i)
    }

    fn frame_from_cols(cols: &[Vec<f64>]) -> TimeSeriesFrame {
        let t = cols[0].len();
        let names = (0..cols.len()).map(|i| format!("f{i}")).collect();
        let f = Array2::from_shape_fn((t, cols.len()), |(r, c)| cols[c][r]);
        TimeSeriesFrame::new((0..t as i64).map(day).collect(), names, f).unwrap()
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_five_row_csv() {
        let mut s = String::from("date,sit,ssh,u,v,vtot\n");
        for i in 0..5 {
            s += &format!("{},1.{i},0.2,0.01,0.02,0.03\n", day(i).format("%Y-%m-%d"));
        }
        let f = write_tmp(&s);
        let frame = load_series(f.path(), &DEFAULT_SCHEMA).unwrap();
        assert_eq!(frame.len(), 5);
        assert_eq!(frame.n_features(), 5);
        assert_eq!(frame.features()[[3, 0]], 1.3);
    }

    #[test]
    fn reports_date_gap_row() {
        let s = "date,sit,ssh,u,v,vtot\n\
                 2020-01-01,1,1,1,1,1\n\
                 2020-01-02,1,1,1,1,1\n\
                 2020-01-04,1,1,1,1,1\n";
        let f = write_tmp(s);
        let err = load_series(f.path(), &DEFAULT_SCHEMA).unwrap_err().to_string();
        assert!(err.contains("date gap at row 3"), "{err}");
    }

    #[test]
    fn reports_bad_cells() {
        let dup = write_tmp("date,sit,ssh,u,v,vtot\n2020-01-01,1,1,1,1,1\n2020-01-01,1,1,1,1,1\n");
        let err = load_series(dup.path(), &DEFAULT_SCHEMA).unwrap_err().to_string();
        assert!(err.contains("duplicate date at row 2"), "{err}");

        let text = write_tmp("date,sit,ssh,u,v,vtot\n2020-01-01,1,abc,1,1,1\n");
        let err = load_series(text.path(), &DEFAULT_SCHEMA).unwrap_err().to_string();
        assert!(err.contains("row 1, column ssh"), "{err}");

        let missing = write_tmp("date,sit,ssh,u,v\n2020-01-01,1,1,1,1\n");
        let err = load_series(missing.path(), &DEFAULT_SCHEMA).unwrap_err().to_string();
        assert!(err.contains("missing column 'vtot'"), "{err}");

        let bad_date = write_tmp("date,sit,ssh,u,v,vtot\n2020-13-01,1,1,1,1,1\n");
        let err = load_series(bad_date.path(), &DEFAULT_SCHEMA).unwrap_err().to_string();
        assert!(err.contains("unparseable date at row 1"), "{err}");

        let empty_cell = write_tmp("date,sit,ssh,u,v,vtot\n2020-01-01,1,,1,1,1\n");
        assert!(load_series(empty_cell.path(), &DEFAULT_SCHEMA).is_err());
    }

    #[test]
    fn loads_1620_day_span() {
        let mut s = String::from("date,sit,ssh,u,v,vtot\n");
        for i in 0..1620 {
            s += &format!("{},1,0.1,0.0,0.1,0.1\n", day(i).format("%Y-%m-%d"));
        }
        let f = write_tmp(&s);
        let frame = load_series(f.path(), &DEFAULT_SCHEMA).unwrap();
        assert_eq!(frame.len(), 1620);
        assert_eq!(frame.dates()[1619].to_string(), "2024-06-07");
    }

    #[test]
    fn negative_vtot_rejected() {
        let f = Array2::from_shape_vec((1, 1), vec![-0.1]).unwrap();
        assert!(TimeSeriesFrame::new(vec![day(0)], vec!["vtot".into()], f).is_err());
    }

    fn grid(lats: Vec<f64>, lons: Vec<f64>, days: usize, f: impl Fn(usize, usize, usize) -> Option<f64>) -> GriddedField {
        let mut values = Vec::new();
        for t in 0..days {
            for i in 0..lats.len() {
                for j in 0..lons.len() {
                    values.push(f(t, i, j));
                }
            }
        }
        GriddedField {
            dates: (0..days as i64).map(day).collect(),
            lats,
            lons,
            values,
        }
    }

    #[test]
    fn spatial_average_examples() {
        let g = grid(vec![60.0, 70.0], vec![0.0, 1.0], 3, |_, _, _| Some(4.2));
        let fr = spatial_average(&[("x".into(), g)], 60.0, 90.0, AreaWeighting::Unweighted).unwrap();
        assert!(fr.column("x").unwrap().iter().all(|&v| v == 4.2));

        let g = grid(vec![60.0, 70.0], vec![0.0, 1.0], 1, |_, i, j| Some((i * 2 + j + 1) as f64));
        let fr = spatial_average(&[("x".into(), g)], 60.0, 90.0, AreaWeighting::Unweighted).unwrap();
        assert_eq!(fr.column("x").unwrap(), vec![2.5]);

        let lats: Vec<f64> = (-90..=90).map(f64::from).collect();
        assert_eq!(lats.len(), 181);
        assert_eq!(latitude_subset(&lats, 60.0, 90.0).len(), 31);
    }

    #[test]
    fn spatial_average_excludes_missing_and_rejects_empty() {
        let g = grid(vec![65.0], vec![0.0, 1.0, 2.0], 2, |t, _, j| {
            (t == 0 && j != 1).then_some(j as f64 + 1.0)
        });
        let err = spatial_average(&[("x".into(), g.clone())], 60.0, 90.0, AreaWeighting::Unweighted);
        assert!(err.unwrap_err().to_string().contains("every cell missing"));

        let g2 = grid(vec![65.0], vec![0.0, 1.0, 2.0], 1, |_, _, j| (j != 1).then_some(j as f64 + 1.0));
        let fr = spatial_average(&[("x".into(), g2)], 60.0, 90.0, AreaWeighting::Unweighted).unwrap();
        assert_eq!(fr.column("x").unwrap(), vec![2.0]);

        let g3 = grid(vec![10.0], vec![0.0], 1, |_, _, _| Some(1.0));
        assert!(spatial_average(&[("x".into(), g3)], 60.0, 90.0, AreaWeighting::Unweighted).is_err());
    }

    #[test]
    fn cos_latitude_weighting() {
        let g = grid(vec![0.0, 60.0], vec![0.0], 1, |_, i, _| Some(i as f64));
        let fr = spatial_average(&[("x".into(), g)], -90.0, 90.0, AreaWeighting::CosLatitude).unwrap();
        // weights 1 and 0.5 -> (0*1 + 1*0.5) / 1.5
        assert!((fr.column("x").unwrap()[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gridded_file_roundtrip() {
        let s = "date,lat,lon,value\n\
                 2020-01-01,60,0,1\n2020-01-01,60,1,2\n2020-01-01,61,0,3\n2020-01-01,61,1,\n\
                 2020-01-02,60,0,5\n2020-01-02,60,1,5\n2020-01-02,61,0,5\n2020-01-02,61,1,5\n";
        let f = write_tmp(s);
        let g = GriddedField::load(f.path()).unwrap();
        assert_eq!(g.lats, vec![60.0, 61.0]);
        assert_eq!(g.get(0, 1, 1), None);
        let fr = spatial_average(&[("x".into(), g)], 60.0, 90.0, AreaWeighting::Unweighted).unwrap();
        assert_eq!(fr.column("x").unwrap(), vec![2.0, 5.0]);
    }

    #[test]
    fn standardize_examples() {
        let fr = frame_from_cols(&[vec![1.0, 2.0, 3.0]]);
        let (z, stats) = standardize(&fr, None).unwrap();
        let expect = 1.0 / (2.0f64 / 3.0).sqrt();
        let col = z.column("f0").unwrap();
        assert!((col[0] + expect).abs() < 1e-12 && col[1].abs() < 1e-12);
        assert!((col[2] - 1.224744871391589).abs() < 1e-12);
        assert!((stats.sd[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);

        let (zz, _) = standardize(&z, None).unwrap();
        for (a, b) in zz.features().iter().zip(z.features()) {
            assert!((a - b).abs() < 1e-9);
        }

        let c = frame_from_cols(&[vec![5.0, 5.0, 5.0]]);
        assert!(standardize(&c, None).unwrap_err().to_string().contains("zero-variance"));
    }

    #[test]
    fn standardize_with_given_stats_and_inverse() {
        let tr = frame_from_cols(&[vec![1.0, 2.0, 3.0, 4.0], vec![0.5, -0.5, 2.0, 1.0]]);
        let (_, stats) = standardize(&tr, None).unwrap();
        let other = frame_from_cols(&[vec![10.0, 20.0], vec![3.0, 4.0]]);
        let (z, s2) = standardize(&other, Some(&stats)).unwrap();
        assert_eq!(s2, stats);
        assert!((z.features()[[0, 0]] - (10.0 - 2.5) / stats.sd[0]).abs() < 1e-12);
        let back = stats.inverse(&z).unwrap();
        for (a, b) in back.features().iter().zip(other.features()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn split_lengths() {
        let f = SplitFractions::default();
        assert_eq!(f.lengths(10).unwrap(), (7, 1, 2));
        assert_eq!(f.lengths(100).unwrap(), (70, 15, 15));
        assert_eq!(f.lengths(1620).unwrap(), (1134, 243, 243));
        let bad = SplitFractions {
            train: 0.5,
            val: 0.2,
            test: 0.2,
        };
        assert!(bad.lengths(10).is_err());
    }

    #[test]
    fn split_concatenates_back() {
        let fr = frame_from_cols(&[(0..100).map(f64::from).collect()]);
        let s = chronological_split(&fr, SplitFractions::default(), 5).unwrap();
        assert_eq!(s.train.dates().last().unwrap().succ_opt(), s.val.dates().first().copied());
        let back = TimeSeriesFrame::concat(&[&s.train, &s.val, &s.test]).unwrap();
        assert_eq!(back, fr);
        assert!(chronological_split(&fr, SplitFractions::default(), 16).is_err());
    }
}
