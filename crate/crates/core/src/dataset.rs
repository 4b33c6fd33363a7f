//! Drive-cycle records: CSV interchange, z-score feature normalization,
//! holdout and K-fold partitioning, and mini-batching.
//!
//! The CSV header is fixed: `t_s,voltage_v,current_a,temp_c,soc_pct`.
//! Current is signed with charging positive and discharge negative.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{Matrix, Vector};

pub const CSV_HEADER: &str = "t_s,voltage_v,current_a,temp_c,soc_pct";
pub const FEATURE_HEADER: &str = "t_s,voltage_v,current_a,temp_c";

pub const NUM_FEATURES: usize = 3;
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = ["voltage", "current", "temperature"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRecord {
    /// Seconds since the start of the cycle.
    pub t: f64,
    pub voltage: f64,
    /// Amperes, charging positive.
    pub current: f64,
    /// Degrees Celsius.
    pub temperature: f64,
    /// Percent, `0..=100`.
    pub soc: f64,
}

impl SampleRecord {
    pub fn features(&self) -> [f64; NUM_FEATURES] {
        [self.voltage, self.current, self.temperature]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub records: Vec<SampleRecord>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, records: Vec<SampleRecord>) -> Self {
        Dataset {
            name: name.into(),
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> Dataset {
        Dataset {
            name: name.into(),
            records: indices.iter().map(|&i| self.records[i]).collect(),
        }
    }

    pub fn targets(&self) -> Vector {
        self.records.iter().map(|r| r.soc).collect()
    }

    /// Raw (unnormalized) feature matrix.
    pub fn features(&self) -> Result<Matrix> {
        let data = self.records.iter().flat_map(|r| r.features()).collect();
        Ok(Matrix::new(self.len(), NUM_FEATURES, data)?)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.t, r.voltage, r.current, r.temperature, r.soc
            )?;
        }
        out.flush()
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file).map_err(|e| Error::io(path, e))
    }
}

/// Which columns a CSV is expected to carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvKind {
    /// Full schema with the `soc_pct` target.
    Labeled,
    /// Either the full schema or the four feature columns; missing targets read as NaN.
    Features,
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    load_csv_as(path, CsvKind::Labeled)
}

pub fn load_csv_as(path: impl AsRef<Path>, kind: CsvKind) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(BufReader::new(file), name, kind)
}

pub fn read_csv<R: Read>(input: R, name: impl Into<String>, kind: CsvKind) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut rows = reader.records();

    let header = match rows.next() {
        Some(h) => h.map_err(|e| csv_error(e, 1))?,
        None => {
            return Err(Error::Validation {
                line: Some(1),
                message: "missing header".into(),
            })
        }
    };
    let header: Vec<&str> = header.iter().collect();
    let labeled = if header.join(",") == CSV_HEADER {
        true
    } else if kind == CsvKind::Features && header.join(",") == FEATURE_HEADER {
        false
    } else {
        let expected = match kind {
            CsvKind::Labeled => format!("'{CSV_HEADER}'"),
            CsvKind::Features => format!("'{CSV_HEADER}' or '{FEATURE_HEADER}'"),
        };
        return Err(Error::Validation {
            line: Some(1),
            message: format!("header '{}' does not match {expected}", header.join(",")),
        });
    };
    let width = if labeled { 5 } else { 4 };

    let mut records = Vec::new();
    let mut prev_t = f64::NEG_INFINITY;
    for row in rows {
        let row = row.map_err(|e| csv_error(e, 0))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", row.len()),
            });
        }
        let mut vals = [f64::NAN; 5];
        for (i, field) in row.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("field {} ('{field}') is not a number", i + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("field {} is not finite", i + 1),
                });
            }
            vals[i] = v;
        }
        let rec = SampleRecord {
            t: vals[0],
            voltage: vals[1],
            current: vals[2],
            temperature: vals[3],
            soc: vals[4],
        };
        let invalid = |message: String| Error::Validation {
            line: Some(line),
            message,
        };
        if labeled && !(0.0..=100.0).contains(&rec.soc) {
            return Err(invalid(format!("soc_pct {} outside [0, 100]", rec.soc)));
        }
        if rec.voltage <= 0.0 {
            return Err(invalid(format!("voltage_v {} must be positive", rec.voltage)));
        }
        if rec.t < prev_t {
            return Err(invalid(format!("t_s {} decreases (previous {prev_t})", rec.t)));
        }
        prev_t = rec.t;
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::Validation {
            line: None,
            message: "empty dataset".into(),
        });
    }
    Ok(Dataset::new(name, records))
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Per-feature z-score statistics (voltage, current, temperature).
///
/// Standard deviations are population (divide-by-N) values. Only
/// [`Normalizer::fit`] and the validating [`Normalizer::from_parts`] construct
/// one, so an instance is always usable.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    mean: [f64; NUM_FEATURES],
    std: [f64; NUM_FEATURES],
}

impl Normalizer {
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::config("cannot fit a normalizer on an empty dataset"));
        }
        let n = train.len() as f64;
        let mut mean = [0.0; NUM_FEATURES];
        for r in &train.records {
            for (m, x) in mean.iter_mut().zip(r.features()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; NUM_FEATURES];
        for r in &train.records {
            for ((v, x), m) in var.iter_mut().zip(r.features()).zip(mean) {
                *v += (x - m) * (x - m);
            }
        }
        let mut std = [0.0; NUM_FEATURES];
        for f in 0..NUM_FEATURES {
            std[f] = (var[f] / n).sqrt();
            if !(std[f] > 0.0) {
                return Err(Error::DegenerateFeature(FEATURE_NAMES[f]));
            }
        }
        Ok(Normalizer { mean, std })
    }

    pub fn from_parts(mean: [f64; NUM_FEATURES], std: [f64; NUM_FEATURES]) -> Result<Self> {
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Contract("normalizer mean must be finite".into()));
        }
        for (f, s) in std.iter().enumerate() {
            if !(s.is_finite() && *s > 0.0) {
                return Err(Error::DegenerateFeature(FEATURE_NAMES[f]));
            }
        }
        Ok(Normalizer { mean, std })
    }

    pub fn mean(&self) -> [f64; NUM_FEATURES] {
        self.mean
    }

    pub fn std(&self) -> [f64; NUM_FEATURES] {
        self.std
    }

    pub fn apply(&self, d: &Dataset) -> Result<Matrix> {
        self.apply_records(&d.records)
    }

    pub fn apply_records(&self, records: &[SampleRecord]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(records.len() * NUM_FEATURES);
        for r in records {
            for (f, x) in r.features().into_iter().enumerate() {
                data.push((x - self.mean[f]) / self.std[f]);
            }
        }
        Ok(Matrix::new(records.len(), NUM_FEATURES, data)?)
    }
}

/// Row indices of a train/validation/test partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoldoutIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partition `0..n` into train/val/test with sizes `round(n·frac)`, the
/// remainder going to test. With `shuffle`, indices are permuted by `seed`
/// first; otherwise the partition is contiguous in time order. Each part is
/// returned in ascending (time) order.
pub fn holdout_indices(
    n: usize,
    train_frac: f64,
    val_frac: f64,
    seed: u64,
    shuffle: bool,
) -> Result<HoldoutIndices> {
    if !(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac < 1.0) {
        return Err(Error::config(format!(
            "split fractions must be positive with train + val < 1 (got {train_frac}, {val_frac})"
        )));
    }
    let n_train = (n as f64 * train_frac).round() as usize;
    let n_val = (n as f64 * val_frac).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::config(format!(
            "split of {n} rows into {train_frac}/{val_frac}/rest leaves a part empty"
        )));
    }
    let order = permutation(n, seed, shuffle);
    Ok(HoldoutIndices {
        train: ascending(&order[..n_train]),
        val: ascending(&order[n_train..n_train + n_val]),
        test: ascending(&order[n_train + n_val..]),
    })
}

pub struct Holdout {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

pub fn split_holdout(
    d: &Dataset,
    train_frac: f64,
    val_frac: f64,
    seed: u64,
    shuffle: bool,
) -> Result<Holdout> {
    let idx = holdout_indices(d.len(), train_frac, val_frac, seed, shuffle)?;
    Ok(Holdout {
        train: d.subset(format!("{}-train", d.name), &idx.train),
        val: d.subset(format!("{}-val", d.name), &idx.val),
        test: d.subset(format!("{}-test", d.name), &idx.test),
    })
}

/// Two-way split used when the test rows come from a separate file.
pub fn split_train_val(
    d: &Dataset,
    val_frac: f64,
    seed: u64,
    shuffle: bool,
) -> Result<(Dataset, Dataset)> {
    if !(val_frac > 0.0 && val_frac < 1.0) {
        return Err(Error::config(format!("validation fraction {val_frac} not in (0, 1)")));
    }
    let n_val = (d.len() as f64 * val_frac).round() as usize;
    if n_val == 0 || n_val >= d.len() {
        return Err(Error::config(format!(
            "validation fraction {val_frac} of {} rows leaves a part empty",
            d.len()
        )));
    }
    let n_train = d.len() - n_val;
    let order = permutation(d.len(), seed, shuffle);
    Ok((
        d.subset(format!("{}-train", d.name), &ascending(&order[..n_train])),
        d.subset(format!("{}-val", d.name), &ascending(&order[n_train..])),
    ))
}

fn ascending(part: &[usize]) -> Vec<usize> {
    let mut v = part.to_vec();
    v.sort_unstable();
    v
}

fn permutation(n: usize, seed: u64, shuffle: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        order.shuffle(&mut rng::seeded(seed));
    }
    order
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    k: usize,
    fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn len(&self) -> usize {
        self.fold_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fold_of.is_empty()
    }

    /// Indices held out for validation in `fold`, ascending.
    pub fn validation_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    /// Indices trained on when `fold` is held out, ascending.
    pub fn training_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffle `0..n` by `seed` and deal the permutation round-robin into `k` folds.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(Error::config(format!(
            "fold count {k} must satisfy 2 <= k <= {n}"
        )));
    }
    let order = permutation(n, seed, true);
    let mut fold_of = vec![0; n];
    for (pos, &idx) in order.iter().enumerate() {
        fold_of[idx] = pos % k;
    }
    Ok(FoldAssignment { k, fold_of })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Matrix,
    pub y: Vector,
    /// Source row of each batch row in the matrix the batch was cut from.
    pub rows: Vec<usize>,
}

/// Mini-batches covering every row exactly once; the last one may be short.
pub struct Batches<'a> {
    x: &'a Matrix,
    y: &'a Vector,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Iterator for Batches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let rows = self.order[self.pos..end].to_vec();
        self.pos = end;
        let x = self
            .x
            .select_rows(&rows)
            .expect("batch rows are in bounds and non-empty");
        let y = self.y.select(&rows);
        Some(Batch { x, y, rows })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.order.len() - self.pos).div_ceil(self.batch_size);
        (left, Some(left))
    }
}

impl ExactSizeIterator for Batches<'_> {}

/// Iterate mini-batches of `(x, y)`. With a seed the row order is a
/// seed-determined permutation; without one, input order is kept.
pub fn batch_iter<'a>(
    x: &'a Matrix,
    y: &'a Vector,
    batch_size: usize,
    shuffle_seed: Option<u64>,
) -> Result<Batches<'a>> {
    if batch_size == 0 {
        return Err(Error::config("batch size must be at least 1"));
    }
    if x.rows() != y.len() {
        return Err(crate::tensor::ShapeError::new("batch_iter", x.shape(), y.len()).into());
    }
    let order = match shuffle_seed {
        Some(seed) => permutation(x.rows(), seed, true),
        None => (0..x.rows()).collect(),
    };
    Ok(Batches {
        x,
        y,
        order,
        batch_size,
        pos: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(v: f64, i: f64, t: f64, soc: f64) -> SampleRecord {
        SampleRecord {
            t: 0.0,
            voltage: v,
            current: i,
            temperature: t,
            soc,
        }
    }

    fn parse(text: &str) -> Result<Dataset> {
        read_csv(text.as_bytes(), "t", CsvKind::Labeled)
    }

    #[test]
    fn reads_well_formed_rows() {
        let d = parse(
            "t_s,voltage_v,current_a,temp_c,soc_pct\n0,4.1,-1.5,25,99\n1,4.0,-1.5,25.1,98.5\n2,4.0,0.5,25.2,98.6\n",
        )
        .unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.records[1].soc, 98.5);
        assert_eq!(d.records[2].current, 0.5);
    }

    #[test]
    fn header_only_is_empty_dataset() {
        let err = parse("t_s,voltage_v,current_a,temp_c,soc_pct\n").unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
        assert!(err.to_string().contains("empty dataset"));
    }

    #[test]
    fn soc_out_of_range_reports_line() {
        let err = parse("t_s,voltage_v,current_a,temp_c,soc_pct\n0,4,-1,25,50\n1,4,-1,25,101\n")
            .unwrap_err();
        match err {
            Error::Validation { line, .. } => assert_eq!(line, Some(3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = parse("t_s,voltage_v,current_a,temp_c,soc_pct\n0,4,-1,25,50\n1,4,abc,25,50\n")
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse("t_s,voltage_v,current_a,temp_c,soc_pct\n# note\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn rejects_wrong_header_and_decreasing_time() {
        assert!(parse("t,v,i,T,soc\n0,4,-1,25,50\n").is_err());
        let err = parse("t_s,voltage_v,current_a,temp_c,soc_pct\n5,4,-1,25,50\n4,4,-1,25,50\n")
            .unwrap_err();
        assert!(matches!(err, Error::Validation { line: Some(3), .. }));
    }

    #[test]
    fn feature_only_files_load_without_targets() {
        let d = read_csv(
            "t_s,voltage_v,current_a,temp_c\n0,4,-1,25\n".as_bytes(),
            "f",
            CsvKind::Features,
        )
        .unwrap();
        assert!(d.records[0].soc.is_nan());
        assert!(read_csv("t_s,voltage_v,current_a,temp_c\n0,4,-1,25\n".as_bytes(), "f", CsvKind::Labeled).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = Dataset::new(
            "x",
            vec![
                SampleRecord { t: 0.0, voltage: 3.7123456789012345, current: -0.1, temperature: 25.000000001, soc: 100.0 },
                SampleRecord { t: 1.0, voltage: 3.7, current: 1e-17, temperature: 24.9, soc: 0.1 + 0.2 },
            ],
        );
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = read_csv(buf.as_slice(), "x", CsvKind::Labeled).unwrap();
        assert_eq!(back.records, d.records);
    }

    #[test]
    fn normalizer_simple_values() {
        let d = Dataset::new("n", vec![rec(-1.0 + 5.0, -1.0, 0.0, 1.0), rec(1.0 + 5.0, 1.0, 2.0, 1.0), rec(5.0, 0.0, 4.0, 1.0)]);
        let n = Normalizer::fit(&d).unwrap();
        assert!((n.mean()[0] - 5.0).abs() < 1e-15);
        // {0, 2, 4}: mean 2, population variance 8/3
        assert!((n.mean()[2] - 2.0).abs() < 1e-15);
        assert!((n.std()[2] - (8.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn normalizer_unit_pair() {
        let d = Dataset::new("n", vec![rec(4.0, -1.0, 20.0, 1.0), rec(5.0, 1.0, 21.0, 1.0)]);
        let n = Normalizer::fit(&d).unwrap();
        assert_eq!(n.mean()[1], 0.0);
        assert_eq!(n.std()[1], 1.0);
    }

    #[test]
    fn constant_feature_is_degenerate() {
        let d = Dataset::new("n", vec![rec(4.0, -1.0, 25.0, 1.0), rec(4.1, 1.0, 25.0, 1.0)]);
        assert!(matches!(Normalizer::fit(&d), Err(Error::DegenerateFeature("temperature"))));
    }

    #[test]
    fn normalizer_maps_mean_and_sigma() {
        let n = Normalizer::from_parts([4.0, 0.0, 25.0], [0.5, 2.0, 3.0]).unwrap();
        let m = n
            .apply_records(&[rec(4.0, 0.0, 25.0, 0.0), rec(4.5, 2.0, 28.0, 0.0)])
            .unwrap();
        assert_eq!(m.row(0), &[0.0, 0.0, 0.0]);
        assert_eq!(m.row(1), &[1.0, 1.0, 1.0]);
        assert!(Normalizer::from_parts([0.0; 3], [1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn normalizer_statistics_come_from_train_split_only() {
        let mut records = Vec::new();
        for i in 0..100 {
            let x = i as f64;
            records.push(SampleRecord { t: x, voltage: 3.0 + 0.01 * x, current: -1.0 + 0.02 * x, temperature: 20.0 + 0.1 * x, soc: 50.0 });
        }
        // shifted validation/test rows
        for i in 0..50 {
            let x = i as f64;
            records.push(SampleRecord { t: 100.0 + x, voltage: 9.0 + x, current: 30.0 - x, temperature: 80.0 + x, soc: 50.0 });
        }
        let full = Dataset::new("leak", records);
        let idx: Vec<usize> = (0..100).collect();
        let train = full.subset("train", &idx);
        let norm = Normalizer::fit(&train).unwrap();
        let reference = Normalizer::fit(&Dataset::new("ref", full.records[..100].to_vec())).unwrap();
        assert_eq!(norm, reference);
        let everything = Normalizer::fit(&full).unwrap();
        assert_ne!(norm.mean(), everything.mean());
    }

    #[test]
    fn holdout_sizes_and_partition() {
        let idx = holdout_indices(10, 0.8, 0.1, 3, true).unwrap();
        assert_eq!((idx.train.len(), idx.val.len(), idx.test.len()), (8, 1, 1));
        let mut all: Vec<usize> = idx.train.iter().chain(&idx.val).chain(&idx.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(idx, holdout_indices(10, 0.8, 0.1, 3, true).unwrap());
        assert_ne!(idx, holdout_indices(10, 0.8, 0.1, 4, true).unwrap());
    }

    #[test]
    fn split_parts_keep_time_order() {
        let idx = holdout_indices(200, 0.5, 0.25, 9, true).unwrap();
        for part in [&idx.train, &idx.val, &idx.test] {
            assert!(part.windows(2).all(|w| w[0] < w[1]));
        }
        let d = Dataset::new(
            "t",
            (0..40)
                .map(|i| SampleRecord { t: i as f64, voltage: 3.7, current: -1.0, temperature: 25.0, soc: 50.0 })
                .collect(),
        );
        let (tr, va) = split_train_val(&d, 0.3, 2, true).unwrap();
        for part in [tr, va] {
            assert!(part.records.windows(2).all(|w| w[0].t < w[1].t));
        }
    }

    #[test]
    fn holdout_without_shuffle_is_contiguous() {
        let idx = holdout_indices(10, 0.6, 0.2, 3, false).unwrap();
        assert_eq!(idx.train, (0..6).collect::<Vec<_>>());
        assert_eq!(idx.test, vec![8, 9]);
    }

    #[test]
    fn holdout_rejects_empty_parts() {
        assert!(holdout_indices(3, 0.8, 0.1, 0, true).is_err());
        assert!(holdout_indices(10, 0.9, 0.1, 0, true).is_err());
        assert!(holdout_indices(10, 0.0, 0.1, 0, true).is_err());
    }

    #[test]
    fn kfold_examples() {
        let a = kfold_split(10, 5, 1).unwrap();
        assert_eq!(a.fold_sizes(), vec![2; 5]);
        let b = kfold_split(7, 4, 1).unwrap();
        let mut sizes = b.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 2, 2, 2]);
        assert_eq!(b, kfold_split(7, 4, 1).unwrap());
        assert!(kfold_split(3, 4, 0).is_err());
        assert!(kfold_split(3, 1, 0).is_err());
    }

    #[test]
    fn batches_cover_rows_in_order() {
        let x = Matrix::new(10, 1, (0..10).map(f64::from).collect()).unwrap();
        let y: Vector = (0..10).map(f64::from).collect();
        let sizes: Vec<usize> = batch_iter(&x, &y, 4, None).unwrap().map(|b| b.y.len()).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        let rows: Vec<usize> = batch_iter(&x, &y, 4, None).unwrap().flat_map(|b| b.rows).collect();
        assert_eq!(rows, (0..10).collect::<Vec<_>>());
        let all: Vec<Batch> = batch_iter(&x, &y, 64, None).unwrap().collect();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].x, x);
    }

    #[test]
    fn shuffled_batches_are_seeded_permutations() {
        let x = Matrix::new(50, 1, (0..50).map(f64::from).collect()).unwrap();
        let y: Vector = (0..50).map(f64::from).collect();
        let a: Vec<usize> = batch_iter(&x, &y, 7, Some(5)).unwrap().flat_map(|b| b.rows).collect();
        let b: Vec<usize> = batch_iter(&x, &y, 7, Some(5)).unwrap().flat_map(|b| b.rows).collect();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(a, sorted);
        for batch in batch_iter(&x, &y, 7, Some(5)).unwrap() {
            for (r, &src) in batch.rows.iter().enumerate() {
                assert_eq!(batch.x.get(r, 0), src as f64);
                assert_eq!(batch.y[r], src as f64);
            }
        }
        assert!(batch_iter(&x, &y, 0, None).is_err());
    }

    proptest! {
        #[test]
        fn fit_set_normalizes_to_zero_mean_unit_std(
            rows in proptest::collection::vec((2.5f64..4.5, -5.0f64..3.0, 0.0f64..50.0), 3..200)
        ) {
            let d = Dataset::new("p", rows.iter().map(|&(v, i, t)| rec(v, i, t, 50.0)).collect());
            let Ok(norm) = Normalizer::fit(&d) else { return Ok(()); };
            let m = norm.apply(&d).unwrap();
            let n = m.rows() as f64;
            for c in 0..3 {
                let mean = (0..m.rows()).map(|r| m.get(r, c)).sum::<f64>() / n;
                let var = (0..m.rows()).map(|r| (m.get(r, c) - mean).powi(2)).sum::<f64>() / n;
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn folds_partition_and_balance(n in 2usize..500, k_raw in 2usize..20, seed in any::<u64>()) {
            let k = k_raw.min(n);
            let a = kfold_split(n, k, seed).unwrap();
            prop_assert_eq!(a.len(), n);
            let sizes = a.fold_sizes();
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut seen = vec![0; n];
            for f in 0..k {
                for i in a.validation_indices(f) {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }
}
