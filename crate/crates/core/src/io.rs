//! CSV serialization for measures, marginal vectors, traces, and benchmark
//! tables.
//!
//! Matrix layout: a header row holding the `y` labels (first cell is the
//! corner marker `x_label`), then one row per `x` atom with its label in
//! column 0. Floats are written with 17 significant digits so `f64` values
//! round-trip exactly.

use crate::balancing::BalanceTrace;
use crate::contrastive::ScoreMatrix;
use crate::estimation::MseRecord;
use crate::measure::{JointMeasure, TestFunction};
use crate::{Error, Real, Result};
use ndarray::Array2;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// 17-significant-digit float formatting (exact `f64` round-trip).
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_float<T: Real>(field: &str, context: &str) -> Result<T> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Malformed(format!("bad float {field:?} in {context}")))?;
    Ok(T::of(v))
}

fn write_matrix<T: Real, W: Write>(
    out: W,
    values: &Array2<T>,
    x_labels: &[String],
    y_labels: &[String],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["x_label".to_string()];
    header.extend(y_labels.iter().cloned());
    w.write_record(&header)?;
    for (i, row) in values.rows().into_iter().enumerate() {
        let mut record = vec![x_labels[i].clone()];
        record.extend(row.iter().map(|&v| format_float(v.as_f64())));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

fn read_matrix<T: Real, R: Read>(input: R) -> Result<(Array2<T>, Vec<String>, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| Error::Malformed("empty matrix CSV".into()))??;
    if header.is_empty() {
        return Err(Error::Malformed("matrix CSV header is empty".into()));
    }
    let y_labels: Vec<String> = header.iter().skip(1).map(|s| s.to_string()).collect();
    let l = y_labels.len();
    if l == 0 {
        return Err(Error::Malformed("matrix CSV has no y columns".into()));
    }
    let mut x_labels = Vec::new();
    let mut flat = Vec::new();
    for record in records {
        let record = record?;
        if record.len() != l + 1 {
            return Err(Error::Malformed(format!(
                "row {} has {} fields, expected {}",
                x_labels.len() + 2,
                record.len(),
                l + 1
            )));
        }
        x_labels.push(record[0].to_string());
        for field in record.iter().skip(1) {
            flat.push(parse_float::<T>(field, "matrix CSV")?);
        }
    }
    let m = x_labels.len();
    if m == 0 {
        return Err(Error::Malformed("matrix CSV has no data rows".into()));
    }
    let values = Array2::from_shape_vec((m, l), flat).expect("shape checked per row");
    Ok((values, x_labels, y_labels))
}

pub fn write_measure_csv<T: Real, W: Write>(out: W, measure: &JointMeasure<T>) -> Result<()> {
    write_matrix(out, measure.weights(), measure.x_labels(), measure.y_labels())
}

pub fn read_measure_csv<T: Real, R: Read>(input: R) -> Result<JointMeasure<T>> {
    let (values, x_labels, y_labels) = read_matrix(input)?;
    JointMeasure::new(values, x_labels, y_labels)
}

pub fn write_measure_csv_path<T: Real>(path: &Path, measure: &JointMeasure<T>) -> Result<()> {
    write_measure_csv(BufWriter::new(File::create(path)?), measure)
}

pub fn read_measure_csv_path<T: Real>(path: &Path) -> Result<JointMeasure<T>> {
    read_measure_csv(BufReader::new(File::open(path)?))
}

pub fn write_test_function_csv<T: Real, W: Write>(out: W, h: &TestFunction<T>) -> Result<()> {
    let (m, l) = h.shape();
    let x_labels = crate::measure::default_labels("x", m);
    let y_labels = crate::measure::default_labels("y", l);
    write_matrix(out, h.values(), &x_labels, &y_labels)
}

pub fn read_test_function_csv<T: Real, R: Read>(input: R) -> Result<TestFunction<T>> {
    let (values, _, _) = read_matrix(input)?;
    TestFunction::new(values)
}

pub fn read_test_function_csv_path<T: Real>(path: &Path) -> Result<TestFunction<T>> {
    read_test_function_csv(BufReader::new(File::open(path)?))
}

pub fn write_test_function_csv_path<T: Real>(path: &Path, h: &TestFunction<T>) -> Result<()> {
    write_test_function_csv(BufWriter::new(File::create(path)?), h)
}

pub fn read_score_matrix_csv<T: Real, R: Read>(input: R) -> Result<ScoreMatrix<T>> {
    let (values, _, _) = read_matrix(input)?;
    ScoreMatrix::new(values)
}

pub fn read_score_matrix_csv_path<T: Real>(path: &Path) -> Result<ScoreMatrix<T>> {
    read_score_matrix_csv(BufReader::new(File::open(path)?))
}

pub fn write_vector_csv<T: Real, W: Write>(
    out: W,
    labels: &[String],
    values: &[T],
) -> Result<()> {
    if labels.len() != values.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            got: values.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "value"])?;
    for (label, &v) in labels.iter().zip(values.iter()) {
        w.write_record([label.as_str(), &format_float(v.as_f64())])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vector_csv<T: Real, R: Read>(input: R) -> Result<(Vec<String>, Vec<T>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 2 {
            return Err(Error::Malformed(format!(
                "vector CSV row has {} fields, expected 2",
                record.len()
            )));
        }
        labels.push(record[0].to_string());
        values.push(parse_float::<T>(&record[1], "vector CSV")?);
    }
    if values.is_empty() {
        return Err(Error::Malformed("vector CSV has no data rows".into()));
    }
    Ok((labels, values))
}

pub fn write_vector_csv_path<T: Real>(path: &Path, labels: &[String], values: &[T]) -> Result<()> {
    write_vector_csv(BufWriter::new(File::create(path)?), labels, values)
}

pub fn read_vector_csv_path<T: Real>(path: &Path) -> Result<(Vec<String>, Vec<T>)> {
    read_vector_csv(BufReader::new(File::open(path)?))
}

/// Trace CSV: one row per iterate with the axis balanced to produce it, the
/// ratio deviation consumed by that step, and the alternating KL violation.
pub fn write_trace_csv<T: Real, W: Write>(out: W, trace: &BalanceTrace<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "axis", "max_ratio_deviation", "kl_violation"])?;
    for (idx, _) in trace.iterates().iter().enumerate() {
        let axis = if idx == 0 {
            String::new()
        } else {
            trace.order().axis_at(idx).to_string()
        };
        let ratio = if idx == 0 {
            String::new()
        } else {
            format_float(trace.ratio_bounds()[idx - 1].as_f64())
        };
        w.write_record([
            idx.to_string(),
            axis,
            ratio,
            format_float(trace.kl_violations()[idx].as_f64()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv_path<T: Real>(path: &Path, trace: &BalanceTrace<T>) -> Result<()> {
    write_trace_csv(BufWriter::new(File::create(path)?), trace)
}

const MSE_HEADER: [&str; 10] = [
    "estimator", "k", "m", "n", "s", "epsilon", "mse", "bias", "variance", "seeds",
];

pub fn write_mse_csv<W: Write>(out: W, records: &[MseRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MSE_HEADER)?;
    for r in records {
        w.write_record([
            r.estimator.clone(),
            r.k.to_string(),
            r.m.to_string(),
            r.n.to_string(),
            format_float(r.s),
            format_float(r.epsilon),
            format_float(r.mse),
            format_float(r.bias),
            format_float(r.variance),
            r.seeds_used.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_mse_csv<R: Read>(input: R) -> Result<Vec<MseRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let mut records = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != MSE_HEADER.len() {
            return Err(Error::Malformed(format!(
                "MSE CSV row has {} fields, expected {}",
                record.len(),
                MSE_HEADER.len()
            )));
        }
        let parse_int = |f: &str| -> Result<u64> {
            f.trim()
                .parse()
                .map_err(|_| Error::Malformed(format!("bad integer {f:?} in MSE CSV")))
        };
        records.push(MseRecord {
            estimator: record[0].to_string(),
            k: parse_int(&record[1])? as usize,
            m: parse_int(&record[2])? as usize,
            n: parse_int(&record[3])?,
            s: parse_float::<f64>(&record[4], "MSE CSV")?,
            epsilon: parse_float::<f64>(&record[5], "MSE CSV")?,
            mse: parse_float::<f64>(&record[6], "MSE CSV")?,
            bias: parse_float::<f64>(&record[7], "MSE CSV")?,
            variance: parse_float::<f64>(&record[8], "MSE CSV")?,
            seeds_used: parse_int(&record[9])?,
        });
    }
    Ok(records)
}

pub fn write_mse_csv_path(path: &Path, records: &[MseRecord]) -> Result<()> {
    write_mse_csv(BufWriter::new(File::create(path)?), records)
}

pub fn read_mse_csv_path(path: &Path) -> Result<Vec<MseRecord>> {
    read_mse_csv(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::random_strictly_positive;
    use proptest::prelude::*;

    #[test]
    fn measure_round_trip_is_bit_exact() {
        let p = random_strictly_positive::<f64>(3, 4, 7).unwrap();
        let mut buf = Vec::new();
        write_measure_csv(&mut buf, &p).unwrap();
        let back: JointMeasure<f64> = read_measure_csv(&buf[..]).unwrap();
        assert_eq!(back.weights(), p.weights());
        assert_eq!(back.x_labels(), p.x_labels());
        assert_eq!(back.y_labels(), p.y_labels());
        assert!(back.is_normalized());
    }

    #[test]
    fn labels_with_commas_survive() {
        let p = JointMeasure::new(
            ndarray::array![[0.5, 0.5]],
            vec!["a, with comma".into()],
            vec!["y \"quoted\"".into(), "plain".into()],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_measure_csv(&mut buf, &p).unwrap();
        let back: JointMeasure<f64> = read_measure_csv(&buf[..]).unwrap();
        assert_eq!(back.x_labels()[0], "a, with comma");
        assert_eq!(back.y_labels()[0], "y \"quoted\"");
    }

    #[test]
    fn vector_round_trip() {
        let labels: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let values = [0.1, 1e-300, 0.25];
        let mut buf = Vec::new();
        write_vector_csv(&mut buf, &labels, &values).unwrap();
        let (l2, v2): (Vec<String>, Vec<f64>) = read_vector_csv(&buf[..]).unwrap();
        assert_eq!(l2, labels);
        assert_eq!(v2, values);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(read_measure_csv::<f64, _>(&b"x_label,y0\n"[..]).is_err());
        assert!(read_measure_csv::<f64, _>(&b"x_label,y0\nx0,notafloat\n"[..]).is_err());
        assert!(read_measure_csv::<f64, _>(&b"x_label,y0\nx0,1.0,2.0\n"[..]).is_err());
    }

    #[test]
    fn mse_table_round_trip() {
        let records = vec![MseRecord {
            estimator: "balanced".into(),
            k: 8,
            m: 10,
            n: 300,
            s: 0.3,
            epsilon: 0.25,
            mse: 1.234e-4,
            bias: -3.2e-6,
            variance: 1.2e-4,
            seeds_used: 200,
        }];
        let mut buf = Vec::new();
        write_mse_csv(&mut buf, &records).unwrap();
        let back = read_mse_csv(&buf[..]).unwrap();
        assert_eq!(back, records);
    }

    proptest! {
        #[test]
        fn float_formatting_round_trips(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let s = format_float(v);
            let back: f64 = s.parse().unwrap();
            prop_assert!(back == v || (back == 0.0 && v == 0.0));
        }
    }
}
