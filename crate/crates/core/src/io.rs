//! CSV ingestion and export. Files are comma-separated UTF-8 with a header
//! row; reals are written with 17 significant digits.

use std::collections::HashMap;
use std::io::{Read, Write};

use ndarray::Array2;

use crate::data::{FeatureMatrix, GroupAssignment, LabelVector, ScoreVector, WeakLabelMatrix};
use crate::error::{Error, Result};
use crate::labelmodel::AccuracyEstimate;
use crate::metrics::CenterScan;
use crate::scalar::Scalar;

/// Locale-independent scientific notation with 17 significant digits; parses
/// back to the same `f64`.
pub fn fmt_real<T: Scalar>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).from_reader(r)
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

fn header<R: Read>(rdr: &mut csv::Reader<R>, file: &str, leading: &[&str]) -> Result<Vec<String>> {
    let h: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if h.len() <= leading.len() || h.iter().zip(leading).any(|(a, b)| a != b) {
        return Err(Error::Parse(format!(
            "{file} header must start with {} followed by at least one column",
            leading.join(",")
        )));
    }
    Ok(h)
}

fn parse_int(field: &str, row: usize, what: &str) -> Result<i64> {
    field
        .trim()
        .parse::<i64>()
        .map_err(|_| Error::Parse(format!("row {row}: {what} {field:?} is not an integer")))
}

/// Reads `id,group,f1,...,fd`.
pub fn read_features<T: Scalar, R: Read>(r: R) -> Result<(FeatureMatrix<T>, GroupAssignment)> {
    let mut rdr = reader(r);
    let h = header(&mut rdr, "feature CSV", &["id", "group"])?;
    let d = h.len() - 2;
    let mut ids = Vec::new();
    let mut groups = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        ids.push(rec[0].to_owned());
        groups.push(parse_int(&rec[1], row, "group")?);
        for (col, f) in rec.iter().skip(2).enumerate() {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("row {row}: feature {f:?} is not a number")))?;
            if !v.is_finite() {
                return Err(Error::NonFiniteFeature { row, col });
            }
            values.push(T::lit(v));
        }
    }
    let n = ids.len();
    let values = Array2::from_shape_vec((n, d), values).map_err(|e| Error::Parse(e.to_string()))?;
    Ok((FeatureMatrix::new(values, ids)?, GroupAssignment::from_i64(&groups)?))
}

/// Reads rows keyed by `id` and returns them in the order of `ids`. Every id
/// must appear exactly once.
fn read_aligned<R: Read>(r: R, file: &str, leading: &str, ids: &[String]) -> Result<(Vec<String>, Vec<Vec<i64>>)> {
    let mut rdr = reader(r);
    let h = header(&mut rdr, file, &[leading])?;
    let pos: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut rows: Vec<Option<Vec<i64>>> = vec![None; ids.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let id = &rec[0];
        let &i = pos.get(id).ok_or_else(|| Error::UnknownId(id.to_owned()))?;
        if rows[i].is_some() {
            return Err(Error::DuplicateId(id.to_owned()));
        }
        let vals = rec
            .iter()
            .skip(1)
            .map(|f| parse_int(f, row, "value"))
            .collect::<Result<Vec<_>>>()?;
        rows[i] = Some(vals);
    }
    let rows = rows
        .into_iter()
        .zip(ids)
        .map(|(r, id)| r.ok_or_else(|| Error::UnknownId(id.clone())))
        .collect::<Result<Vec<_>>>()?;
    Ok((h[1..].to_vec(), rows))
}

/// Reads `id,lf_1,...,lf_m`, aligned to the feature ids.
pub fn read_weak<R: Read>(r: R, ids: &[String]) -> Result<WeakLabelMatrix> {
    let (names, rows) = read_aligned(r, "weak-label CSV", "id", ids)?;
    let m = names.len();
    let flat: Vec<i64> = rows.into_iter().flatten().collect();
    let votes = Array2::from_shape_vec((ids.len(), m), flat).map_err(|e| Error::Parse(e.to_string()))?;
    WeakLabelMatrix::from_i64(&votes, names)
}

/// Reads `id,y`, aligned to the feature ids.
pub fn read_labels<R: Read>(r: R, ids: &[String]) -> Result<LabelVector> {
    let (names, rows) = read_aligned(r, "label CSV", "id", ids)?;
    if names != ["y"] {
        return Err(Error::Parse("label CSV header must be id,y".into()));
    }
    let y: Vec<i64> = rows.into_iter().map(|r| r[0]).collect();
    LabelVector::from_i64(&y)
}

pub fn write_features<T: Scalar, W: Write>(w: W, x: &FeatureMatrix<T>, groups: &GroupAssignment) -> Result<()> {
    let mut wtr = writer(w);
    let mut head = vec!["id".to_owned(), "group".to_owned()];
    head.extend((1..=x.n_dims()).map(|k| format!("f{k}")));
    wtr.write_record(&head)?;
    for i in 0..x.n_rows() {
        let mut rec = vec![x.row_ids()[i].clone(), groups.group(i).to_string()];
        rec.extend(x.row(i).iter().map(|v| fmt_real(*v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_weak<W: Write>(w: W, ids: &[String], weak: &WeakLabelMatrix) -> Result<()> {
    let mut wtr = writer(w);
    let mut head = vec!["id".to_owned()];
    head.extend(weak.lf_names().iter().cloned());
    wtr.write_record(&head)?;
    for (i, id) in ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(weak.votes().row(i).iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_labels<W: Write>(w: W, ids: &[String], y: &LabelVector) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["id", "y"])?;
    for (id, v) in ids.iter().zip(y.as_slice()) {
        wtr.write_record([id.as_str(), &v.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `id,score,label` per row.
pub fn write_predictions<T: Scalar, W: Write>(
    w: W,
    ids: &[String],
    scores: &ScoreVector<T>,
    labels: &LabelVector,
) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["id", "score", "label"])?;
    for ((id, s), y) in ids.iter().zip(scores.as_slice()).zip(labels.as_slice()) {
        wtr.write_record([id.as_str(), &fmt_real(*s), &y.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `lf,group,a_hat,clamped`, one block of rows per `(group label, estimate)`.
pub fn write_accuracies<T: Scalar, W: Write>(
    w: W,
    lf_names: &[String],
    blocks: &[(&str, &AccuracyEstimate<T>)],
) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["lf", "group", "a_hat", "clamped"])?;
    for (group, est) in blocks {
        for (j, name) in lf_names.iter().enumerate() {
            wtr.write_record([
                name.as_str(),
                group,
                &fmt_real(est.per_lf[j]),
                if est.flags[j].clamped { "true" } else { "false" },
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `group,radius,cum_accuracy`.
pub fn write_center_scan<T: Scalar, W: Write>(w: W, scan: &CenterScan<T>) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["group", "radius", "cum_accuracy"])?;
    for (g, curve) in scan.curves.iter().enumerate() {
        for (r, a) in curve {
            wtr.write_record([g.to_string(), fmt_real(*r), fmt_real(*a)])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn real_format_round_trips() {
        for v in [0.1, -4.0, 1.0 / 3.0, 1e-300, 123456789.12345679] {
            let s = fmt_real(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            assert!(!s.contains(','));
        }
        assert_eq!(fmt_real(0.5f64), "5.0000000000000000e-1");
    }

    #[test]
    fn features_round_trip() {
        let x = FeatureMatrix::new(array![[0.1, -2.5], [3.0, 1e-7]], vec!["a".into(), "b".into()]).unwrap();
        let g = GroupAssignment::new(vec![1, 0]).unwrap();
        let mut buf = Vec::new();
        write_features(&mut buf, &x, &g).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("id,group,f1,f2\n"));
        let (x2, g2) = read_features::<f64, _>(buf.as_slice()).unwrap();
        assert_eq!(x2, x);
        assert_eq!(g2, g);
    }

    #[test]
    fn weak_rows_align_by_id() {
        let ids = vec!["a".to_owned(), "b".to_owned()];
        let csv = "id,lf_1,lf_2,lf_3\nb,1,-1,1\na,-1,-1,1\n";
        let w = read_weak(csv.as_bytes(), &ids).unwrap();
        assert_eq!(w.votes(), array![[-1i8, -1, 1], [1, -1, 1]]);
        assert_eq!(w.lf_names()[2], "lf_3");
    }

    #[test]
    fn weak_errors() {
        let ids = vec!["a".to_owned(), "b".to_owned()];
        assert!(matches!(
            read_weak("id,lf_1\na,1\nc,1\n".as_bytes(), &ids),
            Err(Error::UnknownId(_))
        ));
        assert!(matches!(
            read_weak("id,lf_1\na,1\na,1\n".as_bytes(), &ids),
            Err(Error::DuplicateId(_))
        ));
        assert!(matches!(
            read_weak("id,lf_1\na,1\nb,0\n".as_bytes(), &ids),
            Err(Error::InvalidVote { .. })
        ));
        assert!(matches!(read_weak("id,lf_1\na,1\n".as_bytes(), &ids), Err(Error::UnknownId(_))));
    }

    #[test]
    fn feature_errors() {
        assert!(matches!(
            read_features::<f64, _>("id,group,f1\na,0,NaN\n".as_bytes()),
            Err(Error::NonFiniteFeature { .. })
        ));
        assert!(matches!(
            read_features::<f64, _>("id,group,f1\na,2,1.0\n".as_bytes()),
            Err(Error::InvalidGroup { .. })
        ));
        assert!(matches!(
            read_features::<f64, _>("id,g,f1\na,0,1.0\n".as_bytes()),
            Err(Error::Parse(_))
        ));
        assert!(read_features::<f64, _>("id,group,f1\na,0,1.0,2.0\n".as_bytes()).is_err());
    }

    #[test]
    fn labels_round_trip() {
        let ids = vec!["x".to_owned(), "y".to_owned()];
        let y = LabelVector::new(vec![-1, 1]).unwrap();
        let mut buf = Vec::new();
        write_labels(&mut buf, &ids, &y).unwrap();
        assert_eq!(read_labels(buf.as_slice(), &ids).unwrap(), y);
    }
}
