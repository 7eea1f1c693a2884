use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::geometry::domain::Region;
use crate::geometry::sampling::PointBatch;
use crate::scalar::Scalar;

/// Formats a real with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `x0,...,x{d-1},element,region`; a missing element is left empty.
pub fn write_points_csv<T: Scalar, W: Write>(batch: &PointBatch<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..batch.dim()).map(|i| format!("x{i}")).collect();
    header.push("element".into());
    header.push("region".into());
    w.write_record(&header)?;
    for (i, x) in batch.points().enumerate() {
        let mut rec: Vec<String> = x.iter().map(|v| fmt_real(v.to_f64_lossy())).collect();
        rec.push(
            batch.elements()[i]
                .map(|e| e.to_string())
                .unwrap_or_default(),
        );
        rec.push(batch.regions()[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a batch written by [`write_points_csv`]. The allocation is not
/// stored and comes back empty.
pub fn read_points_csv<T: Scalar, R: Read>(input: R) -> Result<PointBatch<T>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let n = header.len();
    if n < 3 || &header[n - 2] != "element" || &header[n - 1] != "region" {
        return Err(Error::Parse(
            "point CSV header must end with element,region".into(),
        ));
    }
    let d = n - 2;
    for (i, h) in header.iter().take(d).enumerate() {
        if h != format!("x{i}") {
            return Err(Error::Parse(format!("unexpected column {h:?}, want x{i}")));
        }
    }
    let mut batch = PointBatch::new(d);
    let mut x = vec![T::zero(); d];
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Parse(format!("row {}: bad {what}", line + 2));
        for a in 0..d {
            let v: f64 = rec[a].trim().parse().map_err(|_| bad("coordinate"))?;
            x[a] = T::lit(v);
        }
        let e = match rec[d].trim() {
            "" => None,
            s => Some(s.parse().map_err(|_| bad("element"))?),
        };
        let region: Region = rec[d + 1].trim().parse()?;
        batch.push(&x, e, region);
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{partition_uniform, rng_for, sample_eas, Allocation, Domain};

    #[test]
    fn csv_roundtrip_is_exact() {
        let p = partition_uniform(&Domain::<f64>::unit(2), &[3, 3]).unwrap();
        let b = sample_eas(&p, &Allocation::PerElement(2), false, &mut rng_for(11, 0)).unwrap();
        let mut buf = Vec::new();
        write_points_csv(&b, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x0,x1,element,region\n"));
        let back: PointBatch<f64> = read_points_csv(&buf[..]).unwrap();
        assert_eq!(back.coords(), b.coords());
        assert_eq!(back.elements(), b.elements());
        assert_eq!(back.regions(), b.regions());
    }

    #[test]
    fn rejects_bad_header() {
        assert!(read_points_csv::<f64, _>(&b"a,b\n1,2\n"[..]).is_err());
    }
}
