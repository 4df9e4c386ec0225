//! Long-format CSV ingestion and emission.
//!
//! Layout: header `cluster,unit,y,x1,...,xp`, one row per observation. Clusters
//! keep their order of first appearance; rows inside a cluster are ordered by
//! `unit`.

use std::io::{Read, Write};

use indexmap_lite::OrderedGroups;
use nalgebra::{DMatrix, DVector};

use crate::model::{ClusterData, Dataset};
use crate::{Error, Result};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(line: u64, message: impl Into<String>) -> Error {
    Error::Csv {
        line,
        message: message.into(),
    }
}

fn line_of(err: &csv::Error) -> u64 {
    err.position().map(|p| p.line()).unwrap_or(0)
}

/// Parses a long-format dataset.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| csv_err(line_of(&e), e.to_string()))?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 4 || cols[0] != "cluster" || cols[1] != "unit" || cols[2] != "y" {
        return Err(csv_err(
            1,
            "header must be cluster,unit,y,x1,...,xp with at least one covariate",
        ));
    }
    let names: Vec<String> = cols[3..].iter().map(|s| s.to_string()).collect();
    let p = names.len();

    let mut groups: OrderedGroups<(i64, u64, f64, Vec<f64>)> = OrderedGroups::default();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(line_of(&e), e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let unit: i64 = rec[1]
            .parse()
            .map_err(|_| csv_err(line, format!("unit {:?} is not an integer", &rec[1])))?;
        let parse = |s: &str, what: &str| -> Result<f64> {
            let v: f64 = s
                .parse()
                .map_err(|_| csv_err(line, format!("{what} {s:?} is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(csv_err(line, format!("{what} {s:?} is not finite")))
            }
        };
        let y = parse(&rec[2], "y")?;
        let x = (0..p)
            .map(|j| parse(&rec[3 + j], &names[j]))
            .collect::<Result<Vec<_>>>()?;
        groups.push(&rec[0], (unit, line, y, x));
    }
    if groups.is_empty() {
        return Err(csv_err(2, "no data rows"));
    }

    let mut clusters = Vec::with_capacity(groups.len());
    for (id, mut rows) in groups.into_groups() {
        rows.sort_by_key(|r| r.0);
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(csv_err(
                w[1].1,
                format!("duplicate unit {} in cluster {id:?}", w[1].0),
            ));
        }
        let n = rows.len();
        let y = DVector::from_iterator(n, rows.iter().map(|r| r.2));
        let x = DMatrix::from_fn(n, p, |i, j| rows[i].3[j]);
        clusters.push(ClusterData::new(id, y, x)?);
    }
    Dataset::new(clusters, names)
}

/// Writes a dataset in long format. Units are numbered from 1.
pub fn write_dataset<W: Write>(data: &Dataset, mut w: W) -> std::io::Result<()> {
    write!(w, "cluster,unit,y")?;
    for name in data.covariate_names() {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    for cl in data.clusters() {
        for i in 0..cl.len() {
            write!(w, "{},{},{}", cl.id, i + 1, fmt_f64(cl.y[i]))?;
            for j in 0..cl.x.ncols() {
                write!(w, ",{}", fmt_f64(cl.x[(i, j)]))?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

mod indexmap_lite {
    use std::collections::HashMap;

    /// Groups values by key, remembering first-seen key order.
    pub struct OrderedGroups<T> {
        index: HashMap<String, usize>,
        groups: Vec<(String, Vec<T>)>,
    }

    impl<T> Default for OrderedGroups<T> {
        fn default() -> Self {
            Self {
                index: HashMap::new(),
                groups: Vec::new(),
            }
        }
    }

    impl<T> OrderedGroups<T> {
        pub fn push(&mut self, key: &str, value: T) {
            let idx = *self.index.entry(key.to_string()).or_insert_with(|| {
                self.groups.push((key.to_string(), Vec::new()));
                self.groups.len() - 1
            });
            self.groups[idx].1.push(value);
        }

        pub fn len(&self) -> usize {
            self.groups.len()
        }

        pub fn is_empty(&self) -> bool {
            self.groups.is_empty()
        }

        pub fn into_groups(self) -> Vec<(String, Vec<T>)> {
            self.groups
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_orders_by_unit() {
        let text = "cluster,unit,y,x1\r\nb,2,4.5,1\r\na,1,1,1\r\nb,1,3,1\r\na,2,2,1\r\n";
        let data = read_dataset(text.as_bytes()).unwrap();
        assert_eq!(data.n_clusters(), 2);
        assert_eq!(data.clusters()[0].id, "b");
        assert_eq!(data.clusters()[0].y.as_slice(), &[3.0, 4.5]);
        assert_eq!(data.clusters()[1].y.as_slice(), &[1.0, 2.0]);
        assert!(data.is_intercept_only());
    }

    #[test]
    fn short_row_reports_line() {
        let text = "cluster,unit,y,x1\na,1,1,1\na,2,2\n";
        match read_dataset(text.as_bytes()) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_number_and_header() {
        let text = "cluster,unit,y,x1\na,1,oops,1\n";
        assert!(matches!(
            read_dataset(text.as_bytes()),
            Err(Error::Csv { line: 2, .. })
        ));
        assert!(read_dataset("id,unit,y,x1\na,1,1,1\n".as_bytes()).is_err());
        let dup = "cluster,unit,y,x1\na,1,1,1\na,1,2,1\n";
        assert!(matches!(
            read_dataset(dup.as_bytes()),
            Err(Error::Csv { line: 3, .. })
        ));
    }

    #[test]
    fn write_then_read_is_exact() {
        let data = Dataset::intercept_only(vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-8]]).unwrap();
        let mut buf = Vec::new();
        write_dataset(&data, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(back, data);
    }
}
