//! Labeled observations and their CSV form.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

/// An `n × d` sample with 0-based class indices and display names per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    x: Array2<T>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl<T: Scalar> LabeledDataset<T> {
    /// Classes are named `1..=J`.
    pub fn new(x: Array2<T>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let names = (1..=num_classes).map(|j| j.to_string()).collect();
        Self::with_names(x, labels, names)
    }

    pub fn with_names(x: Array2<T>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        check_dim(x.nrows(), labels.len())?;
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_names.len()) {
            return Err(Error::InvalidLabels(format!("label {bad} out of range for {} classes", class_names.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite observation".into()));
        }
        Ok(LabeledDataset { x, labels, class_names })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn x(&self) -> ArrayView2<'_, T> {
        self.x.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.x.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_classes()];
        for &y in &self.labels {
            c[y] += 1;
        }
        c
    }

    /// Rows of each class, in dataset order.
    pub fn split_by_class(&self) -> Vec<Array2<T>> {
        (0..self.num_classes())
            .map(|j| {
                let idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == j).collect();
                self.x.select(Axis(0), &idx)
            })
            .collect()
    }

    /// For every observation, its class and its position within that class.
    pub fn class_positions(&self) -> Vec<(usize, usize)> {
        let mut seen = vec![0; self.num_classes()];
        self.labels
            .iter()
            .map(|&y| {
                let pos = seen[y];
                seen[y] += 1;
                (y, pos)
            })
            .collect()
    }

    /// Observations at `indices`, keeping all class names.
    pub fn subset(&self, indices: &[usize]) -> Self {
        LabeledDataset {
            x: self.x.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Writes `x1,...,xd,label` rows with class names as labels.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.dim()).map(|k| format!("x{k}")).collect();
        header.push("label".into());
        w.write_record(&header).map_err(csv_err)?;
        for (row, &y) in self.x.rows().into_iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(self.class_names[y].clone());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Column layout of an input table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub label_column: String,
    pub delimiter: u8,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema { label_column: "label".into(), delimiter: b',' }
    }
}

/// Parsed table plus the number of rows dropped for missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested<T> {
    pub data: LabeledDataset<T>,
    pub dropped_rows: usize,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Ingest(e.to_string())
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "na" | "NaN" | "nan" | "?")
}

/// Reads a headered table; labels become classes in order of first appearance.
pub fn read_csv<T: Scalar, R: Read>(input: R, schema: &CsvSchema) -> Result<Ingested<T>> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(schema.delimiter).from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let label_col = header
        .iter()
        .position(|h| h.trim() == schema.label_column)
        .ok_or_else(|| Error::Ingest(format!("no column named '{}'", schema.label_column)))?;
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| c != label_col).collect();
    if feature_cols.is_empty() {
        return Err(Error::Ingest("no feature columns".into()));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut dropped = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        // 1-based line number including the header
        let line = r + 2;
        if rec.len() != header.len() {
            return Err(Error::Ingest(format!("line {line}: expected {} fields, found {}", header.len(), rec.len())));
        }
        if rec.iter().any(is_missing) {
            dropped += 1;
            continue;
        }
        for &c in &feature_cols {
            let cell = rec[c].trim();
            let v: T = cell.parse().map_err(|_| {
                Error::Ingest(format!("line {line}, column '{}': non-numeric value '{cell}'", &header[c]))
            })?;
            values.push(v);
        }
        let name = rec[label_col].trim().to_string();
        let next = names.len();
        let y = *index.entry(name.clone()).or_insert_with(|| {
            names.push(name);
            next
        });
        labels.push(y);
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} rows with missing values");
    }
    if names.len() < 2 {
        return Err(Error::InvalidData(format!("need at least 2 classes, found {}", names.len())));
    }
    let x = Array2::from_shape_vec((labels.len(), feature_cols.len()), values).expect("row-major values");
    Ok(Ingested { data: LabeledDataset::with_names(x, labels, names)?, dropped_rows: dropped })
}

pub fn load_csv<T: Scalar>(path: &Path, schema: &CsvSchema) -> Result<Ingested<T>> {
    read_csv(std::fs::File::open(path)?, schema)
}

/// Reads an unlabeled headered table of query points; a column named
/// `schema.label_column`, if present, is ignored. Missing cells are an error here.
pub fn read_points<T: Scalar, R: Read>(input: R, schema: &CsvSchema) -> Result<Array2<T>> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(schema.delimiter).from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let cols: Vec<usize> = (0..header.len()).filter(|&c| header[c].trim() != schema.label_column).collect();
    if cols.is_empty() {
        return Err(Error::Ingest("no feature columns".into()));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = r + 2;
        for &c in &cols {
            let cell = rec.get(c).unwrap_or("").trim();
            let v: T = cell.parse().map_err(|_| {
                Error::Ingest(format!("line {line}, column '{}': non-numeric value '{cell}'", &header[c]))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, cols.len()), values).expect("row-major values"))
}

pub fn load_points<T: Scalar>(path: &Path, schema: &CsvSchema) -> Result<Array2<T>> {
    read_points(std::fs::File::open(path)?, schema)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn labels_follow_first_appearance() {
        let text = "x1,label\n1.0,a\n2.0,b\n3.0,a\n";
        let got = read_csv::<f64, _>(text.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(got.data.labels(), &[0, 1, 0]);
        assert_eq!(got.data.class_names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(got.dropped_rows, 0);
    }

    #[test]
    fn missing_cell_drops_row() {
        let text = "x1;x2;cls\n1;2;u\n;3;v\n4;5;v\n";
        let schema = CsvSchema { label_column: "cls".into(), delimiter: b';' };
        let got = read_csv::<f64, _>(text.as_bytes(), &schema).unwrap();
        assert_eq!(got.dropped_rows, 1);
        assert_eq!(got.data.len(), 2);
        assert_eq!(got.data.x(), array![[1.0, 2.0], [4.0, 5.0]]);
    }

    #[test]
    fn query_points_skip_the_label_column() {
        let text = "a,label,b\n1,x,2\n3,y,4\n";
        let p = read_points::<f64, _>(text.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(p, array![[1.0, 2.0], [3.0, 4.0]]);
        assert!(read_points::<f64, _>("a\nNA\n".as_bytes(), &CsvSchema::default()).is_err());
    }

    #[test]
    fn ingest_errors() {
        let bad = "x1,label\n1.0,a\nfoo,b\n";
        match read_csv::<f64, _>(bad.as_bytes(), &CsvSchema::default()) {
            Err(Error::Ingest(msg)) => assert!(msg.contains("line 3") && msg.contains("x1"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let single = "x1,label\n1.0,a\n2.0,a\n";
        assert!(matches!(read_csv::<f64, _>(single.as_bytes(), &CsvSchema::default()), Err(Error::InvalidData(_))));
        let nolabel = "x1,x2\n1,2\n";
        assert!(matches!(read_csv::<f64, _>(nolabel.as_bytes(), &CsvSchema::default()), Err(Error::Ingest(_))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let x = array![[0.1, -2.5e-17], [1.0 / 3.0, 7.0], [f64::MAX, -0.0]];
        let ds = LabeledDataset::new(x, vec![0, 1, 0], 2).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x1,x2,label\n"));
        let back = read_csv::<f64, _>(buf.as_slice(), &CsvSchema::default()).unwrap();
        assert_eq!(back.data, ds);
    }

    #[test]
    fn class_helpers() {
        let ds = LabeledDataset::new(array![[0.0], [1.0], [2.0], [3.0]], vec![1, 0, 1, 1], 2).unwrap();
        assert_eq!(ds.class_counts(), vec![1, 3]);
        assert_eq!(ds.class_positions(), vec![(1, 0), (0, 0), (1, 1), (1, 2)]);
        assert_eq!(ds.split_by_class()[1], array![[0.0], [2.0], [3.0]]);
        assert_eq!(ds.subset(&[3, 1]).labels(), &[1, 0]);
    }
}
