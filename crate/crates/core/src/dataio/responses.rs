use std::collections::HashSet;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Binary correctness of each model (row) on each item (column).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseMatrix {
    model_names: Vec<String>,
    values: Array2<u8>,
}

impl ResponseMatrix {
    pub fn new(model_names: Vec<String>, values: Array2<u8>) -> Result<Self> {
        if model_names.len() != values.nrows() {
            return Err(Error::InvalidArgument(format!(
                "{} model names for {} rows",
                model_names.len(),
                values.nrows()
            )));
        }
        let mut seen = HashSet::new();
        for name in &model_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateModel(name.clone()));
            }
        }
        if let Some(((row, column), v)) = values.indexed_iter().find(|(_, v)| **v > 1) {
            return Err(Error::NonBinary {
                row,
                column,
                value: v.to_string(),
            });
        }
        Ok(Self {
            model_names,
            values,
        })
    }

    pub fn model_names(&self) -> &[String] {
        &self.model_names
    }

    pub fn num_models(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_items(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<u8> {
        &self.values
    }

    pub fn row(&self, model: usize) -> ArrayView1<'_, u8> {
        self.values.row(model)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.model_names.iter().position(|n| n == name)
    }

    pub fn row_by_name(&self, name: &str) -> Result<ArrayView1<'_, u8>> {
        self.index_of(name)
            .map(|m| self.row(m))
            .ok_or_else(|| Error::UnknownModel(name.to_string()))
    }

    /// Fraction of items model `model` answers correctly.
    pub fn accuracy(&self, model: usize) -> f64 {
        let correct: u64 = self.row(model).iter().map(|&v| v as u64).sum();
        correct as f64 / self.num_items() as f64
    }

    /// Keeps only the named models, in the order given.
    pub fn select(&self, names: &[impl AsRef<str>]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.index_of(n.as_ref())
                    .ok_or_else(|| Error::UnknownModel(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            idx.iter().map(|&i| self.model_names[i].clone()).collect(),
            self.values.select(Axis(0), &idx),
        )
    }

    /// Reads `model,i0,i1,...` CSV.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        if header.get(0) != Some("model") {
            return Err(Error::format(path, "first header column must be `model`"));
        }
        let num_items = header.len() - 1;

        let mut names = Vec::new();
        let mut cells = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| csv_error(path, e))?;
            if record.len() != num_items + 1 {
                return Err(Error::RaggedRow {
                    row,
                    expected: num_items + 1,
                    found: record.len(),
                });
            }
            names.push(record[0].to_string());
            for (column, cell) in record.iter().skip(1).enumerate() {
                let v = match cell.trim() {
                    "0" => 0u8,
                    "1" => 1u8,
                    other => {
                        return Err(Error::NonBinary {
                            row,
                            column,
                            value: other.to_string(),
                        })
                    }
                };
                cells.push(v);
            }
        }
        let values = Array2::from_shape_vec((names.len(), num_items), cells)
            .expect("row lengths checked");
        Self::new(names, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header = vec!["model".to_string()];
        header.extend((0..self.num_items()).map(|i| format!("i{i}")));
        writer.write_record(&header).map_err(|e| csv_error(path, e))?;
        for (name, row) in self.model_names.iter().zip(self.values.rows()) {
            let mut record = vec![name.clone()];
            record.extend(row.iter().map(|v| v.to_string()));
            writer.write_record(&record).map_err(|e| csv_error(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::format(path, e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, text: &str) -> std::path::PathBuf {
        let p = dir.join("responses.csv");
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn parses_three_by_four() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "model,i0,i1,i2,i3\na,0,1,1,0\nb,1,1,1,1\nc,0,0,0,0\n",
        );
        let r = ResponseMatrix::load(&p).unwrap();
        assert_eq!(r.values().dim(), (3, 4));
        assert_eq!(r.accuracy(0), 0.5);
        assert_eq!(r.row_by_name("b").unwrap().sum(), 4);
    }

    #[test]
    fn fractional_cell_rejected_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "model,i0,i1\na,0,1\nb,1,0.5\n");
        match ResponseMatrix::load(&p) {
            Err(Error::NonBinary { row, column, value }) => {
                assert_eq!((row, column, value.as_str()), (1, 1, "0.5"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_name_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "model,i0\na,0\na,1\n");
        assert!(matches!(ResponseMatrix::load(&p), Err(Error::DuplicateModel(n)) if n == "a"));
    }

    #[test]
    fn ragged_row_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "model,i0,i1\na,0,1\nb,1\n");
        assert!(matches!(
            ResponseMatrix::load(&p),
            Err(Error::RaggedRow { row: 1, expected: 3, found: 2 })
        ));
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let r = ResponseMatrix::new(
            vec!["x".into(), "y".into()],
            Array2::from_shape_vec((2, 3), vec![1, 0, 1, 0, 0, 1]).unwrap(),
        )
        .unwrap();
        let p = dir.path().join("r.csv");
        r.save(&p).unwrap();
        assert_eq!(ResponseMatrix::load(&p).unwrap(), r);
        assert!(fs::read_to_string(&p).unwrap().starts_with("model,i0,i1,i2\n"));
    }
}
