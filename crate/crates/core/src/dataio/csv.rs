//! Precomputed-feature ingestion: comma-separated reals, one sample per
//! row, optionally with a trailing integer label column.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

pub fn load_csv_features(path: &Path, labeled: bool) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let lines: Vec<&str> = text.lines().collect();
    // blank lines are tolerated only at the end of the file
    let mut end = lines.len();
    while end > 0 && lines[end - 1].trim().is_empty() {
        end -= 1;
    }
    if end == 0 {
        return Err(Error::Format(format!("{}: empty file", path.display())));
    }

    let mut dim = 0usize;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in lines[..end].iter().enumerate() {
        if line.trim().is_empty() {
            return Err(Error::Format(format!(
                "{}: blank line {} before end of file",
                path.display(),
                lineno + 1
            )));
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let n_feat = if labeled { cells.len() - 1 } else { cells.len() };
        if labeled && cells.len() < 2 {
            return Err(Error::Format(format!(
                "{}: line {} has no room for features plus a label",
                path.display(),
                lineno + 1
            )));
        }
        if lineno == 0 {
            dim = n_feat;
        } else if n_feat != dim {
            return Err(Error::Format(format!(
                "{}: line {} has {} feature cells, expected {}",
                path.display(),
                lineno + 1,
                n_feat,
                dim
            )));
        }
        for cell in &cells[..n_feat] {
            let v: f64 = cell.parse().map_err(|_| {
                Error::Parse(format!(
                    "{}: line {}: not a number: {cell:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            features.push(v);
        }
        if labeled {
            let cell = cells[n_feat];
            let l: usize = cell.parse().map_err(|_| {
                Error::Parse(format!(
                    "{}: line {}: not an integer label: {cell:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            labels.push(Some(l));
        } else {
            labels.push(None);
        }
    }
    Dataset::from_parts(dim, features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        fs::write(&path, content).unwrap();
        (dir, path)
    }

    #[test]
    fn three_labeled_rows() {
        let (_d, path) = write("1.0,2.0,3.0,4.0,0\n0.5,0.5,0.5,0.5,1\n0,0,0,0,2\n");
        let ds = load_csv_features(&path, true).unwrap();
        assert_eq!(ds.dim(), 4);
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.label_of(2), Some(2));
        assert_eq!(ds.n_classes(), 3);
    }

    #[test]
    fn empty_file_errors() {
        let (_d, path) = write("");
        assert!(matches!(
            load_csv_features(&path, false),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn trailing_blank_line_ignored() {
        let (_d, path) = write("1,2\n3,4\n\n");
        let ds = load_csv_features(&path, false).unwrap();
        assert_eq!(ds.n(), 2);
    }

    #[test]
    fn ragged_rows_error() {
        let (_d, path) = write("1,2,3\n4,5\n");
        assert!(matches!(
            load_csv_features(&path, false),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn non_numeric_cell_errors() {
        let (_d, path) = write("1,2\n3,abc\n");
        assert!(matches!(
            load_csv_features(&path, false),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn unlabeled_load_keeps_all_columns_as_features() {
        let (_d, path) = write("1,2,3\n4,5,6\n");
        let ds = load_csv_features(&path, false).unwrap();
        assert_eq!(ds.dim(), 3);
        assert_eq!(ds.label_of(0), None);
    }
}
