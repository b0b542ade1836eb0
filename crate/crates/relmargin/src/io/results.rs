//! Result tables: named columns, stringly-typed rows, and a CSV writer
//! that prefixes `#`-commented configuration lines so every output file is
//! self-describing.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    /// Written as `# ...` lines ahead of the header.
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ResultTable {
    pub fn new(columns: Vec<String>) -> Self {
        ResultTable { comments: Vec::new(), columns, rows: Vec::new() }
    }

    pub fn push_comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn push_row(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                got: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    /// Renders comments, header, and rows as CSV text (UTF-8, LF).
    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
        writer
            .write_record(&self.columns)
            .map_err(|e| Error::Parse(format!("csv write: {e}")))?;
        for row in &self.rows {
            writer
                .write_record(row)
                .map_err(|e| Error::Parse(format!("csv write: {e}")))?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::Parse(format!("csv flush: {e}")))?;
        out.push_str(&String::from_utf8(bytes).expect("csv output is UTF-8"));
        Ok(out)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_writes_header_only() {
        let table = ResultTable::new(vec!["c".into(), "r".into(), "ba".into()]);
        assert_eq!(table.to_csv_string().unwrap(), "c,r,ba\n");
    }

    #[test]
    fn comments_precede_the_header() {
        let mut table = ResultTable::new(vec!["value".into()]);
        table.push_comment("metric = ba");
        table.push_comment("folds = 5");
        table.push_row(vec!["0.75".into()]).unwrap();
        assert_eq!(
            table.to_csv_string().unwrap(),
            "# metric = ba\n# folds = 5\nvalue\n0.75\n"
        );
    }

    #[test]
    fn cells_with_delimiters_are_quoted() {
        let mut table = ResultTable::new(vec!["tag".into()]);
        table.push_row(vec!["a,b".into()]).unwrap();
        assert_eq!(table.to_csv_string().unwrap(), "tag\n\"a,b\"\n");
    }

    #[test]
    fn row_arity_is_enforced() {
        let mut table = ResultTable::new(vec!["a".into(), "b".into()]);
        assert!(table.push_row(vec!["1".into()]).is_err());
        assert!(table.push_row(vec!["1".into(), "2".into()]).is_ok());
    }

    #[test]
    fn write_reaches_the_filesystem() {
        let mut table = ResultTable::new(vec!["a".into()]);
        table.push_comment("seed = 1");
        table.push_row(vec!["3.5".into()]).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        table.write(f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert_eq!(text, "# seed = 1\na\n3.5\n");
    }
}
