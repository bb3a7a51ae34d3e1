//! CSV tables with a provenance comment line.

/// Accumulates a CSV document in memory so commands stay pure.
#[derive(Debug)]
pub struct CsvTable {
    columns: Vec<&'static str>,
    writer: csv::Writer<Vec<u8>>,
}

/// Shortest round-trip representation; `nan`/`inf` spelled out.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:?}")
    }
}

impl CsvTable {
    pub fn new(columns: &[&'static str]) -> Self {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(columns).expect("write to memory");
        Self { columns: columns.to_vec(), writer }
    }

    pub fn columns(&self) -> &[&'static str] {
        &self.columns
    }

    pub fn push(&mut self, fields: &[String]) {
        assert_eq!(fields.len(), self.columns.len(), "row width");
        self.writer.write_record(fields).expect("write to memory");
    }

    pub fn render(self, version: &str, config_hash: &str, seed: u64) -> String {
        let body = self.writer.into_inner().expect("flush to memory");
        format!("# pathwise {version} config_sha256={config_hash} seed={seed}\n{}", String::from_utf8(body).expect("fields are UTF-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_header_and_escapes() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push(&["1".into(), "x,y".into()]);
        let s = t.render("0.1.0", "abc", 7);
        assert_eq!(s, "# pathwise 0.1.0 config_sha256=abc seed=7\na,b\n1,\"x,y\"\n");
    }

    #[test]
    fn float_formatting() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(fmt_f64(1.0), "1.0");
    }
}
