//! JSON artifact IO. Floats are written in scientific notation with 17
//! significant digits, enough to reconstruct the exact 64-bit value on
//! parse, so files round-trip losslessly and identical runs produce
//! identical bytes.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{CliError, Result};

/// 17 significant digits: one before the point, sixteen after.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty printer that routes every float through [`fmt_f64`].
struct SigDigitFormatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for SigDigitFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path)
        .map_err(|e| CliError::validation(format!("cannot create {}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    let formatter = SigDigitFormatter {
        inner: PrettyFormatter::new(),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut out, formatter);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
    out.write_all(b"\n")
        .and_then(|_| out.flush())
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path)
        .map_err(|e| CliError::validation(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Blob {
        values: Vec<f64>,
        count: usize,
    }

    #[test]
    fn floats_round_trip_bitwise() {
        let blob = Blob {
            values: vec![
                0.1 + 0.2,
                std::f64::consts::PI,
                1.0e-308,
                -0.0,
                1.0 / 3.0,
                6.02214076e23,
            ],
            count: 6,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("blob.json");
        write_json(&path, &blob).unwrap();
        let back: Blob = read_json(&path).unwrap();
        assert_eq!(blob.count, back.count);
        for (a, b) in blob.values.iter().zip(&back.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("3.1415926535897931e0"));
    }

    #[test]
    fn fmt_f64_parses_back_exactly() {
        for &v in &[37.0, 1.0e-12, 2.2250738585072014e-308, 9.9e307] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
