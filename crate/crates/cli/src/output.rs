use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Formats a float with 17 significant digits.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        // keep the sign of negative zero out of diffs
        return "0.0000000000000000e0".into();
    }
    format!("{x:.16e}")
}

pub struct Csv {
    path: PathBuf,
    inner: csv::Writer<fs::File>,
}

impl Csv {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut inner =
            csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        inner.write_record(header)?;
        Ok(Self {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        self.inner
            .write_record(values.iter().map(|v| num(*v)))
            .with_context(|| format!("writing {}", self.path.display()))
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.inner.flush()?;
        Ok(self.path)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path.to_path_buf())
}

/// Reads a two-column CSV with header `T,price`.
pub fn read_curve(path: &Path) -> Result<Vec<(f64, f64)>> {
    #[derive(serde::Deserialize)]
    struct Row {
        #[serde(rename = "T")]
        maturity: f64,
        price: f64,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.with_context(|| {
            format!(
                "{}: row {} (expected columns T,price)",
                path.display(),
                i + 1
            )
        })?;
        out.push((row.maturity, row.price));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
        assert_eq!(num(-0.0), num(0.0));
    }
}
