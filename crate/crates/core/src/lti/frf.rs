use super::{check_frequency, rad_per_sample};
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::path::Path;

/// Complex response sampled on a strictly increasing grid in `(0, Nyquist]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    frequencies_hz: Vec<f64>,
    values: Vec<Complex64>,
    sample_time: f64,
}

impl FrequencyResponse {
    pub fn new(frequencies_hz: Vec<f64>, values: Vec<Complex64>, sample_time: f64) -> Result<Self> {
        if frequencies_hz.len() != values.len() {
            return Err(Error::Config(format!(
                "{} frequencies but {} values",
                frequencies_hz.len(),
                values.len()
            )));
        }
        if !(sample_time > 0.0) {
            return Err(Error::Config("sample time must be positive".into()));
        }
        for &f in &frequencies_hz {
            if f <= 0.0 {
                return Err(Error::Domain(format!("grid frequency {f} Hz is not positive")));
            }
            check_frequency(f, sample_time)?;
        }
        if frequencies_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("frequency grid is not strictly increasing".into()));
        }
        Ok(Self { frequencies_hz, values, sample_time })
    }

    pub fn frequencies_hz(&self) -> &[f64] {
        &self.frequencies_hz
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn omega(&self, index: usize) -> f64 {
        rad_per_sample(self.frequencies_hz[index], self.sample_time)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.frequencies_hz.iter().copied().zip(self.values.iter().copied())
    }

    /// Restriction to `lo ≤ f ≤ hi`.
    pub fn band(&self, lo_hz: f64, hi_hz: f64) -> Self {
        let (f, v) = self.iter().filter(|(f, _)| *f >= lo_hz && *f <= hi_hz).unzip();
        Self { frequencies_hz: f, values: v, sample_time: self.sample_time }
    }

    /// Highest grid frequency reaches Nyquist (within half a grid step).
    pub fn reaches_nyquist(&self) -> bool {
        let nyq = super::nyquist_hz(self.sample_time);
        match self.frequencies_hz.as_slice() {
            [] => false,
            [only] => (*only - nyq).abs() <= 1e-9 * nyq,
            [.., a, b] => nyq - *b <= 0.5 * (b - a) + 1e-9 * nyq,
        }
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.sample_time == other.sample_time && self.frequencies_hz == other.frequencies_hz
    }

    pub fn map(&self, mut f: impl FnMut(f64, Complex64) -> Complex64) -> Self {
        Self {
            values: self.iter().map(|(hz, v)| f(hz, v)).collect(),
            ..self.clone()
        }
    }

    /// Writes `frequency_hz,real,imag` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["frequency_hz", "real", "imag"]).map_err(csv_err)?;
        for (f, v) in self.iter() {
            w.write_record([f.to_string(), v.re.to_string(), v.im.to_string()])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, sample_time: f64) -> Result<Self> {
        let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let mut freqs = Vec::new();
        let mut vals = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::parse(path, format!("row {}: bad column {i}", line + 2)))
            };
            freqs.push(field(0)?);
            vals.push(Complex64::new(field(1)?, field(2)?));
        }
        Self::new(freqs, vals, sample_time)
    }
}
