use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random-phase multisine on the DFT grid of one period.
#[derive(Debug, Clone, PartialEq)]
pub struct MultisineSpec {
    pub period_samples: usize,
    /// excited DFT bins, strictly increasing, each in `1..=period_samples/2`
    pub bins: Vec<usize>,
    /// mbar
    pub rms_amplitude: f64,
    pub discard_periods: usize,
    pub record_periods: usize,
    pub seed: u64,
}

impl MultisineSpec {
    /// 40 log-spaced bins between 0.5 and 100 Hz, 8 s period, 1 mbar RMS.
    pub fn log_spaced(sample_time: f64) -> Self {
        let period = (8.0 / sample_time).round() as usize;
        let df = 1.0 / (period as f64 * sample_time);
        let (lo, hi, count) = (0.5f64, 100.0f64, 40);
        let mut bins: Vec<usize> = Vec::with_capacity(count);
        for i in 0..count {
            let f = lo * (hi / lo).powf(i as f64 / (count - 1) as f64);
            let mut b = ((f / df).round() as usize).max(1);
            if let Some(&prev) = bins.last() {
                b = b.max(prev + 1);
            }
            bins.push(b.min(period / 2));
        }
        bins.dedup();
        Self { period_samples: period, bins, ..Self::base() }
    }

    /// Every bin from the lowest up to Nyquist.
    pub fn full_band(sample_time: f64) -> Self {
        let period = (8.0 / sample_time).round() as usize;
        Self { period_samples: period, bins: (1..=period / 2).collect(), ..Self::base() }
    }

    fn base() -> Self {
        Self {
            period_samples: 0,
            bins: Vec::new(),
            rms_amplitude: 1.0,
            discard_periods: 5,
            record_periods: 10,
            seed: 1,
        }
    }

    pub fn frequencies_hz(&self, sample_time: f64) -> Vec<f64> {
        let df = 1.0 / (self.period_samples as f64 * sample_time);
        self.bins.iter().map(|&b| b as f64 * df).collect()
    }

    pub fn total_samples(&self) -> usize {
        self.period_samples * (self.discard_periods + self.record_periods)
    }

    pub fn validate(&self) -> Result<()> {
        if self.period_samples < 2 {
            return Err(Error::Config("multisine period must be at least 2 samples".into()));
        }
        if self.bins.is_empty() {
            return Err(Error::Config("multisine has no excited bins".into()));
        }
        if self.bins.windows(2).any(|w| w[1] <= w[0])
            || self.bins[0] == 0
            || *self.bins.last().unwrap() > self.period_samples / 2
        {
            return Err(Error::Config("multisine bins must be increasing within 1..=P/2".into()));
        }
        if !(self.rms_amplitude > 0.0 && self.rms_amplitude.is_finite()) {
            return Err(Error::Config(format!(
                "excitation amplitude must be positive, got {}",
                self.rms_amplitude
            )));
        }
        if self.record_periods == 0 {
            return Err(Error::Config("at least one period must be recorded".into()));
        }
        Ok(())
    }

    /// One period of the excitation, scaled to the requested RMS.
    pub fn period(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let p = self.period_samples;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let tau = std::f64::consts::TAU;
        let components: Vec<(usize, f64)> = self
            .bins
            .iter()
            .map(|&b| {
                let phase = rng.random::<f64>() * tau;
                // a Nyquist cosine only survives with zero phase
                (b, if 2 * b == p { 0.0 } else { phase })
            })
            .collect();
        let mut x: Vec<f64> = (0..p)
            .map(|k| {
                components
                    .iter()
                    .map(|&(b, ph)| (tau * ((b * k) % p) as f64 / p as f64 + ph).cos())
                    .sum()
            })
            .collect();
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / p as f64).sqrt();
        let scale = self.rms_amplitude / rms;
        x.iter_mut().for_each(|v| *v *= scale);
        Ok(x)
    }
}
