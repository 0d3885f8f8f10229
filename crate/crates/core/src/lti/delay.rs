use crate::error::{Error, Result};

/// Fixed-capacity FIFO: each step returns the sample pushed `capacity` steps
/// earlier (zero during warm-up).
#[derive(Debug, Clone)]
pub struct DelayLine {
    buf: Vec<f64>,
    head: usize,
}

impl DelayLine {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("delay line capacity must be positive".into()));
        }
        Ok(Self { buf: vec![0.0; capacity], head: 0 })
    }

    /// Builds a line from a signed length, rejecting non-positive values.
    pub fn with_length(length: i64) -> Result<Self> {
        if length <= 0 {
            return Err(Error::Config(format!(
                "delay line length {length} is not positive (shift budget exceeded)"
            )));
        }
        Self::new(length as usize)
    }

    pub fn capacity(&self) -> usize {
        self.buf.len()
    }

    /// The sample the next [`step`](Self::step) will return.
    pub fn oldest(&self) -> f64 {
        self.buf[self.head]
    }

    pub fn step(&mut self, sample: f64) -> f64 {
        let out = std::mem::replace(&mut self.buf[self.head], sample);
        self.head = (self.head + 1) % self.buf.len();
        out
    }

    /// Stored samples, oldest first.
    pub fn contents(&self) -> Vec<f64> {
        let (tail, front) = self.buf.split_at(self.head);
        front.iter().chain(tail).copied().collect()
    }

    pub fn clear(&mut self) {
        self.buf.iter_mut().for_each(|s| *s = 0.0);
        self.head = 0;
    }
}

pub fn delay_line_step(buffer: &mut DelayLine, new_sample: f64) -> f64 {
    buffer.step(new_sample)
}
