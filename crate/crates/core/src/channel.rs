//! Finite channel-gain alphabets.
//!
//! A [`FiniteChannel`] is a strictly ascending list of power gains together
//! with a probability mass function. Both hops of the relay link use one.

use crate::error::{Error, Result};

/// Tolerance on `|sum(pmf) - 1|` accepted by [`FiniteChannel::from_table`].
pub const PMF_SUM_TOLERANCE: f64 = 1e-9;

/// Finite fading-gain alphabet with its probability mass function.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChannel {
    gains: Vec<f64>,
    pmf: Vec<f64>,
    // tail[i] = sum of pmf[i..]; tail[len] = 0
    tail: Vec<f64>,
}

impl FiniteChannel {
    /// Validates an arbitrary table of gains and probabilities.
    ///
    /// The pmf is renormalized when its sum is within [`PMF_SUM_TOLERANCE`]
    /// of one and rejected otherwise.
    pub fn from_table(gains: Vec<f64>, pmf: Vec<f64>) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::InvalidArgument("channel needs at least one state".into()));
        }
        if gains.len() != pmf.len() {
            return Err(Error::InvalidArgument(format!(
                "{} gains but {} probabilities",
                gains.len(),
                pmf.len()
            )));
        }
        for (i, &g) in gains.iter().enumerate() {
            if !g.is_finite() || g < 0.0 || (i > 0 && g <= gains[i - 1]) {
                return Err(Error::ChannelOrdering { index: i });
            }
        }
        for (i, &p) in pmf.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::ChannelProbability { index: i, value: p });
            }
        }
        let sum: f64 = pmf.iter().sum();
        if (sum - 1.0).abs() > PMF_SUM_TOLERANCE {
            return Err(Error::PmfSum { sum });
        }
        let pmf = pmf.into_iter().map(|p| p / sum).collect();
        Ok(Self::assemble(gains, pmf))
    }

    /// Equiprobable quantization of a unit-mean exponential power gain
    /// (unit-mean Rayleigh fading) into `n_states` bins.
    ///
    /// Bin `i` spans the `i/n` to `(i+1)/n` quantiles and is represented by
    /// the conditional mean of the distribution on that bin, so the
    /// quantized alphabet keeps the unit mean.
    pub fn equiprobable_exponential(n_states: usize) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::InvalidArgument("n_states must be positive".into()));
        }
        let n = n_states as f64;
        let edge = |i: usize| -> f64 { -(-(i as f64) / n).ln_1p() };
        let mut gains = Vec::with_capacity(n_states);
        for i in 0..n_states {
            let a = edge(i);
            // survival probabilities at the bin edges are exactly 1 - i/n
            let surv_a = 1.0 - i as f64 / n;
            let g = if i + 1 == n_states {
                a + 1.0
            } else {
                let b = edge(i + 1);
                let surv_b = 1.0 - (i + 1) as f64 / n;
                ((a + 1.0) * surv_a - (b + 1.0) * surv_b) * n
            };
            gains.push(g);
        }
        Ok(Self::assemble(gains, vec![1.0 / n; n_states]))
    }

    fn assemble(gains: Vec<f64>, pmf: Vec<f64>) -> Self {
        let mut tail = vec![0.0; pmf.len() + 1];
        for i in (0..pmf.len()).rev() {
            tail[i] = (tail[i + 1] + pmf[i]).min(1.0);
        }
        Self { gains, pmf, tail }
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Number of channel states.
    pub fn count(&self) -> usize {
        self.gains.len()
    }

    pub fn gain(&self, index: usize) -> f64 {
        self.gains[index]
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.pmf[index]
    }

    /// Largest gain of the alphabet.
    pub fn max_gain(&self) -> f64 {
        *self.gains.last().expect("channel is never empty")
    }

    /// `Pr(gain >= threshold)`.
    pub fn tail_probability(&self, threshold: f64) -> f64 {
        let first = self.gains.partition_point(|&g| g < threshold);
        self.tail[first]
    }

    /// Mean gain `sum(pmf * gains)`.
    pub fn mean(&self) -> f64 {
        self.gains.iter().zip(&self.pmf).map(|(g, p)| g * p).sum()
    }

    /// Quantization edges of [`FiniteChannel::equiprobable_exponential`]:
    /// `-ln(1 - i/n)` for `i = 0..n`, the last one infinite.
    pub fn exponential_edges(n_states: usize) -> Vec<f64> {
        let n = n_states as f64;
        (0..=n_states)
            .map(|i| if i == n_states { f64::INFINITY } else { -(-(i as f64) / n).ln_1p() })
            .collect()
    }

    /// Writes the alphabet as CSV with header `index,gain,probability`
    /// (1-based index).
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "gain", "probability"])?;
        for (i, (g, p)) in self.gains.iter().zip(&self.pmf).enumerate() {
            w.write_record([(i + 1).to_string(), format!("{g:e}"), format!("{p:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}
