use serde::{Deserialize, Serialize};

use super::{Peak, Spectrum};
use crate::rng::{self, SpecRng};
use crate::{Error, Result};

/// Gaps inside this closed interval count toward the gap-signal fraction.
pub const GAP_SIGNAL_RANGE: (f64, f64) = (13.5, 14.5);
/// Background gaps are drawn uniformly from this interval.
pub const GAP_BACKGROUND_RANGE: (f64, f64) = (20.0, 80.0);
/// The first peak is drawn uniformly from this interval.
pub const FIRST_PEAK_RANGE: (f64, f64) = (50.0, 100.0);
/// Offset of the precursor above the largest fragment peak.
pub const PRECURSOR_OFFSET_RANGE: (f64, f64) = (20.0, 80.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_spectra: usize,
    pub peaks_min: usize,
    pub peaks_max: usize,
    pub mz_max: f64,
    pub gap_signal_prob: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 0,
            n_spectra: 100,
            peaks_min: 5,
            peaks_max: 60,
            mz_max: 5_000.0,
            gap_signal_prob: 0.5,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.peaks_min < 2 || self.peaks_min > self.peaks_max {
            return Err(Error::Config(format!(
                "synthetic peak bounds need 2 <= peaks_min <= peaks_max, got {}..{}",
                self.peaks_min, self.peaks_max
            )));
        }
        if !(0.0..=1.0).contains(&self.gap_signal_prob) {
            return Err(Error::Config(format!(
                "gap_signal_prob {} outside [0, 1]",
                self.gap_signal_prob
            )));
        }
        let worst = FIRST_PEAK_RANGE.1
            + (self.peaks_max - 1) as f64 * GAP_BACKGROUND_RANGE.1
            + PRECURSOR_OFFSET_RANGE.1;
        if !(self.mz_max.is_finite() && worst <= self.mz_max) {
            return Err(Error::Config(format!(
                "mz_max {} cannot hold {} peaks (needs >= {worst})",
                self.mz_max, self.peaks_max
            )));
        }
        Ok(())
    }
}

/// Ground-truth label: `0.5 * H_norm + 0.5 * f_gap`.
///
/// `H_norm` is the Shannon entropy of the intensity distribution divided by
/// `ln(n)`; `f_gap` is the fraction of consecutive m/z gaps inside
/// [`GAP_SIGNAL_RANGE`]. Peaks must be sorted by m/z and number at least 2.
pub fn synthetic_label(peaks: &[Peak]) -> f64 {
    let n = peaks.len();
    assert!(n >= 2, "synthetic label needs at least two peaks");
    let total: f64 = peaks.iter().map(|p| p.intensity).sum();
    let entropy: f64 = peaks
        .iter()
        .map(|p| p.intensity / total)
        .filter(|&q| q > 0.0)
        .map(|q| -q * q.ln())
        .sum();
    let h_norm = (entropy / (n as f64).ln()).clamp(0.0, 1.0);

    let (lo, hi) = GAP_SIGNAL_RANGE;
    let hits = peaks
        .windows(2)
        .filter(|w| {
            let gap = w[1].mz - w[0].mz;
            (lo..=hi).contains(&gap)
        })
        .count();
    let f_gap = hits as f64 / (n - 1) as f64;

    0.5 * h_norm + 0.5 * f_gap
}

/// Deterministic labeled dataset. Spectra are drawn one after another from a
/// single stream, so a longer run extends a shorter one with the same seed.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Vec<Spectrum>> {
    config.validate()?;
    let mut rng = rng::seeded(config.seed);
    Ok((0..config.n_spectra)
        .map(|i| draw_spectrum(config, i, &mut rng))
        .collect())
}

fn draw_spectrum(config: &SyntheticConfig, index: usize, rng: &mut SpecRng) -> Spectrum {
    let n = rng::uniform_int(rng, config.peaks_min, config.peaks_max);
    let mut mz = rng::uniform(rng, FIRST_PEAK_RANGE.0, FIRST_PEAK_RANGE.1);
    let mut positions = Vec::with_capacity(n);
    positions.push(mz);
    for _ in 1..n {
        let gap = if rng::unit(rng) < config.gap_signal_prob {
            rng::uniform(rng, GAP_SIGNAL_RANGE.0, GAP_SIGNAL_RANGE.1)
        } else {
            rng::uniform(rng, GAP_BACKGROUND_RANGE.0, GAP_BACKGROUND_RANGE.1)
        };
        mz += gap;
        positions.push(mz);
    }
    let peaks: Vec<Peak> = positions
        .into_iter()
        .map(|mz| Peak::new(mz, 1.0 - rng::unit(rng)))
        .collect();
    let precursor_mz = mz + rng::uniform(rng, PRECURSOR_OFFSET_RANGE.0, PRECURSOR_OFFSET_RANGE.1);
    let label = synthetic_label(&peaks);
    Spectrum {
        id: format!("syn{index:06}"),
        precursor_mz,
        peaks,
        label: Some(label),
    }
}
