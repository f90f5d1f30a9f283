//! Measurement chain: zero-phase band-pass, Hilbert envelope, spectral
//! maps and the mean-intensity feature.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: f64 = 1e6;
pub const DEFAULT_RECORD_LENGTH: usize = 1000;
pub const DEFAULT_BAND: (f64, f64) = (47e3, 57e3);
pub const MIN_TRACE_LENGTH: usize = 64;
/// Order of the analog low-pass prototype; the band-pass is twice this.
const PROTOTYPE_ORDER: usize = 2;

/// Measurement-chain block of the JSON configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspConfig {
    /// Band-pass edges, Hz.
    pub band_hz: (f64, f64),
}

impl Default for DspConfig {
    fn default() -> Self {
        DspConfig {
            band_hz: DEFAULT_BAND,
        }
    }
}

impl DspConfig {
    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        BandPass::design(self.band_hz.0, self.band_hz.1, sample_rate).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTrace {
    pub samples: Vec<f64>,
    /// Hz.
    pub sample_rate: f64,
    /// Time of the first sample, s.
    pub t0: f64,
}

impl SignalTrace {
    pub fn new(samples: Vec<f64>, sample_rate: f64, t0: f64) -> Result<Self> {
        let trace = SignalTrace {
            samples,
            sample_rate,
            t0,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::domain(format!(
                "sample rate must be > 0, got {}",
                self.sample_rate
            )));
        }
        if self.samples.len() < MIN_TRACE_LENGTH {
            return Err(Error::domain(format!(
                "trace needs at least {MIN_TRACE_LENGTH} samples, got {}",
                self.samples.len()
            )));
        }
        if !self.t0.is_finite() || self.samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::domain("trace contains non-finite values"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.sample_rate
    }

    fn with_samples(&self, samples: Vec<f64>) -> Self {
        SignalTrace {
            samples,
            sample_rate: self.sample_rate,
            t0: self.t0,
        }
    }
}

/// One second-order section, `b0 + b1 z⁻¹ + b2 z⁻²` over `1 + a1 z⁻¹ + a2 z⁻²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn run(&self, x: &mut [f64]) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let y = self.b[0] * *v + s1;
            s1 = self.b[1] * *v - self.a[0] * y + s2;
            s2 = self.b[2] * *v - self.a[1] * y;
            *v = y;
        }
    }

    fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (1.0 + self.a[0] * z1 + self.a[1] * z2)
    }
}

/// Butterworth band-pass as a cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPass {
    pub sections: Vec<Biquad>,
    pub sample_rate: f64,
    pub low: f64,
    pub high: f64,
}

impl BandPass {
    pub fn design(low: f64, high: f64, sample_rate: f64) -> Result<Self> {
        if !(low > 0.0 && low < high && high < 0.5 * sample_rate) {
            return Err(Error::config(format!(
                "band [{low}, {high}] Hz must satisfy 0 < low < high < Nyquist ({} Hz)",
                0.5 * sample_rate
            )));
        }
        let fs2 = 2.0 * sample_rate;
        let w1 = fs2 * (PI * low / sample_rate).tan();
        let w2 = fs2 * (PI * high / sample_rate).tan();
        let (w0sq, bw) = (w1 * w2, w2 - w1);
        let mut sections = Vec::with_capacity(PROTOTYPE_ORDER);
        // Each prototype pole in the upper half plane maps to two band-pass
        // poles; the conjugate prototype pole supplies their conjugates.
        for k in 0..PROTOTYPE_ORDER / 2 {
            let theta = PI * (2 * k + PROTOTYPE_ORDER + 1) as f64 / (2 * PROTOTYPE_ORDER) as f64;
            let p = Complex64::from_polar(1.0, theta);
            let disc = (p * p * bw * bw - 4.0 * w0sq).sqrt();
            for s in [(p * bw + disc) / 2.0, (p * bw - disc) / 2.0] {
                let z = (fs2 + s) / (fs2 - s);
                sections.push(Biquad {
                    b: [1.0, 0.0, -1.0],
                    a: [-2.0 * z.re, z.norm_sqr()],
                });
            }
        }
        let mut filter = BandPass {
            sections,
            sample_rate,
            low,
            high,
        };
        // Unit gain at the digital centre frequency.
        let centre = (w0sq.sqrt() / fs2).atan() * 2.0;
        let g = filter.response_at_omega(centre).norm();
        let per_section = g.powf(-1.0 / filter.sections.len() as f64);
        for s in &mut filter.sections {
            for b in &mut s.b {
                *b *= per_section;
            }
        }
        Ok(filter)
    }

    fn response_at_omega(&self, w: f64) -> Complex64 {
        self.sections.iter().map(|s| s.response(w)).product()
    }

    /// Single-pass complex response at `f` Hz.
    pub fn response(&self, f: f64) -> Complex64 {
        self.response_at_omega(2.0 * PI * f / self.sample_rate)
    }

    /// Magnitude of the forward-backward response, which is the single-pass
    /// magnitude squared.
    pub fn zero_phase_gain(&self, f: f64) -> f64 {
        self.response(f).norm_sqr()
    }

    fn run(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.run(x);
        }
    }

    /// Samples of odd reflection padding on each side.
    fn pad_length(&self, n: usize) -> usize {
        let settle = (6.0 * self.sample_rate / (self.high - self.low)).ceil() as usize;
        settle.min(n - 1)
    }

    /// Forward-backward filtering with odd reflection at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = self.pad_length(n);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|k| 2.0 * x[0] - x[k]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|k| 2.0 * x[n - 1] - x[n - 1 - k]));
        self.run(&mut ext);
        ext.reverse();
        self.run(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Zero-phase band-pass of `trace` between `low` and `high` Hz.
pub fn bandpass(trace: &SignalTrace, low: f64, high: f64) -> Result<SignalTrace> {
    trace.validate()?;
    let filter = BandPass::design(low, high, trace.sample_rate)?;
    Ok(trace.with_samples(filter.filtfilt(&trace.samples)))
}

/// Magnitude of the analytic signal.
pub fn envelope(trace: &SignalTrace) -> Result<SignalTrace> {
    trace.validate()?;
    let n = trace.len();
    let mut buf: Vec<Complex64> = trace
        .samples
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    // Keep DC (and Nyquist for even n), double positive, drop negative.
    let half = n / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        let weight = if k == 0 || (n % 2 == 0 && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *v *= weight;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(trace.with_samples(buf.iter().map(|v| v.norm() * scale).collect()))
}

/// Arithmetic mean of the envelope samples.
pub fn mean_intensity(env: &SignalTrace) -> f64 {
    if env.samples.is_empty() {
        return 0.0;
    }
    env.samples.iter().sum::<f64>() / env.samples.len() as f64
}

/// Band-pass then envelope, the chain applied to every recorded trace.
pub fn measure(trace: &SignalTrace, band: (f64, f64)) -> Result<SignalTrace> {
    envelope(&bandpass(trace, band.0, band.1)?)
}

/// Envelopes of one transducer stacked by deformation and normalised to a
/// global maximum of one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMap {
    /// One row per deformation step.
    pub matrix: Vec<Vec<f64>>,
    /// Deformation per row, mm.
    pub row_labels: Vec<f64>,
    /// Time per column, s.
    pub col_labels: Vec<f64>,
}

pub fn build_spectral_map(envelopes: &[(f64, SignalTrace)]) -> Result<SpectralMap> {
    let first = &envelopes
        .first()
        .ok_or_else(|| Error::domain("no envelopes to combine"))?
        .1;
    let n = first.len();
    for (d, e) in envelopes {
        if !d.is_finite() {
            return Err(Error::domain("deformation labels must be finite"));
        }
        if e.len() != n || e.sample_rate != first.sample_rate {
            return Err(Error::domain("envelopes must share length and sample rate"));
        }
    }
    let mut order: Vec<usize> = (0..envelopes.len()).collect();
    order.sort_by(|&a, &b| envelopes[a].0.total_cmp(&envelopes[b].0));
    if order
        .windows(2)
        .any(|w| envelopes[w[0]].0 == envelopes[w[1]].0)
    {
        return Err(Error::domain("deformations must be distinct"));
    }
    let peak = envelopes
        .iter()
        .flat_map(|(_, e)| e.samples.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    Ok(SpectralMap {
        matrix: order
            .iter()
            .map(|&k| {
                envelopes[k]
                    .1
                    .samples
                    .iter()
                    .map(|v| v.abs() * scale)
                    .collect()
            })
            .collect(),
        row_labels: order.iter().map(|&k| envelopes[k].0).collect(),
        col_labels: (0..n).map(|k| first.time(k)).collect(),
    })
}

impl SpectralMap {
    /// Total variation down each column.
    pub fn column_variation(&self) -> Vec<f64> {
        let cols = self.col_labels.len();
        (0..cols)
            .map(|c| {
                self.matrix
                    .windows(2)
                    .map(|w| (w[1][c] - w[0][c]).abs())
                    .sum()
            })
            .collect()
    }

    /// Time of the column with the largest variation across deformations.
    pub fn peak_variation_time(&self) -> f64 {
        let v = self.column_variation();
        let k = v
            .iter()
            .enumerate()
            .fold(0, |best, (k, x)| if *x > v[best] { k } else { best });
        self.col_labels[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(f: f64, n: usize) -> SignalTrace {
        let fs = DEFAULT_SAMPLE_RATE;
        SignalTrace::new(
            (0..n)
                .map(|k| (2.0 * PI * f * k as f64 / fs).cos())
                .collect(),
            fs,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn design_rejects_bad_bands() {
        assert!(BandPass::design(57e3, 47e3, 1e6).is_err());
        assert!(BandPass::design(47e3, 600e3, 1e6).is_err());
        assert!(matches!(
            BandPass::design(0.0, 1e3, 1e6),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn centre_gain_is_unity() {
        let f = BandPass::design(47e3, 57e3, 1e6).unwrap();
        let fs2 = 2e6;
        let w1 = fs2 * (PI * 47e3 / 1e6).tan();
        let w2 = fs2 * (PI * 57e3 / 1e6).tan();
        let centre = ((w1 * w2).sqrt() / fs2).atan() * 1e6 / PI;
        assert!((f.zero_phase_gain(centre) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_signal_has_zero_envelope() {
        let z = SignalTrace::new(vec![0.0; 128], 1e6, 0.0).unwrap();
        assert!(envelope(&z).unwrap().samples.iter().all(|&v| v == 0.0));
        assert_eq!(mean_intensity(&z), 0.0);
    }

    #[test]
    fn short_traces_are_rejected() {
        assert!(SignalTrace::new(vec![0.0; 10], 1e6, 0.0).is_err());
    }

    #[test]
    fn single_row_map_is_normalised_envelope() {
        let e = envelope(&tone(52e3, 256)).unwrap();
        let peak = e.samples.iter().cloned().fold(0.0, f64::max);
        let map = build_spectral_map(&[(0.0, e.clone())]).unwrap();
        for (m, v) in map.matrix[0].iter().zip(&e.samples) {
            assert!((m - v / peak).abs() < 1e-15);
        }
        assert!(build_spectral_map(&[(0.0, e.clone()), (0.0, e)]).is_err());
    }
}
