//! Butterworth band-pass design as a cascade of biquad sections.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Second-order section with `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + z_inv * self.b[1] + z2 * self.b[2]) / (1.0 + z_inv * self.a[0] + z2 * self.a[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiquadCascade {
    pub sections: Vec<Biquad>,
}

impl BiquadCascade {
    /// 4th-order Butterworth band-pass between `low_hz` and `high_hz`, obtained
    /// from the 2nd-order analog prototype by the low-pass→band-pass mapping
    /// and a prewarped bilinear transform. Unit gain at the band center.
    pub fn butterworth_bandpass(low_hz: f64, high_hz: f64, rate_hz: f64) -> Result<Self> {
        if !(low_hz > 0.0 && low_hz < high_hz) {
            return Err(Error::Config(format!(
                "band edges must satisfy 0 < low < high, got [{low_hz}, {high_hz}]"
            )));
        }
        if !(rate_hz > 2.0 * high_hz) {
            return Err(Error::Config(format!(
                "sampling rate {rate_hz} Hz does not exceed twice the band edge {high_hz} Hz"
            )));
        }
        let fs2 = 2.0 * rate_hz;
        let w1 = fs2 * (PI * low_hz / rate_hz).tan();
        let w2 = fs2 * (PI * high_hz / rate_hz).tan();
        let w0 = (w1 * w2).sqrt();
        let bw = w2 - w1;
        let center = 2.0 * (w0 / fs2).atan();
        let z_inv_center = Complex64::from_polar(1.0, -center);

        // upper prototype pole of the 2nd-order Butterworth low-pass
        let p = Complex64::from_polar(1.0, 3.0 * PI / 4.0);
        let pb = p * bw;
        let disc = (pb * pb - 4.0 * w0 * w0).sqrt();
        let analog = [(pb + disc) / 2.0, (pb - disc) / 2.0];

        let sections = analog
            .iter()
            .map(|&s| {
                let z = (fs2 + s) / (fs2 - s);
                let mut sec = Biquad {
                    // zeros at z = 1 and z = −1
                    b: [1.0, 0.0, -1.0],
                    a: [-2.0 * z.re, z.norm_sqr()],
                };
                let g = sec.response(z_inv_center).norm();
                for b in &mut sec.b {
                    *b /= g;
                }
                sec
            })
            .collect();
        Ok(Self { sections })
    }

    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, rate_hz: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / rate_hz);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    /// Causal filtering from zero initial state (transposed direct form II).
    pub fn filter(&self, input: &[f64]) -> Vec<f64> {
        let mut out = input.to_vec();
        for sec in &self.sections {
            let (mut s1, mut s2) = (0.0, 0.0);
            for v in out.iter_mut() {
                let x = *v;
                let y = sec.b[0] * x + s1;
                s1 = sec.b[1] * x - sec.a[0] * y + s2;
                s2 = sec.b[2] * x - sec.a[1] * y;
                *v = y;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_gain_at_center_and_half_power_edges() {
        let f = BiquadCascade::butterworth_bandpass(300.0, 1000.0, 10_000.0).unwrap();
        let center = (300.0f64 * 1000.0).sqrt();
        // the digital center is the prewarped geometric mean, close to the analog one
        assert!((f.response(center, 10_000.0).norm() - 1.0).abs() < 0.02);
        for edge in [300.0, 1000.0] {
            let g = f.response(edge, 10_000.0).norm();
            assert!((g - 0.5f64.sqrt()).abs() < 1e-6, "gain {g} at {edge}");
        }
        assert!(f.response(50.0, 10_000.0).norm() < 0.05);
        assert!(f.response(4000.0, 10_000.0).norm() < 0.1);
    }

    #[test]
    fn stable_poles() {
        let f = BiquadCascade::butterworth_bandpass(300.0, 1000.0, 2_500.0).unwrap();
        for s in &f.sections {
            // |pole|² = a2 for a complex pair
            assert!(s.a[1] < 1.0 && s.a[1] > 0.0);
        }
    }

    #[test]
    fn nyquist_violation() {
        assert!(BiquadCascade::butterworth_bandpass(300.0, 1000.0, 1_500.0).is_err());
    }
}
