//! Output spectra: `S(ω) = |∫Ω_out e^{iωt}dt|² / max_ω |∫Ω_in e^{iωt}dt|²`,
//! peak metrics and spectrograms.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{NfsError, Result};
use crate::model::{FieldRecord, SpectrumGrid};

/// Trapezoidal weight of sample `i` in a record of `n`.
fn trapezoid_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i + 1 == n {
        0.5
    } else {
        1.0
    }
}

/// Index range outside which every sample is exactly zero.
fn support(field: &FieldRecord) -> (usize, usize) {
    let nz = |z: &Complex64| z.re != 0.0 || z.im != 0.0;
    match field.samples.iter().position(nz) {
        Some(first) => {
            let last = field.samples.iter().rposition(nz).unwrap_or(first);
            (first, last + 1)
        }
        None => (0, 0),
    }
}

/// `∫Ω(t) e^{iωt} dt` by the trapezoidal rule at each angular frequency
/// (rad/ns), evaluated directly.
pub fn dtft(field: &FieldRecord, omegas: &[f64]) -> Vec<Complex64> {
    let n = field.len();
    let (lo, hi) = support(field);
    let dt = field.dt;
    omegas
        .par_iter()
        .map(|&w| {
            if lo == hi {
                return Complex64::default();
            }
            let rot = Complex64::from_polar(1.0, w * dt);
            let mut acc = Complex64::default();
            let mut i = lo;
            while i < hi {
                // resynchronise the phasor every block to bound rounding drift
                let block_end = (i + 512).min(hi);
                let mut ph = Complex64::from_polar(1.0, w * field.time(i));
                while i < block_end {
                    acc += trapezoid_weight(i, n) * field.samples[i] * ph;
                    ph *= rot;
                    i += 1;
                }
            }
            acc * dt
        })
        .collect()
}

/// Same quadrature as [`dtft`] on the uniform grid `ω_k = ω₀ + k·Δω`,
/// `k = 0..m`, evaluated with a chirp-z transform.
pub fn dtft_uniform(field: &FieldRecord, omega0: f64, domega: f64, m: usize) -> Vec<Complex64> {
    if m == 0 {
        return Vec::new();
    }
    let (lo, hi) = support(field);
    if lo == hi {
        return vec![Complex64::default(); m];
    }
    let n = hi - lo;
    let total = field.len();
    let dt = field.dt;
    let ts = field.time(lo);
    let theta = domega * dt;
    let chirp = |j: u64| Complex64::from_polar(1.0, 0.5 * theta * (j * j) as f64);

    let len = (n + m - 1).next_power_of_two();
    let mut a = vec![Complex64::default(); len];
    for j in 0..n {
        let i = lo + j;
        let pre = Complex64::from_polar(1.0, omega0 * j as f64 * dt);
        a[j] = trapezoid_weight(i, total) * field.samples[i] * pre * chirp(j as u64);
    }
    let mut b = vec![Complex64::default(); len];
    for k in 0..m {
        b[k] = chirp(k as u64).conj();
    }
    for j in 1..n {
        b[len - j] = chirp(j as u64).conj();
    }

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inv.process(&mut a);
    let scale = dt / len as f64;
    (0..m)
        .map(|k| {
            let w = omega0 + k as f64 * domega;
            let post = Complex64::from_polar(1.0, w * ts) * chirp(k as u64);
            a[k] * post * scale
        })
        .collect()
}

/// Normalized spectrum on a frequency grid in units of Γ.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRecord {
    pub omega_over_gamma: Vec<f64>,
    pub s_values: Vec<f64>,
    /// Peak input power `max_ω |∫Ω_in e^{iωt}dt|²`, ns².
    pub normalization: f64,
}

impl SpectrumRecord {
    pub fn len(&self) -> usize {
        self.s_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_values.is_empty()
    }

    /// S at the grid point closest to `omega_over_gamma`.
    pub fn value_near(&self, omega_over_gamma: f64) -> f64 {
        let i = self
            .omega_over_gamma
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - omega_over_gamma).abs().total_cmp(&(b.1 - omega_over_gamma).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.s_values[i]
    }

    pub fn max(&self) -> f64 {
        self.s_values.iter().copied().fold(0.0, f64::max)
    }

    /// Maximum of S over `lo <= ω/Γ <= hi`.
    pub fn max_in(&self, lo: f64, hi: f64) -> f64 {
        self.omega_over_gamma
            .iter()
            .zip(&self.s_values)
            .filter(|(w, _)| **w >= lo && **w <= hi)
            .map(|(_, s)| *s)
            .fold(0.0, f64::max)
    }

    /// Largest relative mismatch `|S(ω) − S(−ω)| / max S` over grid points
    /// whose mirror is also a grid point.
    pub fn mirror_asymmetry(&self) -> f64 {
        let max = self.max();
        if max == 0.0 {
            return 0.0;
        }
        let n = self.len();
        let step = if n > 1 {
            self.omega_over_gamma[1] - self.omega_over_gamma[0]
        } else {
            1.0
        };
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let w = self.omega_over_gamma[i];
            if w <= 0.0 {
                continue;
            }
            if let Some(j) = self
                .omega_over_gamma
                .iter()
                .position(|x| (x + w).abs() < 1e-6 * step)
            {
                worst = worst.max((self.s_values[i] - self.s_values[j]).abs() / max);
            }
        }
        worst
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega_over_gamma,s\n");
        for (w, s) in self.omega_over_gamma.iter().zip(&self.s_values) {
            let _ = writeln!(out, "{w},{s}");
        }
        out
    }
}

/// `max_ω |dtft|²` of the input, scanned over `omegas` (rad/ns) and refined
/// by golden-section search around the best sample.
pub fn peak_input_power(input: &FieldRecord, omegas: &[f64]) -> f64 {
    if omegas.is_empty() {
        return 0.0;
    }
    let power = |w: f64| dtft(input, &[w])[0].norm_sqr();
    let scan: Vec<f64> = dtft(input, omegas).iter().map(|z| z.norm_sqr()).collect();
    let (best, best_val) = scan
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let mut lo = omegas[best.saturating_sub(1)];
    let mut hi = omegas[(best + 1).min(omegas.len() - 1)];
    if hi <= lo {
        return best_val;
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (power(x1), power(x2));
    for _ in 0..60 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = power(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = power(x1);
        }
    }
    best_val.max(f1).max(f2)
}

/// `S(ω)` on a uniform grid in units of Γ.
pub fn normalized_spectrum(
    input: &FieldRecord,
    output: &FieldRecord,
    grid: &SpectrumGrid,
    gamma: f64,
) -> Result<SpectrumRecord> {
    grid.validate()?;
    let omega_over_gamma = grid.points();
    let m = omega_over_gamma.len();
    let omega0 = grid.omega_min * gamma;
    let domega = grid.omega_step * gamma;
    let input_power: Vec<f64> = dtft_uniform(input, omega0, domega, m)
        .iter()
        .map(|z| z.norm_sqr())
        .collect();
    let normalization = refine_input_peak(input, &omega_over_gamma, &input_power, gamma);
    let out = dtft_uniform(output, omega0, domega, m);
    finish(omega_over_gamma, &out, normalization)
}

/// `S(ω)` at arbitrary frequencies (units of Γ) by direct quadrature.
pub fn normalized_spectrum_at(
    input: &FieldRecord,
    output: &FieldRecord,
    omega_over_gamma: &[f64],
    gamma: f64,
) -> Result<SpectrumRecord> {
    let omegas: Vec<f64> = omega_over_gamma.iter().map(|w| w * gamma).collect();
    let normalization = peak_input_power(input, &omegas);
    let out = dtft(output, &omegas);
    finish(omega_over_gamma.to_vec(), &out, normalization)
}

fn refine_input_peak(input: &FieldRecord, grid: &[f64], power: &[f64], gamma: f64) -> f64 {
    let best = power
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
        .0;
    let lo = best.saturating_sub(1);
    let hi = (best + 2).min(grid.len());
    let around: Vec<f64> = grid[lo..hi].iter().map(|w| w * gamma).collect();
    peak_input_power(input, &around).max(power[best])
}

fn finish(
    omega_over_gamma: Vec<f64>,
    out: &[Complex64],
    normalization: f64,
) -> Result<SpectrumRecord> {
    if !(normalization > 0.0 && normalization.is_finite()) {
        return Err(NfsError::Domain(format!(
            "input spectrum has no positive maximum ({normalization})"
        )));
    }
    let s_values = out.iter().map(|z| z.norm_sqr() / normalization).collect();
    Ok(SpectrumRecord {
        omega_over_gamma,
        s_values,
        normalization,
    })
}

/// Height, position and width of one spectral line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    /// ω/Γ.
    pub center: f64,
    pub height: f64,
    /// Full width at half maximum in units of Γ.
    pub fwhm: f64,
}

/// Locates the highest sample inside `lo <= ω/Γ <= hi` and measures its line.
///
/// The center comes from a parabola through the three samples around the
/// maximum, the width from linear interpolation of the half-height
/// crossings on either side.
pub fn peak_metrics(spectrum: &SpectrumRecord, lo: f64, hi: f64) -> Result<PeakReport> {
    let w = &spectrum.omega_over_gamma;
    let s = &spectrum.s_values;
    let idx: Vec<usize> = (0..w.len()).filter(|&i| w[i] >= lo && w[i] <= hi).collect();
    let (first, last) = match (idx.first(), idx.last()) {
        (Some(&a), Some(&b)) if b >= a + 2 => (a, b),
        _ => return Err(NfsError::Peak(format!("window [{lo}, {hi}] holds too few samples"))),
    };
    let top = (first..=last)
        .max_by(|&a, &b| s[a].total_cmp(&s[b]))
        .unwrap_or(first);
    if top == first || top == last {
        return Err(NfsError::Peak(format!(
            "no interior maximum in window [{lo}, {hi}]"
        )));
    }
    if !(s[top] > 0.0) {
        return Err(NfsError::Peak(format!("spectrum vanishes in window [{lo}, {hi}]")));
    }

    measure_line(spectrum, top, first, last).ok_or_else(|| {
        NfsError::Peak(format!(
            "half-height crossing of the line at {:.3} lies outside [{lo}, {hi}]",
            w[top]
        ))
    })
}

/// Parabolic apex of the maximum at `top` and its half-height crossings
/// searched outward within `first..=last`.
fn measure_line(spectrum: &SpectrumRecord, top: usize, first: usize, last: usize) -> Option<PeakReport> {
    let w = &spectrum.omega_over_gamma;
    let s = &spectrum.s_values;
    let (y0, y1, y2) = (s[top - 1], s[top], s[top + 1]);
    let curvature = y0 - 2.0 * y1 + y2;
    let (offset, height) = if curvature < 0.0 {
        let off = 0.5 * (y0 - y2) / curvature;
        (off, y1 - 0.25 * (y0 - y2) * off)
    } else {
        (0.0, y1)
    };
    let step = w[top + 1] - w[top];
    let center = w[top] + offset * step;

    let half = 0.5 * height;
    let left = (first..top).rev().find(|&i| s[i] <= half).map(|i| {
        let f = (half - s[i]) / (s[i + 1] - s[i]);
        w[i] + f * (w[i + 1] - w[i])
    })?;
    let right = (top + 1..=last).find(|&i| s[i] <= half).map(|i| {
        let f = (s[i - 1] - half) / (s[i - 1] - s[i]);
        w[i - 1] + f * (w[i] - w[i - 1])
    })?;
    Some(PeakReport {
        center,
        height,
        fwhm: right - left,
    })
}

/// Every local maximum of at least `min_fraction · max S` that rises by a
/// tenth of its height above the higher of its two flanking valleys. Each
/// width is taken at half of that maximum's own height, so blended
/// neighbours widen it; maxima whose half height is not reached before the
/// grid edge are skipped.
pub fn find_lines(spectrum: &SpectrumRecord, min_fraction: f64) -> Vec<PeakReport> {
    let s = &spectrum.s_values;
    let n = s.len();
    if n < 3 {
        return Vec::new();
    }
    let floor = min_fraction * spectrum.max();
    (1..n - 1)
        .filter(|&i| s[i] > s[i - 1] && s[i] >= s[i + 1] && s[i] >= floor)
        .filter(|&i| prominence(s, i) >= 0.1 * s[i])
        .filter_map(|i| measure_line(spectrum, i, 0, n - 1))
        .collect()
}

/// Height of `s[i]` above the higher of the lowest points met on each side
/// before the curve climbs above `s[i]`.
fn prominence(s: &[f64], i: usize) -> f64 {
    let valley = |range: &mut dyn Iterator<Item = usize>| {
        let mut low = s[i];
        for j in range {
            if s[j] > s[i] {
                break;
            }
            low = low.min(s[j]);
        }
        low
    };
    let left = valley(&mut (0..i).rev());
    let right = valley(&mut (i + 1..s.len()));
    s[i] - left.max(right)
}

/// The line holding the global maximum on `ω > 0`.
pub fn dominant_line(spectrum: &SpectrumRecord) -> Result<PeakReport> {
    let s = &spectrum.s_values;
    let w = &spectrum.omega_over_gamma;
    let top = (0..s.len())
        .filter(|&i| w[i] > 0.0)
        .max_by(|&a, &b| s[a].total_cmp(&s[b]))
        .ok_or_else(|| NfsError::Peak("no positive frequencies".into()))?;
    find_lines(spectrum, 0.0)
        .into_iter()
        .find(|p| (p.center - w[top]).abs() <= spectrum_step(w))
        .ok_or_else(|| NfsError::Peak(format!("cannot resolve the line at {:.3}", w[top])))
}

fn spectrum_step(w: &[f64]) -> f64 {
    if w.len() > 1 {
        w[1] - w[0]
    } else {
        0.0
    }
}

/// `S(param, ω)` with a sorted parameter axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub params: Vec<f64>,
    pub omega_over_gamma: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl Spectrogram {
    pub fn row(&self, param: f64) -> Option<&[f64]> {
        self.params
            .iter()
            .position(|p| (p - param).abs() < 1e-9 * p.abs().max(1.0))
            .map(|i| self.rows[i].as_slice())
    }

    /// Long format: `param,omega_over_gamma,s`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,omega_over_gamma,s\n");
        for (p, row) in self.params.iter().zip(&self.rows) {
            for (w, s) in self.omega_over_gamma.iter().zip(row) {
                let _ = writeln!(out, "{p},{w},{s}");
            }
        }
        out
    }
}

pub fn assemble_spectrogram(mut rows: Vec<(f64, SpectrumRecord)>) -> Result<Spectrogram> {
    let Some((_, first)) = rows.first() else {
        return Err(NfsError::config("spectrogram needs at least one row"));
    };
    let omega = first.omega_over_gamma.clone();
    if rows.iter().any(|(_, r)| r.omega_over_gamma != omega) {
        return Err(NfsError::config("spectrogram rows use different frequency grids"));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(Spectrogram {
        params: rows.iter().map(|(p, _)| *p).collect(),
        omega_over_gamma: omega,
        rows: rows.into_iter().map(|(_, r)| r.s_values).collect(),
    })
}
