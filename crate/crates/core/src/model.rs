//! Physical constants, configuration types, the time grid and the incident
//! pulse.
//!
//! Units: times in ns, rates in 1/ns, angular frequencies in rad/ns,
//! lengths in m. Detunings and spectra are given to users in units of the
//! natural linewidth Γ.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{NfsError, Result};
use crate::switching::SwitchSchedule;

/// 14.4 keV photon wavelength of the ⁵⁷Fe Mössbauer transition.
pub const FE57_WAVELENGTH_M: f64 = 0.0861e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuclearConstants {
    /// Spontaneous decay rate Γ, 1/ns.
    pub gamma: f64,
    /// Clebsch-Gordan coefficient of the Δm = 0 transitions.
    pub cg_a: f64,
    /// X-ray wave number, 1/m.
    pub k_xray: f64,
    /// Electronic x-ray refractive index of FeBO₃.
    pub n_electronic: Complex64,
}

impl Default for NuclearConstants {
    fn default() -> Self {
        Self {
            gamma: 1.0 / 141.0,
            cg_a: (2.0f64 / 3.0).sqrt(),
            k_xray: 2.0 * PI / FE57_WAVELENGTH_M,
            n_electronic: Complex64::new(1.0, 9.13e-8),
        }
    }
}

impl NuclearConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(NfsError::config(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.cg_a > 0.0 && self.cg_a <= 1.0) {
            return Err(NfsError::config(format!("cg_a must lie in (0, 1], got {}", self.cg_a)));
        }
        if !(self.k_xray > 0.0 && self.k_xray.is_finite()) {
            return Err(NfsError::config("k_xray must be positive"));
        }
        if !(self.n_electronic.im >= 0.0) || !self.n_electronic.re.is_finite() {
            return Err(NfsError::config(
                "refractive index must be finite with a non-negative imaginary part",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseConfig {
    /// Pulse center, ns.
    pub t0: f64,
    /// Gaussian width parameter, ns.
    pub tau: f64,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self { t0: 0.67, tau: 0.1 }
    }
}

impl PulseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(NfsError::config(format!("pulse tau must be > 0, got {}", self.tau)));
        }
        if !(self.t0 >= 4.0 * self.tau) {
            return Err(NfsError::config(format!(
                "pulse center t0 = {} must be at least 4 tau = {} so the pulse starts inside the grid",
                self.t0,
                4.0 * self.tau
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Slabs per target along the propagation direction.
    pub n_slabs: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dt: 0.005,
            t_end: 1500.0,
            n_slabs: 128,
        }
    }
}

impl GridConfig {
    /// Number of intervals `t_end / dt`, which must be an integer.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(NfsError::config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(NfsError::config(format!("t_end must be > 0, got {}", self.t_end)));
        }
        let ratio = self.t_end / self.dt;
        let rounded = ratio.round();
        if (ratio - rounded).abs() > 1e-9 * ratio.max(1.0) {
            return Err(NfsError::config(format!(
                "t_end / dt = {ratio} is not an integer"
            )));
        }
        if rounded < 2.0 {
            return Err(NfsError::config("t_end / dt must be at least 2"));
        }
        Ok(rounded as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.n_steps()?;
        if self.n_slabs < 8 {
            return Err(NfsError::config(format!(
                "n_slabs must be >= 8, got {}",
                self.n_slabs
            )));
        }
        Ok(())
    }

    /// Checks that the step resolves the pulse and the fastest hyperfine phase.
    pub fn check_resolution(&self, pulse: &PulseConfig, delta_angular: f64) -> Result<()> {
        if self.dt > pulse.tau / 10.0 * (1.0 + 1e-12) {
            return Err(NfsError::config(format!(
                "dt = {} does not resolve the pulse (need dt <= tau/10 = {})",
                self.dt,
                pulse.tau / 10.0
            )));
        }
        if delta_angular > 0.0 && self.dt > 0.02 / delta_angular * (1.0 + 1e-12) {
            return Err(NfsError::config(format!(
                "dt = {} does not resolve the hyperfine phase (need dt <= 0.02/Δ = {})",
                self.dt,
                0.02 / delta_angular
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetConfig {
    /// Resonant thickness ξ.
    pub xi: f64,
    /// Physical thickness L, m.
    pub thickness_l: f64,
    /// Combined hyperfine detuning Δ = δ_g + δ_e in units of Γ.
    pub delta_over_gamma: f64,
    /// Enables the electronic (n² − 1) term.
    pub include_electronic: bool,
    pub schedule: SwitchSchedule,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            xi: 15.0,
            thickness_l: 10e-6,
            delta_over_gamma: 80.0,
            include_electronic: false,
            schedule: SwitchSchedule::default(),
        }
    }
}

impl TargetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(NfsError::config(format!("xi must be >= 0, got {}", self.xi)));
        }
        if !(self.thickness_l > 0.0 && self.thickness_l.is_finite()) {
            return Err(NfsError::config(format!(
                "thickness_l must be > 0, got {}",
                self.thickness_l
            )));
        }
        if !(self.delta_over_gamma >= 0.0 && self.delta_over_gamma.is_finite()) {
            return Err(NfsError::config(format!(
                "delta_over_gamma must be >= 0, got {}",
                self.delta_over_gamma
            )));
        }
        self.schedule.validate()
    }
}

/// Evaluation frequencies for spectra, in units of Γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumGrid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub omega_step: f64,
}

impl Default for SpectrumGrid {
    fn default() -> Self {
        Self {
            omega_min: -200.0,
            omega_max: 200.0,
            omega_step: 0.05,
        }
    }
}

impl SpectrumGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_step > 0.0 && self.omega_step.is_finite()) {
            return Err(NfsError::config("omega_step must be > 0"));
        }
        if !(self.omega_max >= self.omega_min) || !self.omega_min.is_finite() {
            return Err(NfsError::config("omega_max must be >= omega_min"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.omega_max - self.omega_min) / self.omega_step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid points in units of Γ, computed as `omega_min + i * omega_step`.
    pub fn points(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.omega_min + i as f64 * self.omega_step)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub constants: NuclearConstants,
    pub pulse: PulseConfig,
    pub grid: GridConfig,
    /// Zero, one or two targets in beam order.
    pub targets: Vec<TargetConfig>,
    pub spectrum: SpectrumGrid,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            constants: NuclearConstants::default(),
            pulse: PulseConfig::default(),
            grid: GridConfig::default(),
            targets: vec![TargetConfig::default(), TargetConfig::default()],
            spectrum: SpectrumGrid::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        self.pulse.validate()?;
        self.grid.validate()?;
        self.spectrum.validate()?;
        if self.targets.len() > 2 {
            return Err(NfsError::config(format!(
                "at most two targets are supported, got {}",
                self.targets.len()
            )));
        }
        for t in &self.targets {
            t.validate()?;
        }
        if let [a, b] = self.targets.as_slice() {
            if a.delta_over_gamma != b.delta_over_gamma {
                return Err(NfsError::config(
                    "both targets must share delta_over_gamma (same isotope and field strength)",
                ));
            }
        }
        let delta = self
            .targets
            .iter()
            .map(|t| angular_detuning(t.delta_over_gamma, &self.constants))
            .fold(0.0, f64::max);
        self.grid.check_resolution(&self.pulse, delta)
    }

    /// Hyperfine detuning in rad/ns (zero without targets).
    pub fn delta_angular(&self) -> f64 {
        self.targets
            .first()
            .map(|t| angular_detuning(t.delta_over_gamma, &self.constants))
            .unwrap_or(0.0)
    }
}

/// Uniformly sampled complex field envelope Ω(t).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRecord {
    pub t_start: f64,
    pub dt: f64,
    pub samples: Vec<Complex64>,
}

impl FieldRecord {
    pub fn new(t_start: f64, dt: f64, samples: Vec<Complex64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(NfsError::config("field record dt must be > 0"));
        }
        if samples.len() < 2 {
            return Err(NfsError::config("field record needs at least two samples"));
        }
        if let Some(i) = samples.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(NfsError::Domain(format!(
                "non-finite field sample at index {i}"
            )));
        }
        Ok(Self {
            t_start,
            dt,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `|Ω(t_end)| / max |Ω|`; spectra need this below 10⁻².
    pub fn truncation_ratio(&self) -> f64 {
        let max = self.max_abs();
        if max == 0.0 {
            return 0.0;
        }
        self.samples.last().map(|z| z.norm()).unwrap_or(0.0) / max
    }

    pub fn is_decayed(&self) -> bool {
        self.truncation_ratio() <= 1e-2
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            t_start: self.t_start,
            dt: self.dt,
            samples: self.samples.iter().map(|z| z * factor).collect(),
        }
    }

    /// `Σ|Ω|² dt` with the trapezoidal rule.
    pub fn energy(&self) -> f64 {
        let n = self.samples.len();
        let sum: f64 = self.samples.iter().map(|z| z.norm_sqr()).sum();
        (sum - 0.5 * (self.samples[0].norm_sqr() + self.samples[n - 1].norm_sqr())) * self.dt
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.len() != other.len()
            || (self.dt - other.dt).abs() > 1e-12 * self.dt
            || (self.t_start - other.t_start).abs() > 1e-12 * self.dt.max(1.0)
        {
            return Err(NfsError::config("field records are sampled on different grids"));
        }
        Ok(())
    }

    /// `‖self − other‖₂ / ‖other‖₂` over the samples.
    pub fn relative_l2(&self, reference: &Self) -> Result<f64> {
        self.check_compatible(reference)?;
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in self.samples.iter().zip(&reference.samples) {
            num += (a - b).norm_sqr();
            den += b.norm_sqr();
        }
        if den == 0.0 {
            return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
        }
        Ok((num / den).sqrt())
    }

    /// Linear combination `α·self + β·other`.
    pub fn combine(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            t_start: self.t_start,
            dt: self.dt,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        })
    }

    /// Restriction to the samples with `t <= t_max`.
    pub fn truncated(&self, t_max: f64) -> Self {
        let n = (((t_max - self.t_start) / self.dt + 1e-9).floor() as usize + 1).clamp(2, self.len());
        Self {
            t_start: self.t_start,
            dt: self.dt,
            samples: self.samples[..n].to_vec(),
        }
    }
}

/// Sample times `t_i = i·dt`, `i = 0..=t_end/dt`.
pub fn build_time_grid(grid: &GridConfig) -> Result<Vec<f64>> {
    let n = grid.n_steps()?;
    Ok((0..=n).map(|i| i as f64 * grid.dt).collect())
}

/// Incident pulse `Ω₁(0, t) = exp[−((t − t₀)/τ)²]` on the time grid.
pub fn gaussian_input(pulse: &PulseConfig, grid: &GridConfig) -> Result<FieldRecord> {
    pulse.validate()?;
    grid.check_resolution(pulse, 0.0)?;
    let samples = build_time_grid(grid)?
        .into_iter()
        .map(|t| {
            let x = (t - pulse.t0) / pulse.tau;
            Complex64::new((-x * x).exp(), 0.0)
        })
        .collect();
    FieldRecord::new(0.0, grid.dt, samples)
}

/// Converts a detuning in units of Γ to rad/ns.
pub fn angular_detuning(delta_over_gamma: f64, constants: &NuclearConstants) -> f64 {
    delta_over_gamma * constants.gamma
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_time_grid() {
        let g = build_time_grid(&GridConfig::default()).unwrap();
        assert_eq!(g.len(), 300_001);
        assert_eq!(*g.last().unwrap(), 1500.0);
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn small_time_grids() {
        let g = GridConfig {
            dt: 0.5,
            t_end: 1.0,
            n_slabs: 8,
        };
        assert_eq!(build_time_grid(&g).unwrap(), vec![0.0, 0.5, 1.0]);
        let bad = GridConfig { dt: 0.3, ..g };
        assert!(matches!(build_time_grid(&bad), Err(NfsError::Config(_))));
    }

    #[test]
    fn grid_spacing_has_no_drift() {
        let g = build_time_grid(&GridConfig::default()).unwrap();
        for (i, w) in g.windows(2).enumerate().step_by(997) {
            let step = w[1] - w[0];
            assert!((step - 0.005).abs() <= 2.0 * f64::EPSILON * w[1], "step {i}: {step}");
        }
    }

    #[test]
    fn gaussian_values() {
        let pulse = PulseConfig::default();
        let grid = GridConfig {
            dt: 0.01,
            t_end: 2.0,
            n_slabs: 8,
        };
        let rec = gaussian_input(&pulse, &grid).unwrap();
        assert!((rec.samples[67].re - 1.0).abs() < 1e-12);
        assert!((rec.samples[77].re - (-1.0f64).exp()).abs() < 1e-12);
        assert!((rec.samples[57].re - 0.36788).abs() < 1e-5);
        assert!(rec.samples[0].re < 1e-19);
    }

    #[test]
    fn gaussian_is_symmetric_about_center() {
        // dt and t0 exactly representable, so t0 ± k·dt are exact grid times
        let pulse = PulseConfig { t0: 0.625, tau: 0.1 };
        let grid = GridConfig {
            dt: 0.0078125,
            t_end: 2.0,
            n_slabs: 8,
        };
        let rec = gaussian_input(&pulse, &grid).unwrap();
        let c = 80;
        assert_eq!(rec.samples[c].re, 1.0);
        for k in 1..80 {
            let a = rec.samples[c - k].re;
            let b = rec.samples[c + k].re;
            assert!((a - b).abs() <= 1e-15 * a.max(b), "k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn gaussian_requires_resolution() {
        let grid = GridConfig {
            dt: 0.02,
            t_end: 2.0,
            n_slabs: 8,
        };
        assert!(gaussian_input(&PulseConfig::default(), &grid).is_err());
    }

    #[test]
    fn angular_detuning_examples() {
        let c = NuclearConstants::default();
        assert!((angular_detuning(80.0, &c) - 0.567_375_886_5).abs() < 1e-9);
        assert_eq!(angular_detuning(0.0, &c), 0.0);
        assert!((angular_detuning(5.0, &c) - 0.035_460_992_9).abs() < 1e-9);
    }

    #[test]
    fn invariants_rejected() {
        let mut c = NuclearConstants::default();
        c.n_electronic.im = -1e-9;
        assert!(c.validate().is_err());
        assert!(PulseConfig { t0: 0.3, tau: 0.1 }.validate().is_err());
        let mut s = ScenarioConfig::default();
        s.targets[1].delta_over_gamma = 70.0;
        assert!(s.validate().is_err());
        let mut s = ScenarioConfig::default();
        s.grid.dt = 0.05;
        assert!(s.validate().is_err());
        assert!(ScenarioConfig::default().validate().is_ok());
    }
}
