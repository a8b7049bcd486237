//! Delta-pulse response model of one and two resonant targets.
//!
//! A target of resonant thickness ξ carries two Δm = 0 lines at ±Δ, each with
//! thickness ξ/2. A single line acts on a field `f` as
//! `L[f] = f − e^{iσΔΦ} (k ⊛ (e^{−iσΔΦ} f))` with the causal kernel
//! `k(τ) = Γ·(ξ/2)/√((ξ/2)Γτ) · J₁(2√((ξ/2)Γτ)) · e^{−Γτ/2}`,
//! where `σ = ±1` selects the line and `Φ(t) = ∫₀ᵗ M`. For an unperturbed
//! target the two lines commute and the exact exit field is `L₊L₋[f]`; with
//! switching they do not, and the symmetric average `(L₊L₋ + L₋L₊)/2` is used.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{NfsError, Result};
use crate::model::{angular_detuning, FieldRecord, NuclearConstants, TargetConfig};
use crate::switching::SwitchSchedule;

const SERIES_LIMIT: f64 = 12.0;

/// `J₁(x)`: ascending series below 12, Hankel asymptotic expansion above.
pub fn bessel_j1(x: f64) -> f64 {
    if x < 0.0 {
        return -bessel_j1(-x);
    }
    if x < SERIES_LIMIT {
        j1_series(x)
    } else {
        j1_asymptotic(x)
    }
}

fn j1_series(x: f64) -> f64 {
    let h = 0.5 * x;
    let h2 = h * h;
    let mut term = h;
    let mut sum = term;
    for k in 1..60 {
        term *= -h2 / (k as f64 * (k + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn j1_asymptotic(x: f64) -> f64 {
    const MU: f64 = 4.0;
    let eight_x = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0f64;
    let mut last = f64::INFINITY;
    for k in 1..80 {
        let odd = (2 * k - 1) as f64;
        let next = term * (MU - odd * odd) / (k as f64 * eight_x);
        if next.abs() >= last || next.abs() < 1e-17 {
            break;
        }
        last = next.abs();
        term = next;
        // terms alternate Q, P, Q, P ... with sign pattern +, −, −, +
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            q += sign * term;
        } else {
            p += sign * term;
        }
    }
    let chi = x - 0.75 * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// `ξ/√(ξu) · J₁(2√(ξu))` at `u = Γt`, with limit ξ at `u = 0`.
pub fn bessel_envelope(xi: f64, u: f64) -> f64 {
    let z = xi * u;
    if z < 1e-12 {
        // J₁(2√z)/√z = 1 − z/2 + …
        return xi * (1.0 - 0.5 * z);
    }
    let r = z.sqrt();
    xi / r * bessel_j1(2.0 * r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseParams {
    pub xi: f64,
    /// 1/ns.
    pub gamma: f64,
    /// rad/ns.
    pub delta: f64,
    pub schedule: SwitchSchedule,
}

impl ResponseParams {
    pub fn from_target(target: &TargetConfig, constants: &NuclearConstants) -> Self {
        Self {
            xi: target.xi,
            gamma: constants.gamma,
            delta: angular_detuning(target.delta_over_gamma, constants),
            schedule: target.schedule.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(NfsError::Domain(format!("xi must be >= 0, got {}", self.xi)));
        }
        if !(self.gamma > 0.0) {
            return Err(NfsError::Domain(format!("gamma must be > 0, got {}", self.gamma)));
        }
        self.schedule.validate()
    }

    fn per_line(&self) -> Self {
        Self {
            xi: 0.5 * self.xi,
            ..self.clone()
        }
    }
}

/// `W(t) = ξ/√(ξΓt) · J₁(2√(ξΓt)) · e^{−Γt/2 + iΔΦ(t)}` with `Φ(t) = t` when
/// the schedule is empty. Dimensionless, per unit Γt.
pub fn response_w(params: &ResponseParams, t: f64) -> Result<Complex64> {
    if !(t >= 0.0) {
        return Err(NfsError::Domain(format!("response time must be >= 0, got {t}")));
    }
    let envelope = bessel_envelope(params.xi, params.gamma * t) * (-0.5 * params.gamma * t).exp();
    let phase = params.delta * params.schedule.phase_integral(t);
    Ok(Complex64::from_polar(envelope, phase))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionMethod {
    #[default]
    Fft,
    /// O(N²) summation; reference implementation for short records.
    Direct,
}

/// Causal trapezoidal convolution `∫₀^{t_n} k(τ) g(t_n − τ) dτ` of two
/// sequences sampled from `t = 0` with step `dt`.
pub fn causal_convolution(
    kernel: &[Complex64],
    signal: &[Complex64],
    dt: f64,
    method: ConvolutionMethod,
) -> Vec<Complex64> {
    let n = kernel.len().min(signal.len());
    if n == 0 {
        return Vec::new();
    }
    let mut full = match method {
        ConvolutionMethod::Direct => (0..n)
            .map(|i| (0..=i).map(|j| kernel[j] * signal[i - j]).sum())
            .collect::<Vec<Complex64>>(),
        ConvolutionMethod::Fft => fft_linear(&kernel[..n], &signal[..n]),
    };
    for (i, v) in full.iter_mut().enumerate() {
        let ends = 0.5 * (kernel[0] * signal[i] + kernel[i] * signal[0]);
        *v = dt * (*v - ends);
    }
    full
}

fn fft_linear(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len();
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut fa = vec![Complex64::new(0.0, 0.0); size];
    let mut fb = fa.clone();
    fa[..n].copy_from_slice(a);
    fb[..n].copy_from_slice(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa.truncate(n);
    for v in &mut fa {
        *v *= scale;
    }
    fa
}

/// What drives the targets.
#[derive(Debug, Clone, Copy)]
pub enum Excitation<'a> {
    /// Unit delta pulse at `t = 0`, sampled on `n` points with step `dt`.
    Delta { dt: f64, n: usize },
    Field(&'a FieldRecord),
}

/// Exit field as `delta_weight · δ(t) + smooth(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteredField {
    pub delta_weight: Complex64,
    pub smooth: FieldRecord,
}

impl ScatteredField {
    fn from_excitation(input: Excitation<'_>) -> Result<Self> {
        match input {
            Excitation::Delta { dt, n } => Ok(Self {
                delta_weight: Complex64::new(1.0, 0.0),
                smooth: FieldRecord::new(0.0, dt, vec![Complex64::new(0.0, 0.0); n])?,
            }),
            Excitation::Field(f) => {
                if f.t_start != 0.0 {
                    return Err(NfsError::Domain(
                        "analytic response needs a record starting at t = 0".into(),
                    ));
                }
                Ok(Self {
                    delta_weight: Complex64::new(0.0, 0.0),
                    smooth: f.clone(),
                })
            }
        }
    }

    fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        Ok(Self {
            delta_weight: a * self.delta_weight + b * other.delta_weight,
            smooth: self
                .smooth
                .combine(Complex64::new(a, 0.0), &other.smooth, Complex64::new(b, 0.0))?,
        })
    }

    /// `∫ E(t) e^{iωt} dt` including the delta term.
    pub fn fourier(&self, omegas: &[f64]) -> Vec<Complex64> {
        crate::spectral::dtft(&self.smooth, omegas)
            .into_iter()
            .map(|z| z + self.delta_weight)
            .collect()
    }
}

struct LineOperator {
    kernel: Vec<Complex64>,
    /// `e^{iΔΦ(t_i)}`.
    rotation: Vec<Complex64>,
    dt: f64,
    method: ConvolutionMethod,
}

impl LineOperator {
    fn new(params: &ResponseParams, dt: f64, n: usize, method: ConvolutionMethod) -> Self {
        let line = params.per_line();
        let kernel = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                let u = line.gamma * t;
                Complex64::new(line.gamma * bessel_envelope(line.xi, u) * (-0.5 * u).exp(), 0.0)
            })
            .collect();
        let rotation = params
            .schedule
            .phase_on_grid(dt, n - 1)
            .into_iter()
            .map(|phi| Complex64::from_polar(1.0, params.delta * phi))
            .collect();
        Self {
            kernel,
            rotation,
            dt,
            method,
        }
    }

    /// Applies the line at `+Δ` (`sigma = 1`) or `−Δ` (`sigma = −1`).
    fn apply(&self, field: &ScatteredField, sigma: f64) -> Result<ScatteredField> {
        let rot = |i: usize| {
            if sigma > 0.0 {
                self.rotation[i]
            } else {
                self.rotation[i].conj()
            }
        };
        let f = &field.smooth.samples;
        let rotated: Vec<Complex64> = f.iter().enumerate().map(|(i, z)| rot(i).conj() * z).collect();
        let conv = causal_convolution(&self.kernel, &rotated, self.dt, self.method);
        let w = field.delta_weight;
        let samples = f
            .iter()
            .enumerate()
            .map(|(i, z)| z - rot(i) * (conv[i] + w * self.kernel[i]))
            .collect();
        Ok(ScatteredField {
            delta_weight: w,
            smooth: FieldRecord::new(0.0, self.dt, samples)?,
        })
    }
}

fn target_transfer(
    params: &ResponseParams,
    field: &ScatteredField,
    method: ConvolutionMethod,
) -> Result<ScatteredField> {
    params.validate()?;
    if params.xi == 0.0 {
        return Ok(field.clone());
    }
    let op = LineOperator::new(params, field.smooth.dt, field.smooth.len(), method);
    let plus_minus = op.apply(&op.apply(field, -1.0)?, 1.0)?;
    if params.schedule.is_empty() {
        return Ok(plus_minus);
    }
    let minus_plus = op.apply(&op.apply(field, 1.0)?, -1.0)?;
    plus_minus.combine(0.5, &minus_plus, 0.5)
}

/// `E₁ = input − W₁ ⊛ input` for one target.
pub fn scattered_field_one_target(
    params: &ResponseParams,
    input: Excitation<'_>,
    method: ConvolutionMethod,
) -> Result<ScatteredField> {
    target_transfer(params, &ScatteredField::from_excitation(input)?, method)
}

/// Four scattering paths through two targets:
/// `E₂ = input + s₁ + s₂ + s₁₂`, where `sⱼ` is scattered once in target j
/// only and `s₁₂` is scattered in both.
pub fn scattered_field_two_target(
    params1: &ResponseParams,
    params2: &ResponseParams,
    input: Excitation<'_>,
    method: ConvolutionMethod,
) -> Result<ScatteredField> {
    if params1.gamma != params2.gamma || params1.delta != params2.delta {
        return Err(NfsError::Domain("both targets must share Γ and Δ".into()));
    }
    let x = ScatteredField::from_excitation(input)?;
    let s1 = target_transfer(params1, &x, method)?.combine(1.0, &x, -1.0)?;
    let s2 = target_transfer(params2, &x, method)?.combine(1.0, &x, -1.0)?;
    let s12 = target_transfer(params2, &s1, method)?.combine(1.0, &s1, -1.0)?;
    x.combine(1.0, &s1, 1.0)?
        .combine(1.0, &s2, 1.0)?
        .combine(1.0, &s12, 1.0)
}

/// Multiplies `field` by a sign that starts at +1 and flips at `t_flip` and
/// at every later node.
pub fn rectified_max_field(field: &FieldRecord, t_flip: f64, nodes: &[f64]) -> Result<FieldRecord> {
    if nodes.windows(2).any(|w| w[1] < w[0]) {
        return Err(NfsError::Domain("nodes must be sorted".into()));
    }
    if let Some(&first) = nodes.first() {
        if first <= t_flip {
            return Err(NfsError::Domain(format!(
                "nodes must lie after t_flip = {t_flip}, first is {first}"
            )));
        }
    }
    let mut flips = Vec::with_capacity(nodes.len() + 1);
    flips.push(t_flip);
    flips.extend_from_slice(nodes);
    let mut next = 0;
    let mut sign = 1.0;
    let samples = field
        .samples
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let t = field.time(i);
            while next < flips.len() && t > flips[next] {
                sign = -sign;
                next += 1;
            }
            sign * z
        })
        .collect();
    FieldRecord::new(field.t_start, field.dt, samples)
}
