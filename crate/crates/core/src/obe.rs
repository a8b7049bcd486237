//! Optical-Bloch / field integration through one or two resonant targets.
//!
//! Each target is cut into `n_slabs` slabs. The coherences ρ₃₁ and ρ₄₂ live
//! at slab centers and obey
//!
//! ```text
//! ∂t ρ₃₁ = −[Γ/2 + iΔM(t)] ρ₃₁ + i(a/4) Ω
//! ∂t ρ₄₂ = −[Γ/2 − iΔM(t)] ρ₄₂ + i(a/4) Ω
//! ```
//!
//! The field lives on slab faces and is carried across the target in the
//! retarded frame, where the transit time is negligible and the wave
//! equation reduces to `∂y Ω = iη(ρ₃₁ + ρ₄₂) + κ Ω` with
//! `η = 2Γξ/(aL)` and `κ = −(k/2i)(n² − 1)`.

use num_complex::Complex64;

use crate::error::{NfsError, Result};
use crate::model::{angular_detuning, FieldRecord, GridConfig, NuclearConstants, TargetConfig};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Coherences of one target at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabState {
    pub rho31: Vec<Complex64>,
    pub rho42: Vec<Complex64>,
}

impl SlabState {
    pub fn zeros(n_slabs: usize) -> Self {
        Self {
            rho31: vec![Complex64::default(); n_slabs],
            rho42: vec![Complex64::default(); n_slabs],
        }
    }

    pub fn n_slabs(&self) -> usize {
        self.rho31.len()
    }

    fn first_non_finite(&self) -> Option<usize> {
        self.rho31
            .iter()
            .zip(&self.rho42)
            .position(|(a, b)| !(a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationCoefficients {
    /// η = 2Γξ/(aL), 1/(m·ns).
    pub eta: f64,
    /// κ = −(k/2i)(n² − 1), 1/m; zero when the electronic term is off.
    pub electronic_term: Complex64,
    /// L / n_slabs, m.
    pub slab_dy: f64,
}

impl PropagationCoefficients {
    pub fn new(target: &TargetConfig, constants: &NuclearConstants, n_slabs: usize) -> Self {
        let eta = 2.0 * constants.gamma * target.xi / (constants.cg_a * target.thickness_l);
        let electronic_term = if target.include_electronic {
            let n = constants.n_electronic;
            I * (0.5 * constants.k_xray) * (n * n - 1.0)
        } else {
            Complex64::default()
        };
        Self {
            eta,
            electronic_term,
            slab_dy: target.thickness_l / n_slabs as f64,
        }
    }
}

/// Rate constants of the two coherences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineParams {
    pub gamma: f64,
    pub cg_a: f64,
}

impl From<&NuclearConstants> for LineParams {
    fn from(c: &NuclearConstants) -> Self {
        Self {
            gamma: c.gamma,
            cg_a: c.cg_a,
        }
    }
}

/// Advances the coherences by one RK4 step under a field held fixed over the
/// step. `delta_m` holds `Δ·M` at the start, middle and end of the step.
pub fn step_coherences(
    state: &SlabState,
    omega_at_slabs: &[Complex64],
    delta_m: [f64; 3],
    line: LineParams,
    dt: f64,
    t: f64,
) -> Result<SlabState> {
    let n = state.n_slabs();
    if omega_at_slabs.len() != n {
        return Err(NfsError::config(format!(
            "field has {} slab values, state has {n}",
            omega_at_slabs.len()
        )));
    }
    let half_gamma = 0.5 * line.gamma;
    let drive = 0.25 * line.cg_a;
    let rate31 = |dm: f64| Complex64::new(-half_gamma, -dm);
    let rate42 = |dm: f64| Complex64::new(-half_gamma, dm);
    let step = |rho: &[Complex64], rate: &dyn Fn(f64) -> Complex64| -> Vec<Complex64> {
        rho.iter()
            .zip(omega_at_slabs)
            .map(|(&r, &om)| {
                let src = I * drive * om;
                let f = |y: Complex64, dm: f64| rate(dm) * y + src;
                let k1 = f(r, delta_m[0]);
                let k2 = f(r + 0.5 * dt * k1, delta_m[1]);
                let k3 = f(r + 0.5 * dt * k2, delta_m[1]);
                let k4 = f(r + dt * k3, delta_m[2]);
                r + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            })
            .collect()
    };
    let next = SlabState {
        rho31: step(&state.rho31, &rate31),
        rho42: step(&state.rho42, &rate42),
    };
    if let Some(slab) = next.first_non_finite() {
        return Err(NfsError::Instability {
            slab,
            time_ns: t + dt,
        });
    }
    Ok(next)
}

/// Field on every slab face given the entrance value; the last entry is the
/// exit field `Ω(L)`.
///
/// Trapezoidal in y with the coherence source sampled at slab centers.
pub fn transport_field(
    state: &SlabState,
    omega_in: Complex64,
    coeffs: &PropagationCoefficients,
) -> Vec<Complex64> {
    let mut faces = vec![Complex64::default(); state.n_slabs() + 1];
    transport_into(&state.rho31, &state.rho42, omega_in, coeffs, &mut faces);
    faces
}

fn transport_into(
    rho31: &[Complex64],
    rho42: &[Complex64],
    omega_in: Complex64,
    coeffs: &PropagationCoefficients,
    faces: &mut [Complex64],
) {
    let dy = coeffs.slab_dy;
    let half_k = 0.5 * dy * coeffs.electronic_term;
    let gain = (1.0 + half_k) / (1.0 - half_k);
    let src_scale = I * (coeffs.eta * dy) / (1.0 - half_k);
    faces[0] = omega_in;
    let mut om = omega_in;
    for ((a, b), face) in rho31.iter().zip(rho42).zip(faces[1..].iter_mut()) {
        om = gain * om + src_scale * (a + b);
        *face = om;
    }
}

/// RK4 integrator for the coupled coherence/field system of one target.
struct TargetStepper {
    coeffs: PropagationCoefficients,
    half_gamma: f64,
    drive: f64,
    rho31: Vec<Complex64>,
    rho42: Vec<Complex64>,
    faces: Vec<Complex64>,
    k31: [Vec<Complex64>; 4],
    k42: [Vec<Complex64>; 4],
    tmp31: Vec<Complex64>,
    tmp42: Vec<Complex64>,
}

impl TargetStepper {
    fn new(coeffs: PropagationCoefficients, line: LineParams, n: usize) -> Self {
        let z = || vec![Complex64::default(); n];
        Self {
            coeffs,
            half_gamma: 0.5 * line.gamma,
            drive: 0.25 * line.cg_a,
            rho31: z(),
            rho42: z(),
            faces: vec![Complex64::default(); n + 1],
            k31: [z(), z(), z(), z()],
            k42: [z(), z(), z(), z()],
            tmp31: z(),
            tmp42: z(),
        }
    }

    /// Transports `Ω_in` through the coherences `(r31, r42)` and writes
    /// their time derivatives into stage `k`. Returns the exit field.
    fn eval(&mut self, use_tmp: bool, omega_in: Complex64, delta_m: f64, k: usize) -> Complex64 {
        let (r31, r42) = if use_tmp {
            (&self.tmp31, &self.tmp42)
        } else {
            (&self.rho31, &self.rho42)
        };
        transport_into(r31, r42, omega_in, &self.coeffs, &mut self.faces);
        let a31 = Complex64::new(-self.half_gamma, -delta_m);
        let a42 = Complex64::new(-self.half_gamma, delta_m);
        let drive = 0.5 * self.drive;
        let (k31, k42) = (&mut self.k31[k], &mut self.k42[k]);
        for i in 0..r31.len() {
            let center = self.faces[i] + self.faces[i + 1];
            let src = Complex64::new(-drive * center.im, drive * center.re);
            k31[i] = a31 * r31[i] + src;
            k42[i] = a42 * r42[i] + src;
        }
        self.faces[r31.len()]
    }

    fn stage_state(&mut self, k: usize, h: f64) {
        for i in 0..self.rho31.len() {
            self.tmp31[i] = self.rho31[i] + h * self.k31[k][i];
            self.tmp42[i] = self.rho42[i] + h * self.k42[k][i];
        }
    }

    /// One RK4 step; returns the exit field at the start of the step.
    fn step(&mut self, omega: [Complex64; 3], delta_m: [f64; 3], dt: f64) -> Complex64 {
        let exit = self.eval(false, omega[0], delta_m[0], 0);
        self.stage_state(0, 0.5 * dt);
        self.eval(true, omega[1], delta_m[1], 1);
        self.stage_state(1, 0.5 * dt);
        self.eval(true, omega[1], delta_m[1], 2);
        self.stage_state(2, dt);
        self.eval(true, omega[2], delta_m[2], 3);
        let c = dt / 6.0;
        for i in 0..self.rho31.len() {
            self.rho31[i] += c
                * (self.k31[0][i] + 2.0 * (self.k31[1][i] + self.k31[2][i]) + self.k31[3][i]);
            self.rho42[i] += c
                * (self.k42[0][i] + 2.0 * (self.k42[1][i] + self.k42[2][i]) + self.k42[3][i]);
        }
        exit
    }

    fn exit_field(&mut self, omega_in: Complex64) -> Complex64 {
        transport_into(&self.rho31, &self.rho42, omega_in, &self.coeffs, &mut self.faces);
        self.faces[self.rho31.len()]
    }

    fn first_non_finite(&self) -> Option<usize> {
        self.rho31
            .iter()
            .zip(&self.rho42)
            .position(|(a, b)| !(a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite()))
    }
}

/// Midpoint value between samples `i` and `i + 1` by four-point cubic
/// interpolation (two-point at the record ends).
fn midpoint(samples: &[Complex64], i: usize) -> Complex64 {
    let n = samples.len();
    if i >= 1 && i + 2 < n {
        (9.0 * (samples[i] + samples[i + 1]) - samples[i - 1] - samples[i + 2]) / 16.0
    } else {
        0.5 * (samples[i] + samples[(i + 1).min(n - 1)])
    }
}

/// Exit field `Ω(L, t)` of one target driven by `input` at its entrance.
pub fn run_target(
    input: &FieldRecord,
    target: &TargetConfig,
    constants: &NuclearConstants,
    grid: &GridConfig,
) -> Result<FieldRecord> {
    target.validate()?;
    grid.validate()?;
    let n_steps = input.len() - 1;
    let dt = input.dt;
    if (dt - grid.dt).abs() > 1e-12 * grid.dt {
        return Err(NfsError::config(format!(
            "input record dt = {dt} differs from grid dt = {}",
            grid.dt
        )));
    }
    let delta = angular_detuning(target.delta_over_gamma, constants);
    let delta_m: Vec<f64> = target
        .schedule
        .profile_on_half_grid(dt, n_steps)
        .into_iter()
        .map(|m| delta * m)
        .collect();
    let coeffs = PropagationCoefficients::new(target, constants, grid.n_slabs);
    let mut stepper = TargetStepper::new(coeffs, constants.into(), grid.n_slabs);

    let samples = &input.samples;
    let mut out = Vec::with_capacity(samples.len());
    for i in 0..n_steps {
        let omega = [samples[i], midpoint(samples, i), samples[i + 1]];
        let dm = [delta_m[2 * i], delta_m[2 * i + 1], delta_m[2 * i + 2]];
        let exit = stepper.step(omega, dm, dt);
        if !(exit.re.is_finite() && exit.im.is_finite()) {
            return Err(NfsError::Instability {
                slab: stepper.first_non_finite().unwrap_or(grid.n_slabs - 1),
                time_ns: input.time(i),
            });
        }
        out.push(exit);
    }
    let last = stepper.exit_field(samples[n_steps]);
    if let Some(slab) = stepper.first_non_finite() {
        return Err(NfsError::Instability {
            slab,
            time_ns: input.time(n_steps),
        });
    }
    out.push(last);
    FieldRecord::new(input.t_start, dt, out)
}

/// Feeds each target's exit field into the next: `Ω₂(0, t) = Ω₁(L, t)`.
pub fn run_chain(
    input: &FieldRecord,
    targets: &[TargetConfig],
    constants: &NuclearConstants,
    grid: &GridConfig,
) -> Result<FieldRecord> {
    if targets.len() > 2 {
        return Err(NfsError::config(format!(
            "at most two targets are supported, got {}",
            targets.len()
        )));
    }
    let mut field = input.clone();
    for target in targets {
        field = run_target(&field, target, constants, grid)?;
    }
    Ok(field)
}
