//! Magnetic-inversion schedules and temporal-node detection.
//!
//! A schedule with inversion instants `t_k` and transition duration `d`
//! defines the switching profile
//! `M(t) = Π_k −tanh((t − t_k) / (0.25 d))`, which is `+1` before the first
//! inversion and changes sign at every inversion.

use crate::error::{NfsError, Result};
use crate::model::FieldRecord;

/// Default magnetic transition duration, ns.
pub const DEFAULT_DURATION_NS: f64 = 2.0;

/// Minimum spacing between consecutive inversions, in units of `d`.
pub const MIN_SPACING_IN_D: f64 = 2.0;

/// tanh(12) = 1 − 7.6e-11; beyond this many widths a factor is ±1.
const SATURATION_WIDTHS: f64 = 12.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchSchedule {
    pub switch_times: Vec<f64>,
    pub duration_d: f64,
}

impl Default for SwitchSchedule {
    fn default() -> Self {
        Self::unperturbed()
    }
}

impl SwitchSchedule {
    pub fn unperturbed() -> Self {
        Self {
            switch_times: Vec::new(),
            duration_d: DEFAULT_DURATION_NS,
        }
    }

    pub fn new(switch_times: Vec<f64>, duration_d: f64) -> Result<Self> {
        let s = Self {
            switch_times,
            duration_d,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn single(t: f64, duration_d: f64) -> Result<Self> {
        Self::new(vec![t], duration_d)
    }

    pub fn is_empty(&self) -> bool {
        self.switch_times.is_empty()
    }

    /// Width of a tanh transition, `0.25 d`.
    pub fn width(&self) -> f64 {
        0.25 * self.duration_d
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_d > 0.0 && self.duration_d.is_finite()) {
            return Err(NfsError::config(format!(
                "switch duration_d must be > 0, got {}",
                self.duration_d
            )));
        }
        if let Some(t) = self.switch_times.iter().find(|t| !t.is_finite()) {
            return Err(NfsError::config(format!("non-finite switch time {t}")));
        }
        let min_gap = MIN_SPACING_IN_D * self.duration_d;
        for w in self.switch_times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(NfsError::config(format!(
                    "switch times must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
            if w[1] - w[0] < min_gap * (1.0 - 1e-12) {
                return Err(NfsError::config(format!(
                    "switches at {} and {} are closer than {} ns; transitions would overlap",
                    w[0], w[1], min_gap
                )));
            }
        }
        Ok(())
    }

    /// Switching profile `M(t)`.
    pub fn profile_value(&self, t: f64) -> f64 {
        let w = self.width();
        self.switch_times
            .iter()
            .map(|&tk| -((t - tk) / w).tanh())
            .product()
    }

    /// `Φ(t) = ∫₀ᵗ M(t') dt'`.
    pub fn phase_integral(&self, t: f64) -> f64 {
        if self.is_empty() || t == 0.0 {
            return t;
        }
        let (a, b, sign) = if t > 0.0 { (0.0, t, 1.0) } else { (t, 0.0, -1.0) };
        let w = self.width();
        let reach = SATURATION_WIDTHS * w;

        // Merge the transition zones that intersect [a, b].
        let mut zones: Vec<(f64, f64)> = Vec::new();
        for &tk in &self.switch_times {
            let lo = (tk - reach).max(a);
            let hi = (tk + reach).min(b);
            if lo >= hi {
                continue;
            }
            match zones.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => zones.push((lo, hi)),
            }
        }

        let mut total = 0.0;
        let mut cursor = a;
        for (lo, hi) in zones {
            if lo > cursor {
                total += gauss_legendre(|x| self.profile_value(x), cursor, lo);
            }
            let pieces = (4.0 * (hi - lo) / w).ceil().max(1.0) as usize;
            let h = (hi - lo) / pieces as f64;
            for p in 0..pieces {
                let x0 = lo + p as f64 * h;
                total += gauss_legendre(|x| self.profile_value(x), x0, x0 + h);
            }
            cursor = hi;
        }
        if b > cursor {
            total += gauss_legendre(|x| self.profile_value(x), cursor, b);
        }
        sign * total
    }

    /// `M` sampled every `dt/2` from 0: entry `k` is `M(k·dt/2)`.
    pub fn profile_on_half_grid(&self, dt: f64, n_steps: usize) -> Vec<f64> {
        if self.is_empty() {
            return vec![1.0; 2 * n_steps + 1];
        }
        (0..=2 * n_steps)
            .map(|k| self.profile_value(k as f64 * 0.5 * dt))
            .collect()
    }

    /// `Φ(i·dt)` for `i = 0..=n_steps`, accumulated with Simpson's rule per
    /// interval.
    pub fn phase_on_grid(&self, dt: f64, n_steps: usize) -> Vec<f64> {
        if self.is_empty() {
            return (0..=n_steps).map(|i| i as f64 * dt).collect();
        }
        let m = self.profile_on_half_grid(dt, n_steps);
        let mut phase = Vec::with_capacity(n_steps + 1);
        let mut acc = 0.0;
        phase.push(0.0);
        for i in 0..n_steps {
            acc += dt / 6.0 * (m[2 * i] + 4.0 * m[2 * i + 1] + m[2 * i + 2]);
            phase.push(acc);
        }
        phase
    }

    /// Shifts every inversion by `offset` ns.
    pub fn shifted(&self, offset: f64) -> Result<Self> {
        Self::new(
            self.switch_times.iter().map(|t| t + offset).collect(),
            self.duration_d,
        )
    }
}

fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    half * NODES
        .iter()
        .zip(WEIGHTS)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
}

/// The four switching arrangements of the two-target system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchingType {
    /// Both fields inverted simultaneously.
    Simultaneous = 1,
    /// Only the upstream target.
    UpstreamOnly = 2,
    /// Only the downstream target.
    DownstreamOnly = 3,
    /// Both, the downstream one delayed by `tau_d`.
    Delayed = 4,
}

impl TryFrom<u8> for SwitchingType {
    type Error = NfsError;

    fn try_from(tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(Self::Simultaneous),
            2 => Ok(Self::UpstreamOnly),
            3 => Ok(Self::DownstreamOnly),
            4 => Ok(Self::Delayed),
            other => Err(NfsError::config(format!(
                "schedule_type must be 1, 2, 3 or 4, got {other}"
            ))),
        }
    }
}

/// Schedules for (target 1, target 2) of a switching type.
pub fn make_type_schedules(
    kind: SwitchingType,
    t1: f64,
    tau_d: f64,
    d: f64,
) -> Result<(SwitchSchedule, SwitchSchedule)> {
    if !(t1 > 0.0) {
        return Err(NfsError::config(format!("t1 must be > 0, got {t1}")));
    }
    let one = || SwitchSchedule::single(t1, d);
    let none = || SwitchSchedule::new(Vec::new(), d);
    match kind {
        SwitchingType::Simultaneous => Ok((one()?, one()?)),
        SwitchingType::UpstreamOnly => Ok((one()?, none()?)),
        SwitchingType::DownstreamOnly => Ok((none()?, one()?)),
        SwitchingType::Delayed => {
            let t2 = t1 + tau_d;
            if !(t2 > 0.0) {
                return Err(NfsError::config(format!(
                    "t1 + tau_d must be > 0, got {t2}"
                )));
            }
            Ok((one()?, SwitchSchedule::single(t2, d)?))
        }
    }
}

/// Local minima of `|Ω(t)|²` for `t > t_min`, refined by a parabola through
/// the three samples around each discrete minimum.
pub fn detect_nodes(field: &FieldRecord, t_min: f64) -> Vec<f64> {
    let y = field.intensity();
    let mut nodes = Vec::new();
    for i in 1..y.len().saturating_sub(1) {
        let t = field.time(i);
        if t <= t_min {
            continue;
        }
        if y[i] < y[i - 1] && y[i] <= y[i + 1] {
            let curvature = y[i - 1] - 2.0 * y[i] + y[i + 1];
            let offset = if curvature > 0.0 {
                (0.5 * (y[i - 1] - y[i + 1]) / curvature).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            nodes.push(t + offset * field.dt);
        }
    }
    nodes
}

/// Drops every pair of consecutive nodes closer than `MIN_SPACING_IN_D · d`.
///
/// Such a pair is a dynamical-beat zero sitting next to a quantum-beat node.
/// Inverting at both would undo itself, and the schedule could not resolve
/// the two transitions anyway.
pub fn cancel_close_pairs(nodes: &[f64], d: f64) -> Vec<f64> {
    let gap = MIN_SPACING_IN_D * d;
    let mut kept = Vec::with_capacity(nodes.len());
    let mut i = 0;
    while i < nodes.len() {
        if i + 1 < nodes.len() && nodes[i + 1] - nodes[i] < gap {
            i += 2;
        } else {
            kept.push(nodes[i]);
            i += 1;
        }
    }
    kept
}

/// Inversions at the first `n_switches` nodes after `nodes[0]`, with close
/// pairs cancelled.
pub fn node_schedule(nodes: &[f64], n_switches: usize, d: f64) -> Result<SwitchSchedule> {
    if n_switches == 0 {
        return SwitchSchedule::new(Vec::new(), d);
    }
    let usable = cancel_close_pairs(nodes.get(1..).unwrap_or(&[]), d);
    if usable.len() < n_switches {
        return Err(NfsError::InsufficientNodes {
            needed: n_switches + 1,
            found: usable.len() + nodes.len().min(1),
        });
    }
    SwitchSchedule::new(usable[..n_switches].to_vec(), d)
}
