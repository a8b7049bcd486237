//! Acceptance criteria at default grids. Each test prints one line:
//! `criterion NN PASS|FAIL <title>: <measurements>`.

mod common;

use std::io::Write;
use std::sync::OnceLock;

use num_complex::Complex64;

use nfs_core::analytic::{
    bessel_j1, scattered_field_one_target, scattered_field_two_target, ConvolutionMethod,
    Excitation, ResponseParams,
};
use nfs_core::experiments::{
    delta_rows, grid_convergence, preset, range_values, rectified_spectrum, resolve, run_experiment,
    run_sweep, ScenarioOutcome, SweepParameter, SweepSpec,
};
use nfs_core::model::{
    gaussian_input, FieldRecord, GridConfig, NuclearConstants, PulseConfig, SpectrumGrid,
    TargetConfig,
};
use nfs_core::obe::run_chain;
use nfs_core::spectral::{
    dtft_uniform, find_lines, normalized_spectrum, peak_metrics, SpectrumRecord,
};

struct Check {
    label: String,
    ok: bool,
}

fn check(label: impl Into<String>, ok: bool) -> Check {
    Check {
        label: label.into(),
        ok,
    }
}

fn verdict(n: u32, title: &str, checks: Vec<Check>) {
    let pass = checks.iter().all(|c| c.ok);
    let detail: Vec<String> = checks
        .iter()
        .map(|c| format!("{}{}", c.label, if c.ok { "" } else { " [x]" }))
        .collect();
    let line = format!(
        "criterion {n:02} {} {title}: {}",
        if pass { "PASS" } else { "FAIL" },
        detail.join("; ")
    );
    // written past the test harness capture so every line shows up
    let _ = writeln!(std::io::stdout().lock(), "{line}");
    assert!(pass, "{line}");
}

fn within(x: f64, center: f64, tol: f64) -> bool {
    (x - center).abs() <= tol
}

fn cached(slot: &'static OnceLock<ScenarioOutcome>, name: &str) -> &'static ScenarioOutcome {
    slot.get_or_init(|| run_experiment(&preset(name).unwrap()).unwrap())
}

fn fig2_single() -> &'static ScenarioOutcome {
    static SLOT: OnceLock<ScenarioOutcome> = OnceLock::new();
    cached(&SLOT, "fig2-single")
}

fn fig2_fifty() -> &'static ScenarioOutcome {
    static SLOT: OnceLock<ScenarioOutcome> = OnceLock::new();
    cached(&SLOT, "fig2-fifty")
}

fn fig3_type3() -> &'static ScenarioOutcome {
    static SLOT: OnceLock<ScenarioOutcome> = OnceLock::new();
    cached(&SLOT, "fig3-type3")
}

fn fig5() -> &'static ScenarioOutcome {
    static SLOT: OnceLock<ScenarioOutcome> = OnceLock::new();
    cached(&SLOT, "fig5-scan")
}

fn fig4(tau_d: f64) -> ScenarioOutcome {
    let mut cfg = preset("fig4-scan").unwrap();
    cfg.switching.as_mut().unwrap().tau_d = tau_d;
    run_experiment(&cfg).unwrap()
}

fn fig4_pair() -> &'static (ScenarioOutcome, ScenarioOutcome) {
    static SLOT: OnceLock<(ScenarioOutcome, ScenarioOutcome)> = OnceLock::new();
    SLOT.get_or_init(|| (fig4(4.2), fig4(6.6)))
}

fn rectified() -> &'static SpectrumRecord {
    static SLOT: OnceLock<SpectrumRecord> = OnceLock::new();
    SLOT.get_or_init(|| rectified_spectrum(&preset("fig2-single").unwrap().scenario).unwrap())
}

fn delta_sweep() -> &'static (SweepSpec, Vec<(f64, ScenarioOutcome)>) {
    static SLOT: OnceLock<(SweepSpec, Vec<(f64, ScenarioOutcome)>)> = OnceLock::new();
    SLOT.get_or_init(|| {
        let spec = SweepSpec {
            parameter: SweepParameter::DeltaOverGamma,
            values: range_values(20.0, 160.0, 10.0).unwrap(),
            base: preset("fig3-type3").unwrap(),
        };
        let points = run_sweep(&spec)
            .unwrap()
            .points
            .into_iter()
            .map(|(v, r)| (v, r.unwrap()))
            .collect();
        (spec, points)
    })
}

fn thin_sweep() -> &'static Vec<(f64, ScenarioOutcome)> {
    static SLOT: OnceLock<Vec<(f64, ScenarioOutcome)>> = OnceLock::new();
    SLOT.get_or_init(|| {
        let spec = SweepSpec {
            parameter: SweepParameter::TauD,
            values: range_values(0.0, 8.0, 1.0).unwrap(),
            base: preset("fig4-thin").unwrap(),
        };
        run_sweep(&spec)
            .unwrap()
            .points
            .into_iter()
            .map(|(v, r)| (v, r.unwrap()))
            .collect()
    })
}

#[test]
fn c01_oracle_equivalence() {
    let c = NuclearConstants::default();
    let grid = GridConfig::default();
    let input = gaussian_input(&PulseConfig::default(), &grid).unwrap();
    let mut checks = Vec::new();
    for xi in [5.0, 15.0, 30.0] {
        for delta in [5.0, 80.0] {
            let target = TargetConfig {
                xi,
                delta_over_gamma: delta,
                include_electronic: false,
                ..TargetConfig::default()
            };
            let p = ResponseParams::from_target(&target, &c);
            let one = run_chain(&input, std::slice::from_ref(&target), &c, &grid).unwrap();
            let one_ref =
                scattered_field_one_target(&p, Excitation::Field(&input), ConvolutionMethod::Fft)
                    .unwrap();
            let e1 = one.relative_l2(&one_ref.smooth).unwrap();
            let two = run_chain(&input, &[target.clone(), target.clone()], &c, &grid).unwrap();
            let two_ref = scattered_field_two_target(
                &p,
                &p,
                Excitation::Field(&input),
                ConvolutionMethod::Fft,
            )
            .unwrap();
            let e2 = two.relative_l2(&two_ref.smooth).unwrap();
            checks.push(check(
                format!("xi {xi} delta {delta}: one {e1:.1e} two {e2:.1e}"),
                e1 < 0.02 && e2 < 0.02,
            ));
        }
    }
    verdict(1, "OBE vs delta-response model (< 2% L2)", checks);
}

#[test]
fn c02_single_switch_maximum() {
    let max = fig2_single().spectrum.max();
    verdict(
        2,
        "single simultaneous switch, max S = 5.8 +- 0.6",
        vec![check(format!("max S {max:.3}"), within(max, 5.8, 0.6))],
    );
}

#[test]
fn c03_fifty_switches() {
    let o = fig2_fifty();
    let last = o.scenario.targets[0].schedule.switch_times.last().copied().unwrap();
    let s0 = o.spectrum.value_near(0.0);
    let central = peak_metrics(&o.spectrum, -15.0, 15.0).unwrap();
    let two_delta = 2.0 * o.scenario.targets[0].delta_over_gamma;
    let lines = find_lines(&o.spectrum, 0.05);
    let near = |c: f64| lines.iter().any(|l| within(l.center, c, 5.0));
    verdict(
        3,
        "fifty node switches in 300 ns",
        vec![
            check(format!("50 switches, last {last:.2} ns"), o.scenario.targets[0].schedule.switch_times.len() == 50 && last < 300.0),
            check(format!("S(0) {s0:.3} in [10, 12]"), (10.0..=12.0).contains(&s0)),
            check(format!("central FWHM {:.3}", central.fwhm), within(central.fwhm, 4.0, 0.5)),
            check(format!("lines near +-{two_delta}"), near(two_delta) && near(-two_delta)),
        ],
    );
}

#[test]
fn c04_rectified_maximum() {
    let s0 = rectified().value_near(0.0);
    verdict(
        4,
        "rectified field, S(0) = 11 +- 1",
        vec![check(format!("S(0) {s0:.3}"), within(s0, 11.0, 1.0))],
    );
}

#[test]
fn c05_type3_lines() {
    let o = fig3_type3();
    let d = o.scenario.targets[0].delta_over_gamma;
    let inner = peak_metrics(&o.spectrum, d - 15.0, d - 0.01).unwrap();
    let outer = peak_metrics(&o.spectrum, d + 0.01, d + 15.0).unwrap();
    let max = o.spectrum.max();
    verdict(
        5,
        "type 3, height 8 +- 1, FWHM 3.4 / 3.9 +- 0.5",
        vec![
            check(format!("max S {max:.3}"), within(max, 8.0, 1.0)),
            check(
                format!("line {:.1} FWHM {:.3}", inner.center, inner.fwhm),
                within(inner.fwhm, 3.4, 0.5),
            ),
            check(
                format!("line {:.1} FWHM {:.3}", outer.center, outer.fwhm),
                within(outer.fwhm, 3.9, 0.5),
            ),
        ],
    );
}

#[test]
fn c06_type3_delta_sweep() {
    let (spec, points) = delta_sweep();
    let result = nfs_core::experiments::SweepResult {
        points: points.iter().map(|(v, o)| (*v, Ok(o.clone()))).collect(),
    };
    let rows = delta_rows(spec, &result);
    let last = rows.last().unwrap();
    let widest = rows
        .iter()
        .filter(|r| r.delta_over_gamma >= 40.0)
        .max_by(|a, b| a.fwhm.total_cmp(&b.fwhm))
        .unwrap();
    let curve: Vec<String> = rows
        .iter()
        .map(|r| format!("{}:{:.2}", r.delta_over_gamma, r.max_s))
        .collect();
    verdict(
        6,
        "type 3 Delta sweep saturates in [12, 14], FWHM < 4",
        vec![
            check(format!("max S {}", curve.join(" ")), (12.0..=14.0).contains(&last.max_s)),
            check(
                format!("widest FWHM {:.3} at {}", widest.fwhm, widest.delta_over_gamma),
                widest.fwhm < 4.0,
            ),
        ],
    );
}

#[test]
fn c07_delay_redistributes_lines() {
    let (a, b) = fig4_pair();
    let w85 = a.spectrum.max_in(80.0, 90.0);
    let w75 = a.spectrum.max_in(70.0, 80.0);
    let line = peak_metrics(&a.spectrum, 80.0, 95.0).unwrap();
    let r85 = b.spectrum.max_in(80.0, 90.0);
    let r75 = b.spectrum.max_in(70.0, 80.0);
    verdict(
        7,
        "tau_D 4.2 favours 85, 6.6 favours 75",
        vec![
            check(format!("4.2 ns: S85 {w85:.2} / S75 {w75:.2}"), w85 >= 2.0 * w75),
            check(format!("85 line FWHM {:.2}", line.fwhm), within(line.fwhm, 6.0, 1.0)),
            check(format!("6.6 ns: S75 {r75:.2} > S85 {r85:.2}"), r75 > r85),
        ],
    );
}

#[test]
fn c08_thin_target_lines() {
    let mut seen = Vec::new();
    let mut stray = Vec::new();
    let (mut low, mut high) = (false, false);
    for (tau_d, o) in thin_sweep() {
        let band = o.spectrum.max_in(60.0, 100.0);
        for l in find_lines(&o.spectrum, 0.0) {
            if !(60.0..=100.0).contains(&l.center) || l.height < 0.5 * band {
                continue;
            }
            seen.push(format!("{tau_d}:{:.2}", l.center));
            if within(l.center, 77.5, 1.0) {
                low = true;
            } else if within(l.center, 82.5, 1.0) {
                high = true;
            } else {
                stray.push(l.center);
            }
        }
    }
    verdict(
        8,
        "xi 5 lines at 77.5 and 82.5 +- 1",
        vec![
            check(format!("lines {}", seen.join(" ")), low && high),
            check(format!("{} lines elsewhere", stray.len()), stray.is_empty()),
        ],
    );
}

#[test]
fn c09_small_splitting_single_line() {
    let o = fig5();
    let s0 = o.spectrum.value_near(0.0);
    let line = peak_metrics(&o.spectrum, -15.0, 15.0).unwrap();
    // deepest point beside the central line
    let dip = o
        .spectrum
        .omega_over_gamma
        .iter()
        .zip(&o.spectrum.s_values)
        .filter(|(w, _)| (0.5 * line.fwhm..=20.0).contains(&w.abs()))
        .map(|(_, s)| *s)
        .fold(f64::INFINITY, f64::min);
    verdict(
        9,
        "Delta 5, tau_D -7: S(0) > 2, FWHM 3.4 +- 0.5, flanking dips",
        vec![
            check(format!("S(0) {s0:.3}"), s0 > 2.0),
            check(format!("FWHM {:.3}", line.fwhm), within(line.fwhm, 3.4, 0.5)),
            check(format!("dip {dip:.3}"), dip < 0.05 * s0),
        ],
    );
}

#[test]
fn c10_mirror_symmetry() {
    let mut spectra: Vec<(String, &SpectrumRecord)> = vec![
        ("fig2-single".into(), &fig2_single().spectrum),
        ("fig2-fifty".into(), &fig2_fifty().spectrum),
        ("rectified".into(), rectified()),
        ("fig3-type3".into(), &fig3_type3().spectrum),
        ("fig4 4.2".into(), &fig4_pair().0.spectrum),
        ("fig4 6.6".into(), &fig4_pair().1.spectrum),
        ("fig5".into(), &fig5().spectrum),
    ];
    for (d, o) in &delta_sweep().1 {
        spectra.push((format!("delta {d}"), &o.spectrum));
    }
    for (t, o) in thin_sweep() {
        spectra.push((format!("thin {t}"), &o.spectrum));
    }
    let (worst_name, worst) = spectra
        .iter()
        .map(|(n, s)| (n.clone(), s.mirror_asymmetry()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    verdict(
        10,
        "S(w) = S(-w) to 1%",
        vec![check(
            format!("{} spectra, worst {worst:.2e} ({worst_name})", spectra.len()),
            worst < 0.01,
        )],
    );
}

#[test]
fn c11_linearity_and_scale() {
    let cfg = preset("fig2-single").unwrap();
    let (mut scenario, _) = resolve(&cfg).unwrap();
    scenario.grid.t_end = 300.0;
    let c = scenario.constants;
    let grid = scenario.grid;
    let x = gaussian_input(&scenario.pulse, &grid).unwrap();
    let y = gaussian_input(&PulseConfig { t0: 1.3, tau: 0.15 }, &grid).unwrap();
    let (a, b) = (Complex64::new(0.7, -0.2), Complex64::new(-1.9, 0.4));
    let mix = x.combine(a, &y, b).unwrap();
    let run = |f: &FieldRecord| run_chain(f, &scenario.targets, &c, &grid).unwrap();
    let (ox, oy, om) = (run(&x), run(&y), run(&mix));
    let superposed = ox.combine(a, &oy, b).unwrap();
    let lin = om.relative_l2(&superposed).unwrap();

    let k = Complex64::new(1e3, 0.0);
    let big = run(&x.scaled(k));
    let area = big.relative_l2(&ox.scaled(k)).unwrap();
    let spec_grid = SpectrumGrid::default();
    let s = normalized_spectrum(&x, &ox, &spec_grid, c.gamma).unwrap();
    let s_big = normalized_spectrum(&x.scaled(k), &big, &spec_grid, c.gamma).unwrap();
    let scale = s
        .s_values
        .iter()
        .zip(&s_big.s_values)
        .map(|(p, q)| (p - q).abs() / s.max())
        .fold(0.0, f64::max);
    verdict(
        11,
        "linearity 1e-10, spectrum scale invariance 1e-12",
        vec![
            check(format!("superposition {lin:.1e}"), lin < 1e-10),
            check(format!("x1000 input {area:.1e}"), area < 1e-10),
            check(format!("S rescaled {scale:.1e}"), scale < 1e-12),
        ],
    );
}

#[test]
fn c12_numerics() {
    let mut xs: Vec<f64> = (0..=2000).map(|i| i as f64 * 0.5).collect();
    xs.extend((0..400).map(|i| 11.0 + i as f64 * 0.005));
    let j1_err = xs
        .iter()
        .map(|&x| (bessel_j1(x) - common::j1_oracle(x)).abs())
        .fold(0.0, f64::max);

    // free decay e^{−Γt/2}: Lorentzian of width Γ
    let gamma = 1.0 / 141.0;
    let decay = FieldRecord::new(
        0.0,
        0.05,
        (0..=60_000)
            .map(|i| Complex64::new((-0.5 * gamma * i as f64 * 0.05).exp(), 0.0))
            .collect(),
    )
    .unwrap();
    let lor = normalized_spectrum(
        &decay,
        &decay,
        &SpectrumGrid {
            omega_min: -5.0,
            omega_max: 5.0,
            omega_step: 0.01,
        },
        gamma,
    )
    .unwrap();
    let fwhm = peak_metrics(&lor, -5.0, 5.0).unwrap().fwhm;

    let scenario = resolve(&preset("fig2-single").unwrap()).unwrap().0;
    let halving = grid_convergence(&scenario).unwrap();

    let out = &fig2_single().output;
    let energy = out.energy();
    let span = 2.0 * std::f64::consts::PI / (2.0 * (out.len() - 1) as f64 * out.dt);
    let m = (80.0 / span) as usize + 1;
    let f = dtft_uniform(out, -40.0, span, m);
    let spectral_energy = f.iter().map(|z| z.norm_sqr()).sum::<f64>() * span / (2.0 * std::f64::consts::PI);
    let parseval = (spectral_energy / energy - 1.0).abs();

    verdict(
        12,
        "J1, Lorentzian FWHM, grid halving, Parseval",
        vec![
            check(format!("J1 max error {j1_err:.1e}"), j1_err < 1e-10),
            check(format!("Lorentzian FWHM {fwhm:.4}"), (fwhm - 1.0).abs() < 0.01),
            check(format!("grid halving {:.3}%", 100.0 * halving), halving < 0.005),
            check(format!("Parseval {:.2}%", 100.0 * parseval), parseval < 0.01),
        ],
    );
}
