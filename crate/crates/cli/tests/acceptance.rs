//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use lensscan_core::beam_optics::{
    lens_invert, lens_transform, nm_to_mm, GaussianBeamState, ThinLens,
};
use lensscan_core::modes_coupling::{
    coupling_efficiency, gaussian_coupling_closed_form, LGModeSpec, RadialField,
};
use lensscan_core::scan_estimation::{
    fit_scan, simulate_scan, ExperimentGeometry, FitOptions, Noise,
};
use lensscan_core::spdc_spectrum::{
    build_spectrum, optimal_signal_waist, spdc_amplitude_thin, thin_spiral_ratio, CrystalConfig,
    Kernel, PumpBeam,
};
use lensscan_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn check(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn z_plus_z_prime(waist: f64, z: f64, f: f64) -> f64 {
    let beam = GaussianBeamState::new(waist, 0.0, nm_to_mm(702.2)).unwrap();
    let after = lens_transform(&beam, &ThinLens::new(f, z).unwrap()).unwrap();
    after.waist_position()
}

fn lens_fixtures() -> Outcome {
    let cases = [
        (0.024, 115.1, 858.609),
        (0.026, 114.7, 867.346),
        (0.029, 114.5, 860.648),
    ];
    let mut report = Vec::new();
    for (waist, z, expected) in cases {
        let total = z_plus_z_prime(waist, z, 100.0);
        check((total / 852.0 - 1.0).abs() <= 0.025, || {
            format!("({waist}, {z}): z + z' = {total:.3} mm")
        })?;
        check((total - expected).abs() < 1e-3, || {
            format!("({waist}, {z}): z + z' = {total:.3}, expected {expected}")
        })?;
        report.push(format!("{total:.1}"));
    }
    Ok(format!("z + z' = {} mm vs 852 mm", report.join(", ")))
}

fn long_focus_fixtures() -> Outcome {
    let mut report = Vec::new();
    for (waist, z) in [(0.083, 281.6), (0.078, 282.6)] {
        let total = z_plus_z_prime(waist, z, 200.0);
        check(total.is_finite(), || format!("({waist}, {z}): non-finite"))?;
        report.push(format!("{total:.1}"));
    }
    Ok(format!(
        "z + z' = {} mm, {:+.1}% and {:+.1}% from 852 mm (reported, not enforced)",
        report.join(", "),
        (z_plus_z_prime(0.083, 281.6, 200.0) / 852.0 - 1.0) * 100.0,
        (z_plus_z_prime(0.078, 282.6, 200.0) / 852.0 - 1.0) * 100.0,
    ))
}

fn involution() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let waist = 10f64.powf(rng.random_range(-3.0..0.0));
        let lambda = nm_to_mm(rng.random_range(300.0..1600.0));
        let focal = rng.random_range(10.0..1000.0) * if rng.random_bool(0.5) { -1.0 } else { 1.0 };
        let lens_pos = rng.random_range(-500.0..500.0);
        let waist_pos = rng.random_range(-500.0..500.0);
        let beam = GaussianBeamState::new(waist, waist_pos, lambda).unwrap();
        let lens = ThinLens::new(focal, lens_pos).unwrap();
        let after = lens_transform(&beam, &lens).map_err(|e| e.to_string())?;
        let back = lens_invert(&after, &lens).map_err(|e| e.to_string())?;
        let width_err = (back.waist_width() / waist - 1.0).abs();
        let scale = (lens_pos - waist_pos).abs().max(focal.abs());
        let pos_err = (back.waist_position() - waist_pos).abs() / scale;
        worst = worst.max(width_err).max(pos_err);
    }
    check(worst <= 1e-9, || {
        format!("worst relative residual {worst:e}")
    })?;

    let lambda = nm_to_mm(702.2);
    let lens = ThinLens::new(100.0, 50.0).unwrap();
    let after = lens_transform(&GaussianBeamState::new(0.05, 0.0, lambda).unwrap(), &lens).unwrap();
    let z_prime = after.waist_position() - 50.0;
    check(
        (after.waist_width() - 0.097588).abs() < 5e-7 && (z_prime + 90.469).abs() < 5e-4,
        || format!("worked case gave ({}, {z_prime})", after.waist_width()),
    )?;
    let back = lens_invert(&after, &lens).unwrap();
    check(
        (back.waist_width() / 0.05 - 1.0).abs() <= 1e-9
            && (50.0 - back.waist_position() - 50.0).abs() <= 1e-9 * 100.0,
        || {
            format!(
                "worked case returned ({}, {})",
                back.waist_width(),
                50.0 - back.waist_position()
            )
        },
    )?;
    Ok(format!(
        "1000 random cases, worst residual {worst:.1e}; (0.05, 50) -> ({:.6}, {z_prime:.3}) -> ({:.6}, {:.6})",
        after.waist_width(),
        back.waist_width(),
        50.0 - back.waist_position()
    ))
}

fn coupling_oracle() -> Outcome {
    let widths: Vec<f64> = (0..20)
        .map(|i| 0.005 * 200f64.powf(i as f64 / 19.0))
        .collect();
    let mut worst: f64 = 0.0;
    for &wa in &widths {
        let a = RadialField::gaussian(wa).unwrap();
        for &wb in &widths {
            let b = RadialField::gaussian(wb).unwrap();
            let q = coupling_efficiency(&a, &b).map_err(|e| e.to_string())?;
            worst = worst.max((q - gaussian_coupling_closed_form(wa, wb)).abs());
        }
    }
    check(worst <= 1e-6, || format!("worst deviation {worst:e}"))?;
    let mut equal_worst: f64 = 0.0;
    for &w in &widths {
        let g = RadialField::gaussian(w).unwrap();
        equal_worst = equal_worst.max((coupling_efficiency(&g, &g).unwrap() - 1.0).abs());
    }
    check(equal_worst <= 1e-6, || {
        format!("equal widths off by {equal_worst:e}")
    })?;
    let lambda = nm_to_mm(702.2);
    let mut vortex: f64 = 0.0;
    for l in [-3, -1, 1, 2, 5] {
        let lg = RadialField::lg(LGModeSpec::new(l, 0, 0.1, lambda).unwrap());
        let q = coupling_efficiency(&lg, &RadialField::gaussian(0.1).unwrap()).unwrap();
        vortex = vortex.max(q);
    }
    check(vortex <= 1e-10, || {
        format!("LG(l != 0) to Gaussian gave {vortex:e}")
    })?;
    Ok(format!(
        "20x20 grid worst |quadrature - closed form| = {worst:.1e}; equal widths within {equal_worst:.1e}; vortex {vortex:.1e}"
    ))
}

fn spiral_spectrum() -> Outcome {
    let lambda_p = nm_to_mm(351.1);
    let pump = PumpBeam::new(0.5, lambda_p).unwrap();
    let lambda_s = pump.down_converted_wavelength();
    let mut worst: f64 = 0.0;
    for ratio in [0.25, 0.5, 1.0, 2.0] {
        let w0 = ratio * 0.5;
        let r = thin_spiral_ratio(w0, 0.5);
        let amp = |l: i32| {
            let s = LGModeSpec::new(l, 0, w0, lambda_s).unwrap();
            let i = LGModeSpec::new(-l, 0, w0, lambda_s).unwrap();
            spdc_amplitude_thin(&pump, &s, &i).map(|c| c.norm())
        };
        let c00 = amp(0).map_err(|e| e.to_string())?;
        for l in -5i32..=5 {
            let ratio_got = amp(l).map_err(|e| e.to_string())? / c00;
            worst = worst.max((ratio_got - r.powi(l.abs())).abs());
        }
    }
    check(worst <= 1e-6, || {
        format!("worst |C_l,-l/C_00 - r^|l|| = {worst:e}")
    })?;

    let spectrum = build_spectrum(&pump, 0.5, 8, 0, &Kernel::Thin).map_err(|e| e.to_string())?;
    let p00 = spectrum
        .fundamental_weight_corrected()
        .ok_or("no truncation weight")?;
    check((p00 - 5.0 / 13.0).abs() <= 1e-6, || {
        format!("P00 = {p00}, expected 5/13")
    })?;

    let pumps = [1.0, 0.5, 0.2, 0.1, 0.05, 0.03];
    let mut weights = Vec::new();
    for wp in pumps {
        let pump = PumpBeam::new(wp, lambda_p).unwrap();
        let s = build_spectrum(&pump, 0.024, 8, 0, &Kernel::Thin).map_err(|e| e.to_string())?;
        weights.push(
            s.fundamental_weight_corrected()
                .ok_or("no truncation weight")?,
        );
    }
    check(weights.windows(2).all(|w| w[1] > w[0]), || {
        format!("P00 over decreasing pump waist: {weights:?}")
    })?;
    Ok(format!(
        "spiral ratio worst {worst:.1e}; P00(w0 = wp) = {p00:.8} vs 5/13; P00 rises {:.2e} -> {:.2e} as wp 1 -> 0.03 mm",
        weights[0],
        weights[weights.len() - 1]
    ))
}

fn optimum_existence() -> Outcome {
    let pump = PumpBeam::new(0.5, nm_to_mm(351.1)).unwrap();
    let finite = Kernel::FiniteLength(CrystalConfig::default());
    let best = optimal_signal_waist(&pump, &finite, 0.005, 0.5).map_err(|e| e.to_string())?;
    check(best.waist > 0.005 && best.waist < 0.5, || {
        format!("optimum at {}", best.waist)
    })?;
    match optimal_signal_waist(&pump, &Kernel::Thin, 0.005, 0.5) {
        Err(Error::NoInteriorMaximum { .. }) => {}
        other => return Err(format!("thin kernel gave {other:?}")),
    }
    Ok(format!(
        "finite kernel optimum w0 = {:.6} mm (|C00| = {:.6}); thin kernel reports no interior maximum",
        best.waist, best.amplitude
    ))
}

fn estimation_round_trip() -> Outcome {
    let g = ExperimentGeometry::reference(100.0);
    let truth = GaussianBeamState::new(0.024, 0.0, g.wavelength).unwrap();
    let xs: Vec<f64> = (0..50).map(|i| 60.0 + 120.0 * i as f64 / 49.0).collect();

    let exact = simulate_scan(&g, &truth, &xs, 5000.0, 50.0, 1.0, Noise::Noiseless).unwrap();
    let fit = fit_scan(&exact, &g, &FitOptions::default()).map_err(|e| e.to_string())?;
    let rel = [
        (fit.params.waist / 0.024 - 1.0).abs(),
        fit.params.waist_position.abs(),
        (fit.params.amplitude / 5000.0 - 1.0).abs(),
        (fit.params.background / 50.0 - 1.0).abs(),
    ];
    let worst_exact = rel.iter().copied().fold(0.0, f64::max);
    check(worst_exact <= 1e-6, || {
        format!("noiseless recovery error {rel:?}")
    })?;

    let (mut waist_ok, mut position_ok, mut chi2_ok) = (0, 0, 0);
    for seed in 0..100 {
        let data =
            simulate_scan(&g, &truth, &xs, 5000.0, 50.0, 1.0, Noise::Poisson { seed }).unwrap();
        let fit =
            fit_scan(&data, &g, &FitOptions::default()).map_err(|e| format!("seed {seed}: {e}"))?;
        if (fit.params.waist / 0.024 - 1.0).abs() <= 0.03 {
            waist_ok += 1;
        }
        if fit.params.waist_position.abs() <= 2.0 {
            position_ok += 1;
        }
        if (0.5..=2.0).contains(&fit.reduced_chi2()) {
            chi2_ok += 1;
        }
    }
    check(waist_ok >= 95 && position_ok >= 95 && chi2_ok >= 95, || {
        format!("waist {waist_ok}/100, position {position_ok}/100, chi2/dof {chi2_ok}/100")
    })?;
    Ok(format!(
        "noiseless worst error {worst_exact:.1e}; Poisson: waist {waist_ok}/100, position {position_ok}/100, chi2/dof {chi2_ok}/100"
    ))
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lensscan"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let read = |p: &str| std::fs::read(Path::new(p)).map_err(|e| e.to_string());

    let geometry = path("geometry.json");
    std::fs::write(
        &geometry,
        r#"{"detector_plane_mm": 852, "lens_focal_mm": 100, "detector_mode_waist_mm": 0.157, "wavelength_nm": 702.2}"#,
    )
    .map_err(|e| e.to_string())?;

    let stdout_commands: Vec<Vec<&str>> = vec![
        vec![
            "lens", "--waist", "0.024", "--z", "115.1", "--lambda", "702.2", "--f", "100",
        ],
        vec![
            "lens",
            "--waist",
            "0.15667517355451202",
            "--z",
            "743.5093075102094",
            "--f",
            "100",
            "--invert",
        ],
        vec!["couple", "--wa", "0.05", "--wb", "0.1"],
        vec![
            "spectrum",
            "--pump-waist",
            "0.5",
            "--signal-waist",
            "0.5",
            "--lmax",
            "4",
        ],
        vec![
            "spectrum",
            "--lmax",
            "2",
            "--kernel",
            "finite",
            "--signal-waist",
            "0.1",
        ],
        vec!["optimal-waist"],
    ];
    for args in &stdout_commands {
        let first = run_cli(args)?;
        let second = run_cli(args)?;
        check(first == second, || format!("{args:?} differs between runs"))?;
    }

    let mut artifacts = Vec::new();
    for run in ["a", "b"] {
        let csv = path(&format!("scan_{run}.csv"));
        let svg = path(&format!("plot_{run}.svg"));
        run_cli(&[
            "simulate",
            "--geometry",
            &geometry,
            "--positions",
            "60:180:50",
            "--seed",
            "7",
            "--out",
            &csv,
        ])?;
        let fit = run_cli(&[
            "fit",
            "--scan",
            &csv,
            "--geometry",
            &geometry,
            "--emit-plot",
            &svg,
        ])?;
        artifacts.push((read(&csv)?, fit, read(&svg)?));
    }
    check(artifacts[0] == artifacts[1], || {
        "simulate/fit artifacts differ between runs".into()
    })?;
    Ok(format!(
        "{} commands byte-identical across two runs",
        stdout_commands.len() + 2
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (
            "lens-transform fixtures",
            lens_fixtures,
            Duration::from_secs(1),
        ),
        (
            "f = 200 mm fixtures",
            long_focus_fixtures,
            Duration::from_secs(1),
        ),
        ("involution", involution, Duration::from_secs(1)),
        ("coupling oracle", coupling_oracle, Duration::from_secs(10)),
        ("spiral spectrum", spiral_spectrum, Duration::from_secs(30)),
        (
            "optimum existence",
            optimum_existence,
            Duration::from_secs(60),
        ),
        (
            "estimation round-trip",
            estimation_round_trip,
            Duration::from_secs(300),
        ),
        ("cli determinism", cli_determinism, Duration::from_secs(30)),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > *limit => {
                Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}"))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!(
                "criterion {}: PASS  {name}: {detail} [{elapsed:.2?}]",
                i + 1
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "criterion {}: FAIL  {name}: {detail} [{elapsed:.2?}]",
                    i + 1
                );
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
