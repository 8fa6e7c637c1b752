//! `lensscan`: Gaussian-beam lens transforms, mode coupling, SPDC mode
//! spectra and lens-scan waist estimation from the command line.
//!
//! Results go to stdout as one line of JSON. Failures print
//! `{"error": "..."}` to stderr and exit with 2 (invalid input),
//! 3 (numerical failure) or 4 (I/O).

mod error;
mod files;
mod json;
mod svg;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lensscan_core::beam_optics::{
    lens_invert, lens_transform, nm_to_mm, GaussianBeamState, ThinLens,
};
use lensscan_core::modes_coupling::{
    coupling_efficiency, gaussian_coupling_closed_form, LGModeSpec, RadialField,
};
use lensscan_core::scan_estimation::{
    coupling_at, fit_scan, simulate_scan, CouplingModel, FitOptions, Noise, ScanParams,
};
use lensscan_core::spdc_spectrum::{
    build_spectrum, optimal_signal_waist, thin_spiral_ratio, CrystalConfig, Kernel, PumpBeam,
};
use serde::Serialize;

use error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "lensscan",
    version,
    about = "Gaussian-beam lens scans and SPDC mode spectra"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Thin-lens waist transform, forward or inverted.
    Lens(LensArgs),
    /// Coupling efficiency between two Laguerre-Gaussian modes.
    Couple(CoupleArgs),
    /// Two-photon LG mode spectrum.
    Spectrum(SpectrumArgs),
    /// Signal waist maximizing the fundamental-mode amplitude.
    OptimalWaist(OptimalWaistArgs),
    /// Simulate a lens scan and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit a lens scan and report the source and post-lens waists.
    Fit(FitArgs),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct LensArgs {
    /// Waist width, mm (the post-lens waist with --invert).
    #[arg(long)]
    waist: f64,
    /// Waist-to-lens distance, mm (lens-to-waist distance with --invert).
    #[arg(long, conflicts_with_all = ["waist_pos", "lens_pos"])]
    z: Option<f64>,
    /// Absolute waist position, mm.
    #[arg(long)]
    waist_pos: Option<f64>,
    /// Absolute lens position, mm.
    #[arg(long, default_value_t = 0.0)]
    lens_pos: f64,
    /// Wavelength, nm.
    #[arg(long, default_value_t = 702.2)]
    lambda: f64,
    /// Focal length, mm.
    #[arg(long)]
    f: f64,
    /// Treat the given waist as the post-lens waist and recover the source.
    #[arg(long)]
    invert: bool,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct CoupleArgs {
    /// Waist of mode a, mm.
    #[arg(long)]
    wa: f64,
    /// Waist of mode b, mm.
    #[arg(long)]
    wb: f64,
    #[arg(long, default_value_t = 0)]
    la: i32,
    #[arg(long, default_value_t = 0)]
    pa: u32,
    #[arg(long, default_value_t = 0)]
    lb: i32,
    #[arg(long, default_value_t = 0)]
    pb: u32,
    /// Wavelength, nm.
    #[arg(long, default_value_t = 702.2)]
    lambda: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelChoice {
    Thin,
    Finite,
}

#[derive(Args)]
struct KernelArgs {
    /// Pump waist, mm.
    #[arg(long, default_value_t = 0.5)]
    pump_waist: f64,
    /// Pump wavelength, nm.
    #[arg(long, default_value_t = 351.1)]
    pump_lambda: f64,
    /// Crystal length for the finite kernel, mm.
    #[arg(long, default_value_t = 1.0)]
    crystal_length: f64,
    /// Gaussian approximation factor of the phase-matching sinc.
    #[arg(long, default_value_t = 0.455)]
    alpha: f64,
}

impl KernelArgs {
    fn pump(&self) -> CliResult<PumpBeam> {
        Ok(PumpBeam::new(self.pump_waist, nm_to_mm(self.pump_lambda))?)
    }

    fn kernel(&self, choice: KernelChoice) -> CliResult<Kernel> {
        Ok(match choice {
            KernelChoice::Thin => Kernel::Thin,
            KernelChoice::Finite => {
                Kernel::FiniteLength(CrystalConfig::new(self.crystal_length, self.alpha)?)
            }
        })
    }
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SpectrumArgs {
    #[command(flatten)]
    kernel_args: KernelArgs,
    /// Signal and idler basis waist, mm.
    #[arg(long, default_value_t = 0.5)]
    signal_waist: f64,
    #[arg(long, default_value_t = 4)]
    lmax: u32,
    #[arg(long, default_value_t = 0)]
    pmax: u32,
    #[arg(long, value_enum, default_value_t = KernelChoice::Thin)]
    kernel: KernelChoice,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct OptimalWaistArgs {
    #[command(flatten)]
    kernel_args: KernelArgs,
    #[arg(long, value_enum, default_value_t = KernelChoice::Finite)]
    kernel: KernelChoice,
    /// Search interval lower bound, mm.
    #[arg(long, default_value_t = 0.005)]
    lower: f64,
    /// Search interval upper bound, mm.
    #[arg(long, default_value_t = 0.5)]
    upper: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum CouplingChoice {
    Flat,
    Curvature,
}

impl From<CouplingChoice> for CouplingModel {
    fn from(c: CouplingChoice) -> Self {
        match c {
            CouplingChoice::Flat => CouplingModel::FlatPhase,
            CouplingChoice::Curvature => CouplingModel::CurvatureAware,
        }
    }
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    /// Geometry JSON; defaults to the 852 mm, f = 100 mm apparatus.
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// Source waist, mm.
    #[arg(long, default_value_t = 0.024)]
    omega0: f64,
    /// Source waist position, mm.
    #[arg(long, default_value_t = 0.0)]
    s0: f64,
    /// Amplitude A, counts/s.
    #[arg(long, default_value_t = 5000.0)]
    amplitude: f64,
    /// Background B, counts/s.
    #[arg(long, default_value_t = 50.0)]
    background: f64,
    /// Integration time per position, s.
    #[arg(long, default_value_t = 1.0)]
    integration_time: f64,
    /// Lens positions as start:stop:count, mm.
    #[arg(long, default_value = "60:180:50")]
    positions: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write exact model rates instead of Poisson samples.
    #[arg(long)]
    no_noise: bool,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct FitArgs {
    /// Scan CSV.
    #[arg(long)]
    scan: PathBuf,
    /// Geometry JSON; defaults to the 852 mm, f = 100 mm apparatus.
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// Starting point as omega0,s0,A,B.
    #[arg(long, allow_hyphen_values = true)]
    init: Option<String>,
    /// Write an SVG of data and fitted curve.
    #[arg(long)]
    emit_plot: Option<PathBuf>,
    /// Integration time per row, s, for Poisson uncertainties when the CSV has no sigma column.
    #[arg(long, default_value_t = 1.0)]
    integration_time: f64,
    #[arg(long, value_enum, default_value_t = CouplingChoice::Flat)]
    coupling: CouplingChoice,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let line = text
                .lines()
                .map(str::trim)
                .filter(|l| {
                    !l.is_empty()
                        && !l.starts_with("Usage:")
                        && !l.starts_with("For more information")
                })
                .map(|l| l.strip_prefix("error: ").unwrap_or(l))
                .collect::<Vec<_>>()
                .join(" ");
            return fail(&CliError::Validation(line));
        }
    };
    match run(cli.command) {
        Ok(stdout) => {
            let mut out = std::io::stdout().lock();
            if out
                .write_all(stdout.as_bytes())
                .and_then(|_| out.flush())
                .is_err()
            {
                return ExitCode::from(4);
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn fail(err: &CliError) -> ExitCode {
    let body = serde_json::json!({ "error": err.message() });
    eprintln!("{body}");
    err.exit_code()
}

fn run(command: Command) -> CliResult<String> {
    match command {
        Command::Lens(a) => lens(&a),
        Command::Couple(a) => couple(&a),
        Command::Spectrum(a) => spectrum(&a),
        Command::OptimalWaist(a) => optimal_waist(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Fit(a) => fit(&a),
    }
}

fn json_line<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = json::to_string(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct LensOutput {
    waist_mm: f64,
    waist_position_mm: f64,
    z_mm: f64,
    z_prime_mm: f64,
}

fn lens(a: &LensArgs) -> CliResult<String> {
    if !(a.lambda.is_finite() && a.lambda > 0.0) {
        return Err(CliError::Validation(format!(
            "invalid lambda: must be finite and > 0, got {}",
            a.lambda
        )));
    }
    let (waist_pos, lens_pos) = match (a.z, a.waist_pos) {
        (Some(z), None) if a.invert => (z, 0.0),
        (Some(z), None) => (0.0, z),
        (None, Some(w)) => (w, a.lens_pos),
        _ => {
            return Err(CliError::Validation(
                "give either --z or --waist-pos".into(),
            ))
        }
    };
    let beam = GaussianBeamState::new(a.waist, waist_pos, nm_to_mm(a.lambda))?;
    let lens = ThinLens::new(a.f, lens_pos)?;
    let out = if a.invert {
        let before = lens_invert(&beam, &lens)?;
        LensOutput {
            waist_mm: before.waist_width(),
            waist_position_mm: before.waist_position(),
            z_mm: lens_pos - before.waist_position(),
            z_prime_mm: waist_pos - lens_pos,
        }
    } else {
        let after = lens_transform(&beam, &lens)?;
        LensOutput {
            waist_mm: after.waist_width(),
            waist_position_mm: after.waist_position(),
            z_mm: lens_pos - waist_pos,
            z_prime_mm: after.waist_position() - lens_pos,
        }
    };
    json_line(&out)
}

#[derive(Serialize)]
struct CoupleOutput {
    efficiency: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_form: Option<f64>,
}

fn couple(a: &CoupleArgs) -> CliResult<String> {
    if !(a.lambda.is_finite() && a.lambda > 0.0) {
        return Err(CliError::Validation(format!(
            "invalid lambda: must be finite and > 0, got {}",
            a.lambda
        )));
    }
    let lambda = nm_to_mm(a.lambda);
    let mode_a = LGModeSpec::new(a.la, a.pa, a.wa, lambda)?;
    let mode_b = LGModeSpec::new(a.lb, a.pb, a.wb, lambda)?;
    let efficiency = coupling_efficiency(&RadialField::lg(mode_a), &RadialField::lg(mode_b))?;
    let fundamental = a.la == 0 && a.pa == 0 && a.lb == 0 && a.pb == 0;
    json_line(&CoupleOutput {
        efficiency,
        closed_form: fundamental.then(|| gaussian_coupling_closed_form(a.wa, a.wb)),
    })
}

#[derive(Serialize)]
struct SpectrumEntry {
    l1: i32,
    p1: u32,
    l2: i32,
    p2: u32,
    re: f64,
    im: f64,
    probability: f64,
}

#[derive(Serialize)]
struct SpectrumOutput {
    entries: Vec<SpectrumEntry>,
    fundamental_weight: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncation_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fundamental_weight_corrected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spiral_ratio: Option<f64>,
    fundamental_amplitude_abs: f64,
}

fn spectrum(a: &SpectrumArgs) -> CliResult<String> {
    let pump = a.kernel_args.pump()?;
    let kernel = a.kernel_args.kernel(a.kernel)?;
    let spec = build_spectrum(&pump, a.signal_waist, a.lmax, a.pmax, &kernel)?;
    let entries = spec
        .sorted_entries()
        .into_iter()
        .map(|(k, c)| SpectrumEntry {
            l1: k.l1,
            p1: k.p1,
            l2: k.l2,
            p2: k.p2,
            re: c.re,
            im: c.im,
            probability: c.norm_sqr(),
        })
        .collect();
    json_line(&SpectrumOutput {
        entries,
        fundamental_weight: spec.fundamental_weight(),
        truncation_weight: spec.truncation_weight,
        fundamental_weight_corrected: spec.fundamental_weight_corrected(),
        spiral_ratio: matches!(kernel, Kernel::Thin)
            .then(|| thin_spiral_ratio(a.signal_waist, a.kernel_args.pump_waist)),
        fundamental_amplitude_abs: spec.fundamental_amplitude.norm(),
    })
}

#[derive(Serialize)]
struct OptimalWaistOutput {
    waist_mm: f64,
    fundamental_amplitude_abs: f64,
}

fn optimal_waist(a: &OptimalWaistArgs) -> CliResult<String> {
    let pump = a.kernel_args.pump()?;
    let kernel = a.kernel_args.kernel(a.kernel)?;
    let best = optimal_signal_waist(&pump, &kernel, a.lower, a.upper)?;
    json_line(&OptimalWaistOutput {
        waist_mm: best.waist,
        fundamental_amplitude_abs: best.amplitude,
    })
}

fn parse_positions(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || {
        CliError::Validation(format!(
            "invalid positions `{spec}`: expected start:stop:count"
        ))
    };
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let [start, stop, count] = parts.as_slice() else {
        return Err(bad());
    };
    let start: f64 = start.parse().map_err(|_| bad())?;
    let stop: f64 = stop.parse().map_err(|_| bad())?;
    let count: usize = count.parse().map_err(|_| bad())?;
    if !(start.is_finite() && stop.is_finite()) || count == 0 || (count > 1 && stop <= start) {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    Ok((0..count)
        .map(|i| {
            if i + 1 == count {
                stop
            } else {
                start + (stop - start) * i as f64 / (count - 1) as f64
            }
        })
        .collect())
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn simulate(a: &SimulateArgs) -> CliResult<String> {
    let geometry = files::load_geometry(a.geometry.as_deref())?;
    let positions = parse_positions(&a.positions)?;
    let source = GaussianBeamState::new(a.omega0, a.s0, geometry.wavelength)?;
    let noise = if a.no_noise {
        Noise::Noiseless
    } else {
        Noise::Poisson { seed: a.seed }
    };
    let data = simulate_scan(
        &geometry,
        &source,
        &positions,
        a.amplitude,
        a.background,
        a.integration_time,
        noise,
    )?;
    let csv = files::format_scan(&data);
    match &a.out {
        Some(path) => {
            write_file(path, &csv)?;
            Ok(String::new())
        }
        None => Ok(csv),
    }
}

fn parse_init(spec: &str) -> CliResult<ScanParams> {
    let values: Vec<f64> = spec
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            CliError::Validation(format!("invalid init `{spec}`: expected omega0,s0,A,B"))
        })?;
    let [waist, waist_position, amplitude, background] = values.as_slice() else {
        return Err(CliError::Validation(format!(
            "invalid init `{spec}`: expected omega0,s0,A,B"
        )));
    };
    Ok(ScanParams {
        waist: *waist,
        waist_position: *waist_position,
        amplitude: *amplitude,
        background: *background,
    })
}

#[derive(Serialize)]
struct Convergence {
    iterations: usize,
    final_gradient_norm: f64,
    damping: f64,
    criterion: lensscan_core::lm::Convergence,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct FitOutput {
    omega0_mm: f64,
    s0_mm: f64,
    A_hz: f64,
    B_hz: f64,
    omega0_prime_mm: f64,
    z_prime_mm: f64,
    z_mm: f64,
    x_star_mm: f64,
    chi2: f64,
    dof: usize,
    /// Row-major over (omega0_mm, s0_mm, A_hz, B_hz).
    covariance: Vec<f64>,
    convergence: Convergence,
}

const PLOT_POINTS: usize = 400;

fn fit(a: &FitArgs) -> CliResult<String> {
    if !(a.integration_time.is_finite() && a.integration_time > 0.0) {
        return Err(CliError::Validation(format!(
            "invalid integration time: must be finite and > 0, got {}",
            a.integration_time
        )));
    }
    let geometry = files::load_geometry(a.geometry.as_deref())?;
    let data = files::load_scan(&a.scan, Some(a.integration_time))?;
    let options = FitOptions {
        initial: a.init.as_deref().map(parse_init).transpose()?,
        coupling: a.coupling.into(),
        ..FitOptions::default()
    };
    let result = fit_scan(&data, &geometry, &options)?;

    if let Some(path) = &a.emit_plot {
        let source = result.params.source(geometry.wavelength)?;
        let samples = data.samples();
        let first = samples[0].lens_position;
        let last = samples[samples.len() - 1].lens_position;
        let model = (0..PLOT_POINTS)
            .map(|i| {
                let x = first + (last - first) * i as f64 / (PLOT_POINTS - 1) as f64;
                let q = coupling_at(&geometry, &source, x, options.coupling)?;
                Ok((x, result.params.amplitude * q + result.params.background))
            })
            .collect::<CliResult<Vec<_>>>()?;
        let points: Vec<(f64, f64)> = samples
            .iter()
            .map(|s| (s.lens_position, s.count_rate))
            .collect();
        write_file(path, &svg::scan_plot(&points, &model))?;
    }

    json_line(&FitOutput {
        omega0_mm: result.params.waist,
        s0_mm: result.params.waist_position,
        A_hz: result.params.amplitude,
        B_hz: result.params.background,
        omega0_prime_mm: result.waist_prime,
        z_prime_mm: result.z_prime,
        z_mm: result.z,
        x_star_mm: result.peak_position,
        chi2: result.chi2,
        dof: result.dof,
        covariance: result.covariance.iter().flatten().copied().collect(),
        convergence: Convergence {
            iterations: result.report.iterations,
            final_gradient_norm: result.report.final_gradient_norm,
            damping: result.report.damping,
            criterion: result.report.criterion,
        },
    })
}
