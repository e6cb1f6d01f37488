use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use tfqkd_core::channel::ChannelParams;
use tfqkd_core::keyrate::{
    analyze, crossover, linear_bound, simulated_scenario, sweep, total_loss_db, total_transmittance,
    Crossover, KeyRateReport, MuPolicy, PipelineOptions, Scenario, SweepPoint,
};
use tfqkd_core::leakage::{
    analytic_backend, invert_key_rate, BivariateEntropyForm, CalibrationBackend, LeakageBackend,
    ParitySectorProvider,
};
use tfqkd_core::phasesim::{simulate, SessionTrace};

use crate::config::{BackendChoice, Settings, SweepMu};
use crate::data::{self, ExperimentDataFile, ExperimentRecord};
use crate::error::{CliError, Result};
use crate::fixtures;
use crate::output::{write_atomic, Footer};

pub const REPORT_HEADER: &str =
    "distance_km,loss_db,Q,e,I_AE_u,R,R_LB,beats_bound,leakage_provenance,lp_relaxation";

fn options(settings: &Settings) -> PipelineOptions {
    PipelineOptions {
        cutoff: settings.cutoff,
        reading: settings.reading,
        relax: settings.relax,
        ec_efficiency: settings.ec_efficiency,
    }
}

/// Anchors `(distance, I)` obtained by inverting published key rates with the
/// gain and error rate recorded at the same distance.
pub fn calibration_from(settings: &Settings, data: &ExperimentDataFile) -> Result<CalibrationBackend> {
    let text = fixtures::load(&settings.anchors)?;
    let rates = data::parse_anchor_rates(&settings.anchors, &text)?;
    let mut anchors = Vec::with_capacity(rates.len());
    for (km, rate) in rates {
        let record = data.record_at(km).ok_or_else(|| {
            CliError::Config(format!("anchor at {km} km has no data record to invert against"))
        })?;
        let leakage = invert_key_rate(record.q_code.get(), record.e_code, rate, settings.ec_efficiency);
        anchors.push((km, leakage));
    }
    Ok(CalibrationBackend::from_pairs(anchors)?)
}

pub fn backend(settings: &Settings, data: Option<&ExperimentDataFile>) -> Result<Box<dyn LeakageBackend>> {
    Ok(match settings.backend {
        BackendChoice::Analytic => Box::new(analytic_backend(
            ParitySectorProvider,
            BivariateEntropyForm::grouped_binary(),
        )),
        BackendChoice::Calibration => {
            let owned;
            let data = match data {
                Some(d) => d,
                None => {
                    owned = data::load(&settings.data)?;
                    &owned
                }
            };
            Box::new(calibration_from(settings, data)?)
        }
    })
}

fn footer(settings: &Settings, backend: &dyn LeakageBackend) -> Footer {
    let mut f = Footer::default();
    f.push("config_sha256", &settings.hash)
        .push("seed", settings.seed)
        .push("backend", settings.backend)
        .push("leakage_provenance", backend.provenance());
    f
}

pub fn report_csv(reports: &[KeyRateReport]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{:e},{:e},{:e},{:e},{:e},{},\"{}\",{:e}",
            r.distance_km,
            (r.loss_db * 1e9).round() / 1e9,
            r.inputs.q_code.get(),
            r.inputs.e_code.get(),
            r.inputs.leakage,
            r.rate,
            r.linear_bound,
            r.beats_bound,
            r.leakage_provenance.replace('"', "\"\""),
            r.relaxation
        );
    }
    out
}

fn scenario_of(record: &ExperimentRecord) -> Scenario {
    Scenario {
        distance_km: record.distance_km,
        loss_db: total_loss_db(record.attenuation_db),
        schedule: record.schedule,
        yields: record.yields(),
    }
}

#[derive(Debug)]
pub struct AnalyzeOutput {
    pub reports: Vec<KeyRateReport>,
    pub path: PathBuf,
}

pub fn cmd_analyze(settings: &Settings, out: &Path) -> Result<AnalyzeOutput> {
    let data = data::load(&settings.data)?;
    let backend = backend(settings, Some(&data))?;
    let opts = options(settings);
    let reports = data
        .records
        .iter()
        .map(|r| analyze(&scenario_of(r), backend.as_ref(), &opts).map_err(CliError::from))
        .collect::<Result<Vec<_>>>()?;
    let text = report_csv(&reports) + &footer(settings, backend.as_ref()).render();
    let path = write_atomic(out, "analyze_report.csv", &text)?;
    Ok(AnalyzeOutput { reports, path })
}

#[derive(Debug)]
pub struct SimulateOutput {
    pub simulated: ExperimentDataFile,
    pub reports: Vec<KeyRateReport>,
    pub yields_path: PathBuf,
    pub report_path: PathBuf,
}

/// Forward-simulates every record of `targets` (or the configured channel
/// and schedule when `targets` is `None`) and analyzes the result.
pub fn cmd_simulate(settings: &Settings, targets: Option<&ExperimentDataFile>, out: &Path) -> Result<SimulateOutput> {
    let points: Vec<(ChannelParams, _)> = match targets {
        Some(file) => file
            .records
            .iter()
            .map(|r| (settings.channel.with_length(r.distance_km), r.schedule))
            .collect(),
        None => vec![(settings.channel, settings.schedule)],
    };
    let backend = backend(settings, None)?;
    let opts = options(settings);
    let mut simulated = ExperimentDataFile::default();
    let mut reports = Vec::new();
    for (params, schedule) in points {
        let scenario = simulated_scenario(&params, &schedule)?;
        let attenuation = params.loss_coeff_db_per_km * params.fibre_length_km;
        simulated.records.push(ExperimentRecord::from_yields(
            params.fibre_length_km,
            attenuation,
            schedule,
            &scenario.yields,
        )?);
        reports.push(analyze(&scenario, backend.as_ref(), &opts)?);
    }
    let foot = footer(settings, backend.as_ref()).render();
    let yields_path = write_atomic(out, "simulated_yields.csv", &(data::emit(&simulated) + &foot))?;
    let report_path = write_atomic(out, "simulate_report.csv", &(report_csv(&reports) + &foot))?;
    Ok(SimulateOutput {
        simulated,
        reports,
        yields_path,
        report_path,
    })
}

#[derive(Debug)]
pub struct SweepOutput {
    pub points: Vec<SweepPoint>,
    pub crossover: Option<Crossover>,
    pub path: PathBuf,
}

pub fn distances(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(from.is_finite() && to.is_finite() && from >= 0.0 && from <= to && step > 0.0) {
        return Err(CliError::Config(format!(
            "sweep needs 0 <= from <= to and step > 0, got {from}..{to} step {step}"
        )));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| from + k as f64 * step).collect())
}

pub fn cmd_sweep(settings: &Settings, out: &Path) -> Result<SweepOutput> {
    let km = distances(settings.sweep_from_km, settings.sweep_to_km, settings.sweep_step_km)?;
    let backend = backend(settings, None)?;
    let policy = match settings.sweep_mu {
        SweepMu::Fixed => MuPolicy::Fixed(settings.schedule),
        SweepMu::Optimize => MuPolicy::Optimize {
            nu1: settings.schedule.nu1.get(),
            nu2: settings.schedule.nu2.get(),
        },
    };
    let points = sweep(&settings.channel, &km, policy, backend.as_ref(), &options(settings))?;
    let cross = crossover(&points);

    let mut text = String::from("distance_km,mu,R_sim,R_LB,beats_bound,error\n");
    for p in &points {
        let lb = linear_bound(total_transmittance(&settings.channel.with_length(p.distance_km)))?;
        let mu = p.mu.map_or(String::new(), |m| format!("{m:e}"));
        match &p.report {
            Ok(r) => {
                let _ = writeln!(text, "{},{mu},{:e},{:e},{},", p.distance_km, r.rate, lb, r.beats_bound);
            }
            Err(e) => {
                let msg = e.to_string().replace('"', "\"\"");
                let _ = writeln!(text, "{},{mu},,{:e},,\"{msg}\"", p.distance_km, lb);
            }
        }
    }
    let mut foot = footer(settings, backend.as_ref());
    match cross {
        Some(c) => {
            foot.push("crossover_km", c.first_beating_km);
            foot.push(
                "crossover_interpolated_km",
                c.interpolated_km.map_or("none".to_string(), |k| format!("{k:.3}")),
            );
        }
        None => {
            foot.push("crossover_km", "none");
            foot.push("crossover_interpolated_km", "none");
        }
    }
    text += &foot.render();
    let path = write_atomic(out, "sweep.csv", &text)?;
    Ok(SweepOutput {
        points,
        crossover: cross,
        path,
    })
}

#[derive(Debug)]
pub struct PhasesimOutput {
    pub trace: SessionTrace,
    pub path: PathBuf,
}

pub fn cmd_phasesim(settings: &Settings, out: &Path) -> Result<PhasesimOutput> {
    let trace = simulate(&settings.session, settings.duration_s, settings.seed)?;
    let mut foot = Footer::default();
    foot.push("config_sha256", &settings.hash)
        .push("seed", settings.seed)
        .push("controller", &trace.controller)
        .push("feedback", if settings.session.feedback_on { "on" } else { "off" })
        .push("mean_visibility", format!("{:.6}", trace.mean_visibility()))
        .push("mean_qber", format!("{:.6}", trace.mean_qber()))
        .push("signal_loss_windows", trace.signal_loss_windows);
    let path = write_atomic(out, "phasesim_trace.csv", &(trace.to_csv() + &foot.render()))?;
    Ok(PhasesimOutput { trace, path })
}
