use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use qwfs::configurations::{mirror_plane_field, Layout};
use qwfs::experiments::{
    least_squares_slope, phase_cluster_score, realization_medium, run_ensemble, solve_realization, sweep_doc,
    sweep_n, transmission_excess, Ensemble, EnsembleSummary, LinearFit, RunSpec, SweepPoint, DIAGNOSTIC_STREAM,
};
use qwfs::media::{save_dump, MediumKind};
use qwfs::numerics::RngStream;
use qwfs::shaping::OptimizerSpec;

use crate::config::{ConfigArgs, Settings};
use crate::error::{CliError, CliResult};
use crate::output::{num, row, sidecar_path, write_json, write_lines, HEADER};

/// The five layouts of the summary table.
const SUMMARY_SETUPS: [&str; 5] = ["1p-s", "2p-is", "2p-is-opc", "2p-ds", "2p-ds-opc"];
const SUMMARY_MODELS: [MediumKind; 2] = [MediumKind::HaarUnitary, MediumKind::GaussianIID];

/// Sweep points at or below this degree of control enter the low-control fit.
const LOW_DOC: f64 = 1.0 / 8.0;

fn describe(s: &EnsembleSummary) -> String {
    format!("{} {} n={} doc={}", s.config, s.model, s.n, s.doc)
}

fn ensure_some_succeeded(s: &EnsembleSummary) -> CliResult<()> {
    if s.failed == s.realizations {
        return Err(CliError::AllFailed(describe(s)));
    }
    Ok(())
}

#[derive(Serialize)]
struct RunSidecar<'a> {
    #[serde(flatten)]
    summary: &'a EnsembleSummary,
    seed: u64,
    baseline_mode: String,
    optimizer: &'a OptimizerSpec,
}

fn sidecar<'a>(spec: &'a RunSpec, summary: &'a EnsembleSummary, seed: u64) -> RunSidecar<'a> {
    RunSidecar {
        summary,
        seed,
        baseline_mode: spec.baseline.to_string(),
        optimizer: &spec.optimizer,
    }
}

pub fn run(args: ConfigArgs) -> CliResult<()> {
    let s = args.resolve()?;
    let (setup, model) = s.single()?;
    let spec = s.spec(setup, model)?;
    let output = s.output()?;
    let ensemble = run_ensemble(&spec, s.seed, s.realizations)?;
    let rows: Vec<String> = ensemble.records.iter().map(row).collect();
    write_lines(output, HEADER, rows.iter().map(String::as_str))?;
    let summary = &ensemble.summary;
    write_json(&sidecar_path(output), &sidecar(&spec, summary, s.seed))?;
    println!(
        "{}: mean η/N = {:.4} ± {:.4} over {} realizations ({} failed, {} unconverged) -> {}",
        describe(summary),
        summary.mean_eta_over_n,
        summary.std_eta_over_n,
        summary.realizations,
        summary.failed,
        summary.unconverged,
        output.display()
    );
    ensure_some_succeeded(summary)
}

/// Every (model, layout) pair of a multi-ensemble command, validated up front.
fn specs(s: &Settings, default_setups: &[&str], default_models: &[MediumKind]) -> CliResult<Vec<RunSpec>> {
    let setups = s.setups_or(default_setups)?;
    let mut out = Vec::new();
    for model in s.models_or(default_models) {
        for setup in &setups {
            out.push(s.spec(setup.clone(), model)?);
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct SummarySidecar<'a> {
    seed: u64,
    ensembles: Vec<&'a EnsembleSummary>,
}

pub fn summary(args: ConfigArgs) -> CliResult<()> {
    let s = args.resolve()?;
    let specs = specs(&s, &SUMMARY_SETUPS, &SUMMARY_MODELS)?;
    let ensembles = specs
        .iter()
        .map(|spec| run_ensemble(spec, s.seed, s.realizations))
        .collect::<Result<Vec<Ensemble>, _>>()?;

    println!("{:<20} {:<9} {:>8}   {:<8}", "configuration", "model", "η/N", "std");
    for e in &ensembles {
        let m = &e.summary;
        println!(
            "{:<20} {:<9} {:>8.4} ± {:<8.4}{}",
            m.config,
            m.model.label(),
            m.mean_eta_over_n,
            m.std_eta_over_n,
            if m.failed > 0 { format!(" ({} failed)", m.failed) } else { String::new() }
        );
    }
    if let Some(output) = &s.output {
        let rows: Vec<String> = ensembles.iter().flat_map(|e| e.records.iter().map(row)).collect();
        write_lines(output, HEADER, rows.iter().map(String::as_str))?;
        let side = SummarySidecar {
            seed: s.seed,
            ensembles: ensembles.iter().map(|e| &e.summary).collect(),
        };
        write_json(&sidecar_path(output), &side)?;
    }
    ensembles.iter().try_for_each(|e| ensure_some_succeeded(&e.summary))
}

#[derive(Serialize)]
struct PointSummary<'a> {
    sweep_value: f64,
    summary: &'a EnsembleSummary,
}

#[derive(Serialize)]
struct Series<'a> {
    config: String,
    model: MediumKind,
    points: Vec<PointSummary<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    low_doc_fit: Option<LinearFit>,
}

#[derive(Serialize)]
struct SweepSidecar<'a> {
    sweep: &'static str,
    seed: u64,
    realizations: usize,
    series: Vec<Series<'a>>,
}

/// Least-squares line of mean η/N against DOC over the low-control points.
fn low_doc_fit(points: &[SweepPoint]) -> CliResult<Option<LinearFit>> {
    let low: Vec<&SweepPoint> = points.iter().filter(|p| p.value <= LOW_DOC + 1e-12).collect();
    if low.len() < 2 {
        return Ok(None);
    }
    let xs: Vec<f64> = low.iter().map(|p| p.value).collect();
    let ys: Vec<f64> = low.iter().map(|p| p.ensemble.summary.mean_eta_over_n).collect();
    Ok(Some(least_squares_slope(&xs, &ys)?))
}

#[derive(Clone, Copy, PartialEq)]
enum Sweep {
    Doc,
    N,
}

fn sweep(args: ConfigArgs, kind: Sweep) -> CliResult<()> {
    let s = args.resolve()?;
    let output = s.output()?.to_path_buf();
    let bases = specs(&s, &["2p-ds"], &[MediumKind::HaarUnitary])?;
    let points_for = |base: &RunSpec| -> Vec<RunSpec> {
        match kind {
            Sweep::Doc => s.docs.iter().map(|&d| base.clone().with_doc(d)).collect(),
            Sweep::N => s.ns.iter().map(|&n| RunSpec { n, ..base.clone() }).collect(),
        }
    };
    let (name, empty) = match kind {
        Sweep::Doc => ("doc", s.docs.is_empty()),
        Sweep::N => ("n", s.ns.is_empty()),
    };
    if empty {
        return Err(CliError::Usage(format!("sweep-{name} needs a list of values (--{name}s or \"{name}s\")")));
    }
    for base in &bases {
        for spec in points_for(base) {
            spec.validate().map_err(CliError::Invalid)?;
        }
    }

    let mut all = Vec::new();
    for base in &bases {
        let points = match kind {
            Sweep::Doc => sweep_doc(base, &s.docs, s.seed, s.realizations)?,
            Sweep::N => sweep_n(base, &s.ns, s.seed, s.realizations)?,
        };
        let fit = if kind == Sweep::Doc { low_doc_fit(&points)? } else { None };
        for p in &points {
            let m = &p.ensemble.summary;
            println!("{} sweep_value={}: mean η/N = {:.4} ± {:.4}", describe(m), p.value, m.mean_eta_over_n, m.std_eta_over_n);
        }
        if let Some(f) = fit {
            println!("{} {}: low-DOC slope {:.4}, intercept {:.4}", base.setup.label(), base.model, f.slope, f.intercept);
        }
        all.push((base, points, fit));
    }

    let rows: Vec<String> = all
        .iter()
        .flat_map(|(_, points, _)| {
            points
                .iter()
                .flat_map(|p| p.ensemble.records.iter().map(move |r| format!("{},{}", num(p.value), row(r))))
        })
        .collect();
    write_lines(&output, &format!("sweep_value,{HEADER}"), rows.iter().map(String::as_str))?;
    let side = SweepSidecar {
        sweep: name,
        seed: s.seed,
        realizations: s.realizations,
        series: all
            .iter()
            .map(|(base, points, fit)| Series {
                config: base.setup.label(),
                model: base.model,
                points: points
                    .iter()
                    .map(|p| PointSummary {
                        sweep_value: p.value,
                        summary: &p.ensemble.summary,
                    })
                    .collect(),
                low_doc_fit: *fit,
            })
            .collect(),
    };
    write_json(&sidecar_path(&output), &side)?;
    all.iter()
        .flat_map(|(_, points, _)| points.iter())
        .try_for_each(|p| ensure_some_succeeded(&p.ensemble.summary))
}

pub fn sweep_doc_cmd(args: ConfigArgs) -> CliResult<()> {
    sweep(args, Sweep::Doc)
}

pub fn sweep_n_cmd(args: ConfigArgs) -> CliResult<()> {
    sweep(args, Sweep::N)
}

#[derive(Debug, Args)]
pub struct GenMatrixArgs {
    /// Medium model: unitary, gaussian, thin.
    #[arg(long)]
    pub model: MediumKind,
    #[arg(long)]
    pub n: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Realization index; the dump equals the medium of that realization.
    #[arg(long, default_value_t = 0)]
    pub realization: u64,
    /// Destination; `.json` selects the JSON format, anything else binary.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn gen_matrix(args: GenMatrixArgs) -> CliResult<()> {
    if args.n == 0 {
        return Err(CliError::Usage("n must be at least 1".into()));
    }
    let t = realization_medium(args.model, args.n, args.seed, args.realization)?;
    save_dump(&t, &args.out).map_err(|e| match e {
        qwfs::Error::Io(source) => CliError::Io {
            context: format!("writing {}", args.out.display()),
            source,
        },
        other => CliError::Runtime(other),
    })?;
    println!("{} n={} seed={} realization={} -> {}", args.model, args.n, args.seed, args.realization, args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct DiagnoseReport {
    config: String,
    model: MediumKind,
    n: usize,
    doc: f64,
    seed: u64,
    realization: u64,
    eta_over_n: f64,
    cluster_score: f64,
    unweighted_cluster_score: f64,
    cluster_centers: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    transmission_excess: Option<f64>,
}

pub fn diagnose(args: ConfigArgs) -> CliResult<()> {
    let s = args.resolve()?;
    let (setup, model) = s.single()?;
    if setup.layout != Layout::TwoPhotonDetectionShaping {
        return Err(CliError::Usage(format!(
            "diagnose analyses detection shaping runs, not {}",
            setup.label()
        )));
    }
    let spec = s.spec(setup, model)?;
    let output = s.output()?;
    let sol = solve_realization(&spec, s.seed, s.realization)?;
    let mask = sol.mask.as_ref().ok_or_else(|| CliError::AllFailed(describe_record(&sol.record)))?;
    let field = mirror_plane_field(&sol.transmission, mask, sol.configuration.alpha)?;
    let rows: Vec<String> = field
        .iter()
        .enumerate()
        .map(|(k, z)| format!("{k},{},{}", num(z.arg()), num(z.norm())))
        .collect();
    write_lines(output, "mode,phase,modulus", rows.iter().map(String::as_str))?;

    let score = phase_cluster_score(&field)?;
    let excess = match model {
        MediumKind::GaussianIID => {
            let stream = RngStream::new(s.seed, s.realization).child(DIAGNOSTIC_STREAM);
            Some(transmission_excess(&sol.transmission, &sol.configuration, mask, stream)?)
        }
        _ => None,
    };
    let report = DiagnoseReport {
        config: sol.record.config.clone(),
        model,
        n: spec.n,
        doc: spec.doc,
        seed: s.seed,
        realization: s.realization,
        eta_over_n: sol.record.eta_over_n,
        cluster_score: score.score,
        unweighted_cluster_score: score.unweighted_score,
        cluster_centers: score.cluster_centers,
        transmission_excess: excess,
    };
    write_json(&sidecar_path(output), &report)?;
    println!("{} {} n={} doc={} realization={}", report.config, model, spec.n, spec.doc, s.realization);
    println!("  eta_over_n          {:.6}", report.eta_over_n);
    println!("  cluster score       {:.6} (unweighted {:.6})", score.score, score.unweighted_score);
    println!("  cluster centers     {:.6}, {:.6}", score.cluster_centers[0], score.cluster_centers[1]);
    if let Some(x) = excess {
        println!("  transmission excess {x:.6}");
    }
    Ok(())
}

fn describe_record(r: &qwfs::experiments::EnhancementRecord) -> String {
    format!("{} {} n={} doc={} realization {}", r.config, r.model, r.n, r.doc, r.realization)
}
