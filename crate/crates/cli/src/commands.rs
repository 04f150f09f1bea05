//! The five subcommands. Each returns its files in memory; the caller
//! writes them together with the manifest.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use afflab_core::attractor::{
    contraction_bound, format_real, render_cloud, truncation_bound, write_cloud_csv, TranslationFamily,
    RENDER_TRUNCATION,
};
use afflab_core::ifs::{AffineIfs, Alphabet};
use afflab_core::measures::BernoulliMeasureK;
use afflab_core::pressure::{
    affordable_depth, certify_qm, estimate_s_infinity, pressure_bracket, pressure_schedule, solve_dimension,
    DimensionOptions, Interval, QmCertificate,
};
use afflab_core::spectrum::{
    spectrum_curve, spectrum_ladder, SpectrumOptions, SpectrumPoint, SpectrumStatus, DEFAULT_Q_CAP,
};
use afflab_core::symbolic::LevelKPotential;

use crate::config::{JobConfig, SpectrumConfig};
use crate::manifest::{combine_modes, mode_label};
use crate::CliError;

const DEFAULT_S_INFINITY_TOLERANCE: f64 = 1e-3;

/// Files produced by a command, plus what to print and any error that
/// should set the exit code after the files are written.
#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<(String, Vec<u8>)>,
    pub certificate_mode: String,
    pub summary: Vec<String>,
    pub deferred: Option<CliError>,
}

/// Comma-separated text with LF line endings.
#[derive(Debug, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut c = Self::default();
        c.row(header);
        c
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        let line: Vec<&str> = fields.iter().map(AsRef::as_ref).collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

fn reals(xs: &[f64]) -> Vec<String> {
    xs.iter().map(|&x| format_real(x)).collect()
}

fn json_bytes(v: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

#[derive(Debug, Serialize)]
struct CertificateSummary {
    s: f64,
    mode: String,
    c: f64,
    k: usize,
    gamma: Vec<String>,
    verified_depth: usize,
    log_ck: f64,
}

fn summarize(cert: &QmCertificate) -> CertificateSummary {
    CertificateSummary {
        s: cert.s,
        mode: mode_label(&cert.mode),
        c: cert.c,
        k: cert.k,
        gamma: cert.gamma_labels(),
        verified_depth: cert.verified_depth,
        log_ck: (cert.c * cert.k as f64).ln(),
    }
}

fn dimension_options(config: &JobConfig, depth: usize) -> DimensionOptions {
    let b = &config.budget;
    DimensionOptions {
        depth,
        max_gamma_len: b.max_gamma_len,
        check_depth: b.check_depth,
        tolerance: b.tolerance,
        budget: b.words,
    }
}

pub fn cmd_dim(config: &JobConfig, ifs: &AffineIfs) -> Result<Report, CliError> {
    let b = &config.budget;
    let d = ifs.dim() as f64;
    if ifs.is_finite() || config.dim.levels.is_none() {
        let alphabet = config.alphabet(ifs)?;
        let r = solve_dimension(ifs, &alphabet, &dimension_options(config, b.depth))?;
        let mut csv = Csv::new(&["s_lo", "s_hi", "dimension", "depth"]);
        let mut row = reals(&[r.s_lo, r.s_hi, r.dimension]);
        row.push(r.depth.to_string());
        csv.row(&row);
        let cert = summarize(&r.certificate);
        let summary = vec![
            format!("dimension = {}", format_real(r.dimension)),
            format!(
                "root bracket [{}, {}] at depth {}",
                format_real(r.s_lo),
                format_real(r.s_hi),
                r.depth
            ),
            format!("certificate {} (c = {}, K = {})", cert.mode, format_real(cert.c), cert.k),
        ];
        let report = json!({
            "s_lo": r.s_lo,
            "s_hi": r.s_hi,
            "dimension": r.dimension,
            "ambient_dimension": ifs.dim(),
            "depth": r.depth,
            "certificate": cert,
        });
        return Ok(Report {
            files: vec![("dim.csv".into(), csv.into_bytes()), ("dim.json".into(), json_bytes(&report))],
            certificate_mode: cert.mode.clone(),
            summary,
            deferred: None,
        });
    }

    let levels = config.dim.levels.clone().unwrap_or_default();
    let tol = config.dim.s_infinity_tolerance.unwrap_or(DEFAULT_S_INFINITY_TOLERANCE);
    let s_inf = estimate_s_infinity(ifs, tol)?;
    let mut csv = Csv::new(&["level", "depth", "s_lo", "s_hi", "dimension"]);
    let mut rungs = Vec::new();
    let mut modes = Vec::new();
    let mut sup = 0.0f64;
    for &level in &levels {
        let depth = affordable_depth(level, b.depth, b.words);
        let r = solve_dimension(ifs, &Alphabet::prefix(level), &dimension_options(config, depth))?;
        let mut row = vec![level.to_string(), r.depth.to_string()];
        row.extend(reals(&[r.s_lo, r.s_hi, r.dimension]));
        csv.row(&row);
        sup = sup.max(r.dimension);
        modes.push(mode_label(&r.certificate.mode));
        rungs.push(json!({
            "level": level,
            "depth": r.depth,
            "s_lo": r.s_lo,
            "s_hi": r.s_hi,
            "dimension": r.dimension,
            "certificate": summarize(&r.certificate),
        }));
    }
    let dimension = sup.max(s_inf.lo).min(d);
    let report = json!({
        "ladder": rungs,
        "sup": sup,
        "s_infinity": [s_inf.lo, s_inf.hi],
        "dimension": dimension,
        "ambient_dimension": ifs.dim(),
    });
    Ok(Report {
        files: vec![("dim.csv".into(), csv.into_bytes()), ("dim.json".into(), json_bytes(&report))],
        certificate_mode: combine_modes(modes),
        summary: vec![
            format!("dimension = {}", format_real(dimension)),
            format!("sup over truncations = {}", format_real(sup)),
            format!("s_inf in [{}, {}]", format_real(s_inf.lo), format_real(s_inf.hi)),
        ],
        deferred: None,
    })
}

pub fn cmd_pressure(config: &JobConfig, ifs: &AffineIfs) -> Result<Report, CliError> {
    let pc = config
        .pressure
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [pressure] section".into()))?;
    let b = &config.budget;
    let alphabet = config.alphabet(ifs)?;
    let mut csv = Csv::new(&["s", "depth", "lower", "upper"]);
    let mut modes = Vec::new();
    let mut summary = Vec::new();
    for &s in &pc.s {
        let cert = certify_qm(ifs, &alphabet, s, b.max_gamma_len, b.check_depth, b.words)?;
        let estimates = match &pc.depths {
            Some(depths) => depths
                .iter()
                .map(|&n| pressure_bracket(ifs, &alphabet, s, n, &cert, b.words))
                .collect::<Result<Vec<_>, _>>()?,
            None => pressure_schedule(ifs, &alphabet, s, b.depth, &cert, b.words)?,
        };
        for e in &estimates {
            csv.row(&[format_real(s), e.depth.to_string(), format_real(e.lower), format_real(e.upper)]);
        }
        if let Some(last) = estimates.last() {
            summary.push(format!(
                "s = {}: P in [{}, {}] at depth {}",
                format_real(s),
                format_real(last.lower),
                format_real(last.upper),
                last.depth
            ));
        }
        modes.push(mode_label(&cert.mode));
    }
    Ok(Report {
        files: vec![("pressure.csv".into(), csv.into_bytes())],
        certificate_mode: combine_modes(modes),
        summary,
        deferred: None,
    })
}

pub fn cmd_certify(config: &JobConfig, ifs: &AffineIfs) -> Result<Report, CliError> {
    let cc = config
        .certify
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [certify] section".into()))?;
    let b = &config.budget;
    let alphabet = config.alphabet(ifs)?;
    let mut csv = Csv::new(&["s", "mode", "c", "k", "verified_depth", "gamma"]);
    let mut certs = Vec::new();
    let mut summary = Vec::new();
    for &s in &cc.s {
        let cert = summarize(&certify_qm(ifs, &alphabet, s, b.max_gamma_len, b.check_depth, b.words)?);
        csv.row(&[
            format_real(s),
            cert.mode.clone(),
            format_real(cert.c),
            cert.k.to_string(),
            cert.verified_depth.to_string(),
            cert.gamma.join(";"),
        ]);
        summary.push(format!(
            "s = {}: {} with c = {}, K = {}, Γ = {{{}}}",
            format_real(s),
            cert.mode,
            format_real(cert.c),
            cert.k,
            cert.gamma.join(", ")
        ));
        certs.push(cert);
    }
    let modes = certs.iter().map(|c| c.mode.clone()).collect::<Vec<_>>();
    Ok(Report {
        files: vec![
            ("certificate.csv".into(), csv.into_bytes()),
            ("certificate.json".into(), json_bytes(&json!({ "certificates": certs }))),
        ],
        certificate_mode: combine_modes(modes),
        summary,
        deferred: None,
    })
}

fn spectrum_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=n).map(|i| format!("alpha{i}")).collect();
    h.push("dim".into());
    h.push("status".into());
    h.extend((1..=n).map(|i| format!("q{i}")));
    h
}

fn spectrum_row(alpha: &[f64], dim: f64, status: &str, q: &[f64]) -> Vec<String> {
    let mut row = reals(alpha);
    row.push(format_real(dim));
    row.push(status.to_string());
    row.extend(reals(q));
    row
}

/// Writes one curve; rows that failed are marked `error` and the first
/// failure is returned.
fn spectrum_csv(grid: &[Vec<f64>], n: usize, points: &[Result<SpectrumPoint, afflab_core::Error>]) -> (Csv, Option<CliError>) {
    let mut csv = Csv::new(&spectrum_header(n));
    let mut first = None;
    for (alpha, p) in grid.iter().zip(points) {
        match p {
            Ok(p) => csv.row(&spectrum_row(alpha, p.dim, p.status.label(), &p.q_star)),
            Err(e) => {
                csv.row(&spectrum_row(alpha, f64::NAN, "error", &vec![f64::NAN; n]));
                first.get_or_insert_with(|| CliError::from(e.clone()));
            }
        }
    }
    (csv, first)
}

fn count_status(points: &[Result<SpectrumPoint, afflab_core::Error>]) -> String {
    let mut counts = std::collections::BTreeMap::new();
    for p in points {
        let label = p.as_ref().map(|p| p.status.label()).unwrap_or("error");
        *counts.entry(label).or_insert(0usize) += 1;
    }
    counts.iter().map(|(k, v)| format!("{v} {k}")).collect::<Vec<_>>().join(", ")
}

pub fn cmd_spectrum(config: &JobConfig, ifs: &AffineIfs) -> Result<Report, CliError> {
    let sc = config
        .spectrum
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [spectrum] section".into()))?;
    if !ifs.is_finite() {
        if let Some(truncations) = &sc.truncations {
            return spectrum_truncated(sc, ifs, truncations);
        }
    }
    let alphabet = config.alphabet(ifs)?;
    let phi = sc.potential.build(alphabet.len())?;
    check_grid(sc, &phi)?;
    let grid = sc.grid();
    let n = phi.num_components();
    let base = SpectrumOptions {
        level: sc.level.unwrap_or(phi.level()),
        q_cap: sc.q_cap.unwrap_or(DEFAULT_Q_CAP),
        s_infinity_floor: 0.0,
        s_tolerance: config.budget.tolerance,
    };
    let mut report = Report {
        certificate_mode: "none".into(),
        ..Default::default()
    };
    let levels: Vec<(String, usize)> = match &sc.levels {
        Some(levels) => levels.iter().map(|&k| (format!("spectrum_k{k}.csv"), k)).collect(),
        None => vec![("spectrum.csv".into(), base.level)],
    };
    for (name, k) in levels {
        let opts = SpectrumOptions { level: k, ..base };
        let points = spectrum_curve(ifs, &alphabet, &phi, &grid, &opts);
        let (csv, err) = spectrum_csv(&grid, n, &points);
        report.summary.push(format!("{name}: {}", count_status(&points)));
        report.files.push((name, csv.into_bytes()));
        if report.deferred.is_none() {
            report.deferred = err;
        }
    }
    Ok(report)
}

fn check_grid(sc: &SpectrumConfig, phi: &LevelKPotential) -> Result<(), CliError> {
    if let Some(bad) = sc.grid().iter().find(|a| a.len() != phi.num_components()) {
        return Err(CliError::Config(format!(
            "target has {} coordinates, potential has {} components",
            bad.len(),
            phi.num_components()
        )));
    }
    Ok(())
}

fn spectrum_truncated(sc: &SpectrumConfig, ifs: &AffineIfs, truncations: &[usize]) -> Result<Report, CliError> {
    let top = *truncations.last().expect("validated non-empty");
    let phi = sc.potential.build(top)?;
    check_grid(sc, &phi)?;
    let grid = sc.grid();
    let n = phi.num_components();
    let s_inf: Interval = estimate_s_infinity(ifs, sc.s_infinity_tolerance.unwrap_or(DEFAULT_S_INFINITY_TOLERANCE))?;
    let opts = SpectrumOptions {
        level: sc.level.unwrap_or(phi.level()),
        q_cap: sc.q_cap.unwrap_or(DEFAULT_Q_CAP),
        ..Default::default()
    };
    let ladders: Vec<_> = grid
        .par_iter()
        .map(|alpha| spectrum_ladder(ifs, &phi, truncations, alpha, s_inf, &opts))
        .collect();

    let mut main = Csv::new(&spectrum_header(n));
    let mut header: Vec<String> = (1..=n).map(|i| format!("alpha{i}")).collect();
    header.extend(["truncation", "dim", "status"].map(String::from));
    let mut detail = Csv::new(&header);
    let mut deferred = None;
    for (alpha, ladder) in grid.iter().zip(&ladders) {
        match ladder {
            Ok(l) => {
                let (_, last) = l.rungs.last().expect("at least one rung");
                let best_rung = l
                    .rungs
                    .iter()
                    .filter(|(_, p)| p.status != SpectrumStatus::Empty)
                    .map(|(_, p)| p.dim)
                    .fold(f64::NEG_INFINITY, f64::max);
                let status = if l.dim > best_rung {
                    SpectrumStatus::FlooredBySInfinity.label()
                } else {
                    last.status.label()
                };
                main.row(&spectrum_row(alpha, l.dim, status, &last.q_star));
                for (ell, p) in &l.rungs {
                    let mut row = reals(alpha);
                    row.push(ell.to_string());
                    row.push(format_real(p.dim));
                    row.push(p.status.label().to_string());
                    detail.row(&row);
                }
            }
            Err(e) => {
                main.row(&spectrum_row(alpha, f64::NAN, "error", &vec![f64::NAN; n]));
                deferred.get_or_insert_with(|| CliError::from(e.clone()));
            }
        }
    }
    Ok(Report {
        files: vec![
            ("spectrum.csv".into(), main.into_bytes()),
            ("spectrum_ladder.csv".into(), detail.into_bytes()),
        ],
        certificate_mode: "none".into(),
        summary: vec![format!(
            "{} targets over truncations {:?}; s_inf in [{}, {}]",
            grid.len(),
            truncations,
            format_real(s_inf.lo),
            format_real(s_inf.hi)
        )],
        deferred,
    })
}

pub fn cmd_render(config: &JobConfig, ifs: &AffineIfs, seed: u64) -> Result<Report, CliError> {
    let rc = &config.render;
    let alphabet = config.alphabet(ifs)?;
    let d = ifs.dim();
    let measure = match rc.measure.as_str() {
        "uniform" => BernoulliMeasureK::uniform(rc.level, alphabet.clone())?,
        "svf" => {
            let s = rc
                .s
                .ok_or_else(|| CliError::Config("`render.s` is required for measure = \"svf\"".into()))?;
            BernoulliMeasureK::from_svf(ifs, alphabet.clone(), s, rc.level, config.budget.words)?
        }
        "weights" => {
            let w = rc
                .weights
                .clone()
                .ok_or_else(|| CliError::Config("`render.weights` is required for measure = \"weights\"".into()))?;
            BernoulliMeasureK::new(rc.level, alphabet.clone(), w)?
        }
        other => return Err(CliError::Config(format!("unknown render measure {other:?}"))),
    };
    let translations = match &rc.translations {
        Some(list) => TranslationFamily::explicit(d, list.clone())?,
        None => TranslationFamily::sampled(d, rc.translation_seed.unwrap_or(seed)),
    };
    let word_length = match rc.word_length {
        Some(n) => n,
        None => {
            let c = contraction_bound(&ifs.maps_for(&alphabet)?);
            (1..=100_000)
                .find(|&n| truncation_bound(c, n, d) <= RENDER_TRUNCATION)
                .ok_or_else(|| CliError::Config("contraction too weak for a default word length".into()))?
        }
    };
    let cloud = render_cloud(ifs, &measure, &translations, rc.points, word_length, seed)?;
    let mut buf = Vec::new();
    write_cloud_csv(&mut buf, d, &cloud).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(Report {
        files: vec![("cloud.csv".into(), buf)],
        certificate_mode: "none".into(),
        summary: vec![format!("{} points, word length {word_length}", cloud.len())],
        deferred: None,
    })
}
