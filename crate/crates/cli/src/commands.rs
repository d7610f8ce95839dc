use std::path::Path;

use fnls_core::asymptotics::{escape_probe, sweep_analysis, ProbeReport, SweepRecord, SweepReport};
use fnls_core::energy::identity_report;
use fnls_core::fit::fit_decomposition;
use fnls_core::solver::{continue_sweep, gauge_fix, relax, GroundState, Mode};
use fnls_core::validate::{run_validation, Mutation, ValidateOptions};
use fnls_core::{EnergySplit, FitResult, Grid, IdentityReport, OrbitalPair, SolverConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::{line_chart, num, Cell, Outputs, Series, SCHEMA_VERSION};
use crate::settings::Settings;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub eta: f64,
    pub xn: f64,
    #[serde(rename = "Kn")]
    pub kn: f64,
    pub phi_sup: f64,
    pub psi_sup: f64,
    pub phi_hat_sup: f64,
    pub psi_hat_sup: f64,
}

impl From<&FitResult> for FitSummary {
    fn from(f: &FitResult) -> Self {
        Self {
            a: f.a,
            b: f.b,
            delta: f.delta,
            eta: f.eta,
            xn: f.xn,
            kn: f.kn(),
            phi_sup: f.phi_sup,
            psi_sup: f.psi_sup,
            phi_hat_sup: f.phi_hat_sup,
            psi_hat_sup: f.psi_hat_sup,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Deviations {
    pub xn: f64,
    pub dmu: f64,
    #[serde(rename = "Kn")]
    pub kn: f64,
    pub absum: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateRecord {
    pub schema_version: String,
    pub p: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub h: f64,
    pub n: usize,
    pub energy: EnergySplit,
    pub mu1: f64,
    pub mu2: f64,
    pub residual_sup: f64,
    pub iterations: usize,
    pub warnings: Vec<String>,
    pub identities: IdentityReport,
    pub fit: Option<FitSummary>,
    pub fit_error: Option<String>,
    pub deviations: Option<Deviations>,
    pub config: SolverConfig,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

struct Analysed {
    gs: GroundState,
    fit: Result<FitResult, String>,
    record: Option<SweepRecord>,
}

fn analyse(gs: GroundState) -> Analysed {
    let fit = fit_decomposition(&gs).map_err(|e| e.to_string());
    let record = fit.as_ref().ok().and_then(|f| SweepRecord::from_state(&gs, f).ok());
    Analysed { gs, fit, record }
}

fn state_record(a: &Analysed, config: &SolverConfig) -> StateRecord {
    let gs = &a.gs;
    StateRecord {
        schema_version: SCHEMA_VERSION.into(),
        p: gs.p,
        l: gs.grid().half_width(),
        h: gs.grid().h(),
        n: gs.grid().len(),
        energy: gs.split,
        mu1: gs.mu1,
        mu2: gs.mu2,
        residual_sup: gs.residual_sup,
        iterations: gs.iterations,
        warnings: gs.warnings.clone(),
        identities: identity_report(gs),
        fit: a.fit.as_ref().ok().map(FitSummary::from),
        fit_error: a.fit.as_ref().err().cloned(),
        deviations: a.record.as_ref().map(|r| Deviations {
            xn: r.dev_xn,
            dmu: r.dev_dmu,
            kn: r.dev_kn,
            absum: r.dev_absum,
        }),
        config: config.clone(),
        u1: gs.pair.u1.clone(),
        u2: gs.pair.u2.clone(),
    }
}

fn orbital_rows(gs: &GroundState) -> Vec<Vec<Cell>> {
    let g = gs.grid();
    let rho = gs.pair.density();
    (0..g.len())
        .map(|k| {
            vec![
                Cell::F(g.x(k)),
                Cell::F(gs.pair.u1[k]),
                Cell::F(gs.pair.u2[k]),
                Cell::F(rho[k]),
            ]
        })
        .collect()
}

fn sweep_rows(records: &[&SweepRecord]) -> Vec<Vec<Cell>> {
    records
        .iter()
        .map(|r| {
            r.values()
                .iter()
                .enumerate()
                .map(|(i, &v)| if i == 2 { Cell::I(r.n as u64) } else { Cell::F(v) })
                .collect()
        })
        .collect()
}

fn config_json(settings: &Settings, extra: serde_json::Value) -> Result<serde_json::Value, CliError> {
    let mut v = serde_json::to_value(settings)?;
    if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
        obj.extend(more);
    }
    Ok(v)
}

pub fn solve(settings: &Settings, print_json: bool, print_csv: bool) -> Result<(), CliError> {
    let p = settings.require_p()?;
    let config = settings.solver_config(p);
    let gs = relax(&config)?;
    for w in &gs.warnings {
        log::warn!("{w}");
    }
    let a = analyse(gs);
    let record = state_record(&a, &config);

    let mut out = Outputs::create(&settings.out_dir())?;
    out.write_json("state.json", &record)?;
    out.write_table("orbitals.csv", &["x", "u1", "u2", "rho"], &orbital_rows(&a.gs))?;
    if let Ok(f) = &a.fit {
        out.write_json("fit.json", f)?;
    }
    out.finish("solve", config_json(settings, serde_json::json!({}))?, &[])?;

    if print_json {
        let mut slim = serde_json::to_value(&record)?;
        if let Some(obj) = slim.as_object_mut() {
            obj.remove("u1");
            obj.remove("u2");
        }
        println!("{}", serde_json::to_string_pretty(&slim)?);
    } else if print_csv {
        println!("{}", SweepRecord::COLUMNS.join(","));
        match &a.record {
            Some(r) => println!("{}", r.values().iter().map(|v| num(*v)).collect::<Vec<_>>().join(",")),
            None => log::warn!("no sweep record: prediction undefined or fit failed"),
        }
    } else {
        let gs = &a.gs;
        println!(
            "p = {}  E = {}  mu1 = {}  mu2 = {}  residual = {:e}  iterations = {}",
            gs.p, gs.split.total, gs.mu1, gs.mu2, gs.residual_sup, gs.iterations
        );
        match &a.fit {
            Ok(f) => println!("xn = {}  a = {}  b = {}  Kn = {}", f.xn, f.a, f.b, f.kn()),
            Err(e) => println!("fit failed: {e}"),
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct FailedPoint {
    p: f64,
    error: String,
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    schema_version: &'static str,
    p_values: Vec<f64>,
    converged: usize,
    failed: Vec<FailedPoint>,
    regression: Option<SweepReport>,
    regression_error: Option<String>,
}

pub struct SweepArgs {
    pub p_min: f64,
    pub p_max: f64,
    pub steps: usize,
    pub parallel: bool,
    pub continuation: bool,
    pub svg: bool,
}

pub fn p_grid(p_min: f64, p_max: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if steps == 0 {
        return Err(CliError::Usage("--steps must be at least 1".into()));
    }
    if !(p_min > 1.5) || !(p_max < 2.0) || !(p_min <= p_max) {
        return Err(CliError::Usage(format!(
            "need 1.5 < p-min <= p-max < 2, got p-min = {p_min}, p-max = {p_max}"
        )));
    }
    if steps == 1 {
        return Ok(vec![p_min]);
    }
    let d = (p_max - p_min) / (steps - 1) as f64;
    Ok((0..steps).map(|k| if k == steps - 1 { p_max } else { p_min + k as f64 * d }).collect())
}

/// Returns true when at least 75% of the points converged.
pub fn sweep(settings: &Settings, args: &SweepArgs) -> Result<bool, CliError> {
    let ps = p_grid(args.p_min, args.p_max, args.steps)?;
    if args.parallel && args.continuation {
        return Err(CliError::Usage("--continuation is sequential and cannot be combined with --parallel".into()));
    }
    let base = settings.solver_config(ps[0]);
    base.validate()?;
    let results: Vec<Result<Analysed, String>> = if args.continuation {
        continue_sweep(&ps, &base)
            .into_iter()
            .map(|o| o.result.map(analyse).map_err(|e| e.to_string()))
            .collect()
    } else {
        let one = |&p: &f64| {
            let mut c = base.clone();
            c.p = p;
            relax(&c).map(analyse).map_err(|e| e.to_string())
        };
        if args.parallel {
            ps.par_iter().map(one).collect()
        } else {
            ps.iter().map(one).collect()
        }
    };

    let mut records = Vec::new();
    let mut failed = Vec::new();
    for (&p, r) in ps.iter().zip(&results) {
        match r {
            Ok(a) => match (&a.record, &a.fit) {
                (Some(rec), _) => records.push(rec),
                (None, Err(e)) => failed.push(FailedPoint { p, error: format!("fit: {e}") }),
                (None, Ok(_)) => failed.push(FailedPoint {
                    p,
                    error: "sweep record not finite".into(),
                }),
            },
            Err(e) => failed.push(FailedPoint { p, error: e.clone() }),
        }
    }
    let owned: Vec<SweepRecord> = records.iter().map(|r| (*r).clone()).collect();
    let (regression, regression_error) = match sweep_analysis(&owned) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let mut out = Outputs::create(&settings.out_dir())?;
    out.write_table("sweep.csv", &SweepRecord::COLUMNS, &sweep_rows(&records))?;
    let xn_law: Vec<Vec<Cell>> = records
        .iter()
        .map(|r| {
            vec![
                Cell::F(r.p),
                Cell::F((2.0 - r.p).powf(-0.5)),
                Cell::F(r.xn),
                Cell::F(r.xn_pred),
            ]
        })
        .collect();
    out.write_table("plot_xn_law.csv", &["p", "inv_sqrt_2_minus_p", "xn", "xn_pred"], &xn_law)?;
    let squared: Vec<Vec<Cell>> = records
        .iter()
        .map(|r| vec![Cell::F(r.p), Cell::F((2.0 - r.p) * r.xn * r.xn), Cell::F(48.0)])
        .collect();
    out.write_table("plot_squared.csv", &["p", "squared", "limit"], &squared)?;
    let dmu: Vec<Vec<Cell>> = records
        .iter()
        .map(|r| vec![Cell::F(r.p), Cell::F(r.mu2 - r.mu1), Cell::F(r.dmu_pred)])
        .collect();
    out.write_table("plot_dmu.csv", &["p", "dmu", "dmu_pred"], &dmu)?;
    if args.svg {
        let pts = |f: &dyn Fn(&SweepRecord) -> (f64, f64)| records.iter().map(|r| f(r)).collect::<Vec<_>>();
        out.write_text(
            "plot_xn_law.svg",
            &line_chart(
                "bump distance",
                "(2-p)^(-1/2)",
                "xn",
                &[
                    Series {
                        name: "measured",
                        points: pts(&|r| ((2.0 - r.p).powf(-0.5), r.xn)),
                    },
                    Series {
                        name: "4 sqrt(3) (2-p)^(-1/2)",
                        points: pts(&|r| ((2.0 - r.p).powf(-0.5), r.xn_pred)),
                    },
                ],
            ),
        )?;
        out.write_text(
            "plot_squared.svg",
            &line_chart(
                "(2-p) xn^2",
                "p",
                "(2-p) xn^2",
                &[
                    Series {
                        name: "measured",
                        points: pts(&|r| (r.p, (2.0 - r.p) * r.xn * r.xn)),
                    },
                    Series {
                        name: "48",
                        points: pts(&|r| (r.p, 48.0)),
                    },
                ],
            ),
        )?;
        out.write_text(
            "plot_dmu.svg",
            &line_chart(
                "multiplier splitting",
                "p",
                "mu2 - mu1",
                &[
                    Series {
                        name: "measured",
                        points: pts(&|r| (r.p, r.mu2 - r.mu1)),
                    },
                    Series {
                        name: "exp(-sqrt|mu2| xn)/2",
                        points: pts(&|r| (r.p, r.dmu_pred)),
                    },
                ],
            ),
        )?;
    }
    let converged = records.len();
    let summary = SweepSummary {
        schema_version: SCHEMA_VERSION,
        p_values: ps.clone(),
        converged,
        failed,
        regression,
        regression_error,
    };
    out.write_json("regression.json", &summary)?;
    let extra = serde_json::json!({
        "p_min": args.p_min, "p_max": args.p_max, "steps": args.steps,
        "parallel": args.parallel, "continuation": args.continuation,
    });
    out.finish("sweep", config_json(settings, extra)?, &[])?;

    for f in &summary.failed {
        eprintln!("p = {}: {}", f.p, f.error);
    }
    match &summary.regression {
        Some(r) => println!(
            "{converged}/{} converged  gamma = {:.4}  c = {:.4}  (2-p)xn^2 = {:?}{}",
            ps.len(),
            r.gamma,
            r.amplitude,
            r.squared.iter().map(|s| (s * 100.0).round() / 100.0).collect::<Vec<_>>(),
            if r.consistent { String::new() } else { format!("  flags: {}", r.flags.join("; ")) }
        ),
        None => println!(
            "{converged}/{} converged  regression: {}",
            ps.len(),
            summary.regression_error.as_deref().unwrap_or("")
        ),
    }
    Ok(4 * converged >= 3 * ps.len())
}

#[derive(Debug, Serialize)]
struct ProbeOutput<'a> {
    schema_version: &'static str,
    #[serde(flatten)]
    report: &'a ProbeReport,
}

pub fn probe(settings: &Settings, l_list: &[f64]) -> Result<(), CliError> {
    let p = settings.require_p()?;
    if l_list.is_empty() {
        return Err(CliError::Usage("--L-list is required".into()));
    }
    let mut config = settings.solver_config(p);
    config.mode = Mode::Probe;
    let report = escape_probe(p, l_list, &config)?;

    let mut out = Outputs::create(&settings.out_dir())?;
    out.write_json(
        "probe.json",
        &ProbeOutput {
            schema_version: SCHEMA_VERSION,
            report: &report,
        },
    )?;
    let opt = |v: Option<f64>| Cell::F(v.unwrap_or(f64::NAN));
    let rows: Vec<Vec<Cell>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                Cell::F(r.l),
                Cell::B(r.converged),
                opt(r.xn),
                opt(r.energy),
                opt(r.gap),
                Cell::I(r.iterations as u64),
                opt(r.residual_sup),
            ]
        })
        .collect();
    out.write_table(
        "probe.csv",
        &["L", "converged", "xn", "E", "gap", "iterations", "residual_sup"],
        &rows,
    )?;
    out.finish("probe", config_json(settings, serde_json::json!({ "L_list": l_list }))?, &[])?;

    println!("verdict: {}{}", report.verdict, if report.partial { " (partial)" } else { "" });
    println!("2 J1(p) = {}", report.two_j1);
    for r in &report.rows {
        match (&r.xn, &r.error) {
            (Some(xn), _) => println!("  L = {}  xn = {}  E - 2J1 = {:e}", r.l, xn, r.gap.unwrap_or(f64::NAN)),
            (None, Some(e)) => println!("  L = {}  failed: {e}", r.l),
            _ => {}
        }
    }
    Ok(())
}

/// Returns true when every check passed.
pub fn validate(quick: bool, inject_sign_error: bool) -> bool {
    let report = run_validation(&ValidateOptions {
        quick,
        mutation: if inject_sign_error {
            Mutation::FlipSolitonSign
        } else {
            Mutation::None
        },
    });
    let width = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &report.checks {
        println!(
            "{}  {:width$}  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let failed = report.failures().count();
    println!("{} checks, {} failed", report.checks.len(), failed);
    failed == 0
}

pub fn refit(state_path: &Path, settings: &Settings) -> Result<(), CliError> {
    let bytes = std::fs::read(state_path).map_err(|e| CliError::io(state_path, e))?;
    let rec: StateRecord = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Usage(format!("{}: not a state record: {e}", state_path.display())))?;
    if rec.schema_version != SCHEMA_VERSION {
        return Err(CliError::Usage(format!("unsupported schema_version {}", rec.schema_version)));
    }
    let grid = Grid::new(rec.l, rec.n)?;
    let pair = OrbitalPair::new(grid, rec.u1, rec.u2)?;
    let gs = gauge_fix(&GroundState::from_pair(pair, rec.p)?)?;
    let fit = fit_decomposition(&gs)?;
    let mut out = Outputs::create(&settings.out_dir())?;
    out.write_json("fit.json", &fit)?;
    out.finish(
        "fit",
        config_json(settings, serde_json::json!({ "state": state_path.display().to_string() }))?,
        &[&bytes],
    )?;
    println!(
        "xn = {}  a = {}  b = {}  delta = {}  eta = {}  Kn = {}",
        fit.xn,
        fit.a,
        fit.b,
        fit.delta,
        fit.eta,
        fit.kn()
    );
    Ok(())
}
