//! Closed-form limit laws, overlap-integral checks, sweep regression and the escape probe.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::{detect_bumps, FitResult};
use crate::solitons::{mu_from_norm_with, w_tilde_norm_sq, SolitonSpec};
use crate::solver::{relax, relax_single, xn_prediction, GroundState, Mode, SolverConfig};

/// Limit of (2−p)x_n².
pub const SQUARED_LIMIT: f64 = 48.0;

/// Smallest comparison scale e^{−√|μ₂|x_n} accepted by [`overlap_suite`].
pub const SCALE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub p: f64,
    /// `None` for p ≥ 2.
    pub xn_pred: Option<f64>,
    /// e^{−√|μ₂|x_n}
    pub scale: f64,
    pub dmu_pred: f64,
    #[serde(rename = "Kn_pred")]
    pub kn_pred: f64,
    pub absum_pred: f64,
    /// Magnitude of the shift ‖w̃(p,μ_i)‖² − 1 = ±2e^{−√|μ₂|x_n}.
    pub norm_shift_pred: f64,
}

impl PredictionRecord {
    pub fn require_xn_pred(&self) -> Result<f64> {
        self.xn_pred.ok_or(Error::PredictionUndefined { p: self.p })
    }
}

pub fn predict(p: f64, xn: f64, mu2: f64) -> Result<PredictionRecord> {
    if !p.is_finite() || !(p > 1.0) {
        return Err(invalid(format!("exponent must exceed 1, got {p}")));
    }
    if !(xn > 0.0) || !xn.is_finite() {
        return Err(invalid(format!("xn must be positive, got {xn}")));
    }
    if !(mu2 < 0.0) || !mu2.is_finite() {
        return Err(invalid(format!("mu2 must be negative, got {mu2}")));
    }
    let scale = (-mu2.abs().sqrt() * xn).exp();
    let kn_pred = -0.5 * xn * scale;
    Ok(PredictionRecord {
        p,
        xn_pred: xn_prediction(p).ok(),
        scale,
        dmu_pred: 0.5 * scale,
        kn_pred,
        absum_pred: kn_pred / SQRT_2,
        norm_shift_pred: 2.0 * scale,
    })
}

/// Signed relative deviation (measured − predicted)/|predicted|.
pub fn relative_deviation(measured: f64, predicted: f64) -> f64 {
    (measured - predicted) / predicted.abs()
}

/// Composite Simpson rule with step at most `h`.
fn simpson(a: f64, b: f64, h: f64, f: impl Fn(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut m = ((b - a) / h).ceil() as usize;
    m += m % 2;
    let m = m.max(2);
    let step = (b - a) / m as f64;
    let mut sum = f(a) + f(b);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * step);
    }
    sum * step / 3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub name: String,
    pub quadrature: f64,
    pub leading: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapTable {
    pub p: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub xn: f64,
    pub scale: f64,
    pub h: f64,
    pub rows: Vec<OverlapRow>,
}

impl OverlapTable {
    pub fn row(&self, name: &str) -> Option<&OverlapRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn max_ratio_error(&self) -> f64 {
        self.rows.iter().map(|r| (r.ratio - 1.0).abs()).fold(0.0, f64::max)
    }
}

pub fn overlap_suite(p: f64, mu1: f64, mu2: f64, xn: f64) -> Result<OverlapTable> {
    overlap_suite_with(p, mu1, mu2, xn, 0.01)
}

/// Quadrature of the six interaction integrals against their leading-order forms.
/// w₁ = w̃(p,μ₁) centered at 0, w₂ = w̃(p,μ₂) centered at x_n.
pub fn overlap_suite_with(p: f64, mu1: f64, mu2: f64, xn: f64, h: f64) -> Result<OverlapTable> {
    if !(p > 1.8 && p <= 2.0) {
        return Err(invalid(format!("overlap suite needs p in (1.8, 2], got {p}")));
    }
    if !(xn > 0.0) || !xn.is_finite() {
        return Err(invalid(format!("xn must be positive, got {xn}")));
    }
    if !(h > 0.0) {
        return Err(invalid(format!("quadrature step must be positive, got {h}")));
    }
    let s1 = SolitonSpec::new(p, mu1)?;
    let s2 = SolitonSpec::new(p, mu2)?;
    let k2 = s2.sqrt_abs_mu();
    let scale = (-k2 * xn).exp();
    if !(scale >= SCALE_FLOOR) {
        return Err(Error::ScaleUnderflow { scale });
    }

    let w1 = |x: f64| s1.value(x);
    let d1 = |x: f64| s1.derivative(x);
    let w2 = |x: f64| s2.value(x - xn);
    let tail = 40.0 / k2.min(s1.sqrt_abs_mu());
    let (lo, hi) = (-tail, xn + tail);
    let q = 2.0 * p;

    let i1 = simpson(lo, hi, h, |x| w1(x) * w2(x));
    let i2 = simpson(lo, hi, h, |x| d1(x) * w2(x));
    let i3 = simpson(0.5 * xn, 1.5 * xn, h, |x| w1(x) * w2(x).powf(q - 1.0));
    let i4 = (q - 1.0) * simpson(lo, hi, h, |x| w2(x) * d1(x) * w1(x).powf(q - 2.0));
    let i5 = simpson(0.5 * xn, 1.5 * xn, h, |x| x * w1(x) * d1(x) * w2(x).powf(q - 2.0))
        + (p - 1.0) * simpson(-0.75 * xn, 0.5 * xn, h, |x| x * w1(x).powf(q - 3.0) * d1(x) * w2(x).powi(2));
    let i6 = 0.5 * (mu1 - mu2) * simpson(lo, hi, h, |x| x * d1(x) * w2(x));

    let s2x = scale * scale;
    let leading = [
        0.5 * xn * scale,
        (0.5 - xn / 8.0) * scale,
        0.25 * scale,
        -scale / 16.0,
        (-xn * xn / 32.0 - xn / 16.0) * s2x,
        xn * xn / 64.0 * s2x,
    ];
    let quad = [i1, i2, i3, i4, i5, i6];
    let rows = quad
        .iter()
        .zip(leading)
        .enumerate()
        .map(|(k, (&qv, lv))| OverlapRow {
            name: format!("I{}", k + 1),
            quadrature: qv,
            leading: lv,
            ratio: qv / lv,
        })
        .collect();
    Ok(OverlapTable { p, mu1, mu2, xn, scale, h, rows })
}

/// Self-consistent (μ₁, μ₂) with ‖w̃(p,μ₁)‖² = 1 + 2e^{−√|μ₂|x_n} and ‖w̃(p,μ₂)‖² = 1 − 2e^{−√|μ₂|x_n}.
pub fn reference_multipliers(p: f64, xn: f64) -> Result<(f64, f64)> {
    if !(xn > 0.0) {
        return Err(invalid(format!("xn must be positive, got {xn}")));
    }
    let base = w_tilde_norm_sq(p)?;
    let mut mu2 = mu_from_norm_with(p, 1.0, base)?;
    for _ in 0..200 {
        let e = (-mu2.abs().sqrt() * xn).exp();
        if !(2.0 * e < 1.0) {
            return Err(invalid(format!("xn = {xn} too small for a norm shift below 1")));
        }
        let next = mu_from_norm_with(p, 1.0 - 2.0 * e, base)?;
        let done = (next - mu2).abs() <= 1e-15 * mu2.abs();
        mu2 = next;
        if done {
            break;
        }
    }
    let e = (-mu2.abs().sqrt() * xn).exp();
    let mu1 = mu_from_norm_with(p, 1.0 + 2.0 * e, base)?;
    Ok((mu1, mu2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub p: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub n: usize,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "P")]
    pub pot: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub xn: f64,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "Kn")]
    pub kn: f64,
    pub phi_sup: f64,
    pub psi_sup: f64,
    pub xn_pred: f64,
    pub dmu_pred: f64,
    #[serde(rename = "Kn_pred")]
    pub kn_pred: f64,
    pub dev_xn: f64,
    pub dev_dmu: f64,
    #[serde(rename = "dev_Kn")]
    pub dev_kn: f64,
    pub dev_absum: f64,
}

impl SweepRecord {
    pub const COLUMNS: [&'static str; 21] = [
        "p", "L", "n", "E", "T", "P", "mu1", "mu2", "xn", "a", "b", "Kn", "phi_sup", "psi_sup", "xn_pred",
        "dmu_pred", "Kn_pred", "dev_xn", "dev_dmu", "dev_Kn", "dev_absum",
    ];

    pub fn from_state(gs: &GroundState, fit: &FitResult) -> Result<Self> {
        let pred = predict(gs.p, fit.xn, gs.mu2)?;
        let xn_pred = pred.require_xn_pred()?;
        let kn = fit.kn();
        let rec = Self {
            p: gs.p,
            l: gs.grid().half_width(),
            n: gs.grid().len(),
            e: gs.split.total,
            t: gs.split.kinetic,
            pot: gs.split.potential,
            mu1: gs.mu1,
            mu2: gs.mu2,
            xn: fit.xn,
            a: fit.a,
            b: fit.b,
            kn,
            phi_sup: fit.phi_sup,
            psi_sup: fit.psi_sup,
            xn_pred,
            dmu_pred: pred.dmu_pred,
            kn_pred: pred.kn_pred,
            dev_xn: relative_deviation(fit.xn, xn_pred),
            dev_dmu: relative_deviation(gs.mu2 - gs.mu1, pred.dmu_pred),
            dev_kn: relative_deviation(kn, pred.kn_pred),
            dev_absum: relative_deviation(fit.a + fit.b, kn / SQRT_2),
        };
        rec.check_finite()?;
        Ok(rec)
    }

    pub fn values(&self) -> [f64; 21] {
        [
            self.p, self.l, self.n as f64, self.e, self.t, self.pot, self.mu1, self.mu2, self.xn, self.a, self.b,
            self.kn, self.phi_sup, self.psi_sup, self.xn_pred, self.dmu_pred, self.kn_pred, self.dev_xn,
            self.dev_dmu, self.dev_kn, self.dev_absum,
        ]
    }

    fn check_finite(&self) -> Result<()> {
        if self.values().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NumericalFailure(format!("non-finite field in sweep record at p = {}", self.p)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: usize,
    /// x_n = c (2−p)^γ
    pub gamma: f64,
    pub amplitude: f64,
    pub gamma_stderr: f64,
    pub p: Vec<f64>,
    /// (2−p)x_n²
    pub squared: Vec<f64>,
    /// pairs (in increasing p) where |s_p − 48| decreases
    pub squared_trend: usize,
    pub squared_pairs: usize,
    /// (2−p)x_n
    pub linear: Vec<f64>,
    pub linear_decreasing: bool,
    /// measured Δμ / predicted Δμ
    pub dmu_ratio: Vec<f64>,
    pub dmu_trend: usize,
    /// √2(a+b)/K_n
    pub absum_ratio: Vec<f64>,
    pub absum_trend: usize,
    pub consistent: bool,
    pub flags: Vec<String>,
}

fn closer_to_one_count(v: &[f64]) -> usize {
    v.windows(2).filter(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs()).count()
}

/// Log-log regression of x_n against 2−p and the trend statistics along p.
pub fn sweep_analysis(records: &[SweepRecord]) -> Result<SweepReport> {
    if records.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: records.len(),
        });
    }
    let mut recs: Vec<&SweepRecord> = records.iter().collect();
    for r in &recs {
        if !(r.p < 2.0) || !(r.xn > 0.0) || !r.xn.is_finite() {
            return Err(invalid(format!("sweep record needs p < 2 and xn > 0, got p = {}, xn = {}", r.p, r.xn)));
        }
    }
    recs.sort_by(|a, b| a.p.total_cmp(&b.p).then(a.xn.total_cmp(&b.xn)));

    let xs: Vec<f64> = recs.iter().map(|r| (2.0 - r.p).ln()).collect();
    let ys: Vec<f64> = recs.iter().map(|r| r.xn.ln()).collect();
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    if !(sxx > 0.0) {
        return Err(invalid("sweep needs at least two distinct p values"));
    }
    let gamma = sxy / sxx;
    let intercept = ybar - gamma * xbar;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - gamma * x).powi(2)).sum();
    let gamma_stderr = if m > 2.0 { (sse / (m - 2.0) / sxx).sqrt() } else { f64::NAN };
    let amplitude = intercept.exp();

    let p: Vec<f64> = recs.iter().map(|r| r.p).collect();
    let squared: Vec<f64> = recs.iter().map(|r| (2.0 - r.p) * r.xn * r.xn).collect();
    let squared_pairs = squared.len() - 1;
    let squared_trend = squared
        .windows(2)
        .filter(|w| (w[1] - SQUARED_LIMIT).abs() < (w[0] - SQUARED_LIMIT).abs())
        .count();
    let linear: Vec<f64> = recs.iter().map(|r| (2.0 - r.p) * r.xn).collect();
    let linear_decreasing = linear.windows(2).all(|w| w[1] < w[0]);
    let dmu_ratio: Vec<f64> = recs.iter().map(|r| (r.mu2 - r.mu1) / r.dmu_pred).collect();
    let absum_ratio: Vec<f64> = recs.iter().map(|r| SQRT_2 * (r.a + r.b) / r.kn).collect();

    let c_ref = 4.0 * 3.0_f64.sqrt();
    let needed_trend = (3 * squared_pairs).div_ceil(4);
    let mut flags = Vec::new();
    if (gamma + 0.5).abs() > 0.05 {
        flags.push(format!("exponent {gamma:.4} outside -0.5 +/- 0.05"));
    }
    if (amplitude / c_ref - 1.0).abs() > 0.15 {
        flags.push(format!("amplitude {amplitude:.4} not within 15% of {c_ref:.4}"));
    }
    if squared_trend < needed_trend {
        flags.push(format!(
            "(2-p)xn^2 approaches {SQUARED_LIMIT} in only {squared_trend} of {squared_pairs} pairs"
        ));
    }
    if !linear_decreasing {
        flags.push("(2-p)xn not decreasing".into());
    }
    Ok(SweepReport {
        points: recs.len(),
        gamma,
        amplitude,
        gamma_stderr,
        p,
        squared,
        squared_trend,
        squared_pairs,
        linear,
        linear_decreasing,
        dmu_trend: closer_to_one_count(&dmu_ratio),
        dmu_ratio,
        absum_trend: closer_to_one_count(&absum_ratio),
        absum_ratio,
        consistent: flags.is_empty(),
        flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Escaping,
    Bound,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Escaping => "escaping",
            Verdict::Bound => "bound",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    #[serde(rename = "L")]
    pub l: f64,
    pub converged: bool,
    pub xn: Option<f64>,
    pub energy: Option<f64>,
    /// E(L) − 2J₁(p)
    pub gap: Option<f64>,
    pub iterations: usize,
    pub residual_sup: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub p: f64,
    pub two_j1: f64,
    pub rows: Vec<ProbeRow>,
    pub verdict: Verdict,
    /// true when some L failed and the verdict uses the converged subset
    pub partial: bool,
    /// (max − min)/mean of x_n
    pub xn_spread: f64,
    /// relative x_n growth per doubling of L, consecutive pairs
    pub growth_per_doubling: Vec<f64>,
    pub gap_shrinking: bool,
}

fn probe_row(l: f64, cfg: &SolverConfig, two_j1: f64) -> ProbeRow {
    let mut row = ProbeRow {
        l,
        converged: false,
        xn: None,
        energy: None,
        gap: None,
        iterations: 0,
        residual_sup: None,
        error: None,
    };
    let outcome = relax(cfg).and_then(|gs| {
        let bumps = detect_bumps(&gs.pair.density(), gs.grid())?;
        Ok((gs, bumps.xn))
    });
    match outcome {
        Ok((gs, xn)) => {
            row.converged = true;
            row.xn = Some(xn);
            row.energy = Some(gs.split.total);
            row.gap = Some(gs.split.total - two_j1);
            row.iterations = gs.iterations;
            row.residual_sup = Some(gs.residual_sup);
        }
        Err(e) => {
            if let Error::NonConvergence { iterations, residual } = e {
                row.iterations = iterations;
                row.residual_sup = Some(residual);
            }
            row.error = Some(e.to_string());
        }
    }
    row
}

fn classify(rows: &[&ProbeRow]) -> (Verdict, f64, Vec<f64>, bool) {
    let xs: Vec<f64> = rows.iter().filter_map(|r| r.xn).collect();
    if xs.len() < 2 {
        return (Verdict::Inconclusive, f64::NAN, Vec::new(), false);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let spread = (hi - lo) / mean;
    let growth: Vec<f64> = rows
        .windows(2)
        .map(|w| {
            let doublings = (w[1].l / w[0].l).log2();
            (w[1].xn.unwrap_or(f64::NAN) / w[0].xn.unwrap_or(f64::NAN)).powf(1.0 / doublings) - 1.0
        })
        .collect();
    let gaps: Vec<f64> = rows.iter().filter_map(|r| r.gap).collect();
    let gap_shrinking = gaps.windows(2).all(|w| w[1].abs() < w[0].abs());
    let verdict = if growth.iter().all(|&g| g >= 0.25) && gap_shrinking {
        Verdict::Escaping
    } else if spread < 0.01 {
        Verdict::Bound
    } else {
        Verdict::Inconclusive
    };
    (verdict, spread, growth, gap_shrinking)
}

/// Relaxes a two-bump start on each half width L (x_n seed L/4) concurrently and classifies the
/// L-dependence of the bump distance.
pub fn escape_probe(p: f64, l_list: &[f64], config: &SolverConfig) -> Result<ProbeReport> {
    if !(p > 1.5 && p <= 2.1) {
        return Err(invalid(format!("probe exponent must lie in (1.5, 2.1], got {p}")));
    }
    if l_list.len() < 3 {
        return Err(invalid(format!("probe needs at least 3 half widths, got {}", l_list.len())));
    }
    if l_list.iter().any(|l| !(*l > 0.0)) || l_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("half widths must be positive and strictly ascending"));
    }
    let mut base = config.clone();
    base.p = p;
    base.mode = Mode::Probe;
    base.validate()?;

    let mut single_cfg = base.clone();
    single_cfg.half_width = None;
    let j1 = relax_single(&single_cfg)?.split.total;
    let two_j1 = 2.0 * j1;

    let rows: Vec<ProbeRow> = std::thread::scope(|scope| {
        let handles: Vec<_> = l_list
            .iter()
            .map(|&l| {
                let mut cfg = base.clone();
                cfg.half_width = Some(l);
                cfg.xn_seed = Some(l / 4.0);
                scope.spawn(move || probe_row(l, &cfg, two_j1))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("probe worker panicked")).collect()
    });

    let ok: Vec<&ProbeRow> = rows.iter().filter(|r| r.converged).collect();
    let partial = ok.len() < rows.len();
    let (verdict, xn_spread, growth_per_doubling, gap_shrinking) = classify(&ok);
    Ok(ProbeReport {
        p,
        two_j1,
        rows,
        verdict,
        partial,
        xn_spread,
        growth_per_doubling,
        gap_shrinking,
    })
}
