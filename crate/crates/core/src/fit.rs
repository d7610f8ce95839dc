//! Two-soliton decomposition of a converged state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sup_norm, Grid};
use crate::nelder_mead::{minimize, NelderMeadOptions};
use crate::solitons::{w_star, w_star_prime, SolitonSpec};
use crate::solver::GroundState;

/// Open parameter box (−4/5, 4/5)⁴.
pub const PARAM_BOUND: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpInfo {
    pub locations: [f64; 2],
    pub heights: [f64; 2],
    pub xn: f64,
}

/// Local maxima of ρ above 10% of the global maximum, refined by a parabola through three points.
pub fn detect_bumps(rho: &[f64], grid: &Grid) -> Result<BumpInfo> {
    grid.check_len(rho)?;
    let top = rho.iter().cloned().fold(0.0_f64, f64::max);
    let n = rho.len();
    let mut found: Vec<(f64, f64)> = Vec::new();
    for k in 1..n - 1 {
        let (a, b, c) = (rho[k - 1], rho[k], rho[k + 1]);
        if b > a && b >= c && b > 0.1 * top {
            let den = a - 2.0 * b + c;
            let off = if den < 0.0 { 0.5 * (a - c) / den } else { 0.0 };
            let height = b - 0.25 * (a - c) * off;
            found.push((grid.x(k) + off * grid.h(), height));
        }
    }
    if found.len() != 2 {
        return Err(Error::BumpCount {
            locations: found.iter().map(|f| f.0).collect(),
        });
    }
    Ok(BumpInfo {
        locations: [found[0].0, found[1].0],
        heights: [found[0].1, found[1].1],
        xn: found[1].0 - found[0].0,
    })
}

/// Basis profiles of the decomposition: w̃(p,μ₁) at `origin`, w̃(p,μ₂) at `origin + xn`.
#[derive(Debug, Clone)]
pub struct Basis {
    pub grid: Grid,
    pub spec1: SolitonSpec,
    pub spec2: SolitonSpec,
    pub origin: f64,
    pub xn: f64,
}

impl Basis {
    pub fn center1(&self, delta: f64) -> f64 {
        self.origin + delta
    }

    pub fn center2(&self, eta: f64) -> f64 {
        self.origin + self.xn - eta
    }

    /// (W1, W1', W2, W2') sampled at the shifted centres.
    fn profiles(&self, delta: f64, eta: f64) -> [Vec<f64>; 4] {
        let (c1, c2) = (self.center1(delta), self.center2(eta));
        [
            self.spec1.sample(&self.grid, c1),
            self.spec1.sample_derivative(&self.grid, c1),
            self.spec2.sample(&self.grid, c2),
            self.spec2.sample_derivative(&self.grid, c2),
        ]
    }

    /// Model pair for θ = (a, b, δ, η).
    pub fn model(&self, theta: &[f64; 4]) -> (Vec<f64>, Vec<f64>) {
        let [a, b, delta, eta] = *theta;
        let [w1, _, w2, _] = self.profiles(delta, eta);
        let (sa, sb) = ((1.0 - a * a).sqrt(), (1.0 - b * b).sqrt());
        let m1 = w1.iter().zip(&w2).map(|(x, y)| sb * x + a * y).collect();
        let m2 = w1.iter().zip(&w2).map(|(x, y)| b * x + sa * y).collect();
        (m1, m2)
    }

    fn objective(&self, u1: &[f64], u2: &[f64], theta: &[f64; 4]) -> f64 {
        let [a, b, delta, eta] = *theta;
        if a.abs() >= 1.0 || b.abs() >= 1.0 {
            return f64::INFINITY;
        }
        let (sa, sb) = ((1.0 - a * a).sqrt(), (1.0 - b * b).sqrt());
        let (c1, c2) = (self.center1(delta), self.center2(eta));
        let g = &self.grid;
        let mut s = 0.0;
        for k in 0..g.len() {
            let x = g.x(k);
            let w1 = self.spec1.value(x - c1);
            let w2 = self.spec2.value(x - c2);
            let r1 = u1[k] - sb * w1 - a * w2;
            let r2 = u2[k] - b * w1 - sa * w2;
            s += g.weight(k) * (r1 * r1 + r2 * r2);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub eta: f64,
    pub xn: f64,
    /// x-coordinate of the first bump (the origin of the decomposition).
    pub origin: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub p: f64,
    pub f_value: f64,
    pub nm_iterations: usize,
    #[serde(skip)]
    pub phi: Vec<f64>,
    #[serde(skip)]
    pub psi: Vec<f64>,
    #[serde(skip)]
    pub phi_hat: Vec<f64>,
    #[serde(skip)]
    pub psi_hat: Vec<f64>,
    pub phi_sup: f64,
    pub psi_sup: f64,
    pub phi_hat_sup: f64,
    pub psi_hat_sup: f64,
}

impl FitResult {
    /// K = a√(1−b²) + b√(1−a²).
    pub fn kn(&self) -> f64 {
        k_of(self.a, self.b)
    }

    pub fn params(&self) -> [f64; 4] {
        [self.a, self.b, self.delta, self.eta]
    }

    pub fn basis(&self, grid: &Grid) -> Result<Basis> {
        Ok(Basis {
            grid: grid.clone(),
            spec1: SolitonSpec::new(self.p, self.mu1)?,
            spec2: SolitonSpec::new(self.p, self.mu2)?,
            origin: self.origin,
            xn: self.xn,
        })
    }
}

pub fn k_of(a: f64, b: f64) -> f64 {
    a * (1.0 - b * b).sqrt() + b * (1.0 - a * a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub restarts: usize,
    pub seed: u64,
    pub nelder_mead: NelderMeadOptions,
    pub polish: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            seed: 7,
            nelder_mead: NelderMeadOptions {
                f_tol: 1e-12,
                max_iterations: 2000,
                initial_step: 0.05,
                lower: -PARAM_BOUND,
                upper: PARAM_BOUND,
            },
            polish: true,
        }
    }
}

pub fn standard_start() -> [f64; 4] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    [r, -r, 0.0, 0.0]
}

/// Gauss–Newton steps on the analytic Jacobian; never increases F.
fn polish(basis: &Basis, u1: &[f64], u2: &[f64], theta: [f64; 4]) -> [f64; 4] {
    let g = &basis.grid;
    let mut theta = theta;
    let mut f = basis.objective(u1, u2, &theta);
    for _ in 0..30 {
        let [a, b, delta, eta] = theta;
        let [w1, dw1, w2, dw2] = basis.profiles(delta, eta);
        let (sa, sb) = ((1.0 - a * a).sqrt(), (1.0 - b * b).sqrt());
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for k in 0..g.len() {
            let wk = g.weight(k);
            let r1 = u1[k] - sb * w1[k] - a * w2[k];
            let r2 = u2[k] - b * w1[k] - sa * w2[k];
            let j1 = [w2[k], -b / sb * w1[k], -sb * dw1[k], a * dw2[k]];
            let j2 = [-a / sa * w2[k], w1[k], -b * dw1[k], sa * dw2[k]];
            for i in 0..4 {
                jtr[i] += wk * (j1[i] * r1 + j2[i] * r2);
                for j in 0..4 {
                    jtj[i][j] += wk * (j1[i] * j1[j] + j2[i] * j2[j]);
                }
            }
        }
        let Some(step) = solve4(jtj, jtr) else { break };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..20 {
            let mut trial = theta;
            for i in 0..4 {
                trial[i] += t * step[i];
            }
            if trial.iter().all(|v| v.abs() < PARAM_BOUND) {
                let ft = basis.objective(u1, u2, &trial);
                if ft <= f {
                    let gain = f - ft;
                    theta = trial;
                    f = ft;
                    improved = gain > 0.0;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved || step.iter().all(|s| s.abs() < 1e-15) {
            break;
        }
    }
    theta
}

fn solve4(mut m: [[f64; 4]; 4], mut r: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 4];
    for i in (0..4).rev() {
        let s: f64 = (i + 1..4).map(|k| m[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Fits a pair (u1, u2) against the given basis.
pub fn fit_pair(basis: &Basis, u1: &[f64], u2: &[f64], opts: &FitOptions) -> Result<FitResult> {
    let obj = |t: &[f64; 4]| basis.objective(u1, u2, t);
    let start = standard_start();
    let mut best = minimize(obj, start, &opts.nelder_mead);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        let mut s = start;
        for v in s.iter_mut() {
            *v += rng.gen_range(-0.05..0.05);
        }
        let r = minimize(obj, s, &opts.nelder_mead);
        if r.f < best.f {
            best = r;
        }
    }
    let edge = PARAM_BOUND * (1.0 - 1e-12);
    if best.x.iter().any(|v| v.abs() >= edge) || !best.f.is_finite() {
        return Err(Error::FitDiverged { params: best.x });
    }
    let theta = if opts.polish { polish(basis, u1, u2, best.x) } else { best.x };
    let mut fit = assemble(basis, u1, u2, theta);
    fit.nm_iterations = best.iterations;
    Ok(fit)
}

fn assemble(basis: &Basis, u1: &[f64], u2: &[f64], theta: [f64; 4]) -> FitResult {
    let [a, b, delta, eta] = theta;
    let (m1, m2) = basis.model(&theta);
    let phi: Vec<f64> = u1.iter().zip(&m1).map(|(u, m)| u - m).collect();
    let psi: Vec<f64> = u2.iter().zip(&m2).map(|(u, m)| u - m).collect();
    let (sa, sb) = ((1.0 - a * a).sqrt(), (1.0 - b * b).sqrt());
    let phi_hat: Vec<f64> = phi.iter().zip(&psi).map(|(f, s)| sb * f + b * s).collect();
    let psi_hat: Vec<f64> = phi.iter().zip(&psi).map(|(f, s)| a * f + sa * s).collect();
    let g = &basis.grid;
    FitResult {
        a,
        b,
        delta,
        eta,
        xn: basis.xn,
        origin: basis.origin,
        mu1: basis.spec1.mu,
        mu2: basis.spec2.mu,
        p: basis.spec1.p,
        f_value: g.dot(&phi, &phi) + g.dot(&psi, &psi),
        nm_iterations: 0,
        phi_sup: sup_norm(&phi),
        psi_sup: sup_norm(&psi),
        phi_hat_sup: sup_norm(&phi_hat),
        psi_hat_sup: sup_norm(&psi_hat),
        phi,
        psi,
        phi_hat,
        psi_hat,
    }
}

/// Basis for a gauge-fixed state: bumps from the density, multipliers from the state.
pub fn basis_for(gs: &GroundState) -> Result<Basis> {
    let grid = gs.grid();
    let bumps = detect_bumps(&gs.pair.density(), grid)?;
    Ok(Basis {
        grid: grid.clone(),
        spec1: SolitonSpec::new(gs.p, gs.mu1)?,
        spec2: SolitonSpec::new(gs.p, gs.mu2)?,
        origin: bumps.locations[0],
        xn: bumps.xn,
    })
}

pub fn fit_decomposition(gs: &GroundState) -> Result<FitResult> {
    fit_decomposition_with(gs, &FitOptions::default())
}

pub fn fit_decomposition_with(gs: &GroundState, opts: &FitOptions) -> Result<FitResult> {
    let basis = basis_for(gs)?;
    fit_pair(&basis, &gs.pair.u1, &gs.pair.u2, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderConditions {
    /// ∫[−bφ + √(1−b²)ψ] w̃₁
    pub b_condition: f64,
    /// ∫[√(1−b²)φ + bψ] w̃₁′
    pub delta_condition: f64,
    /// ∫[√(1−a²)φ − aψ] w̃₂
    pub a_condition: f64,
    /// ∫[aφ + √(1−a²)ψ] w̃₂′
    pub eta_condition: f64,
}

impl FirstOrderConditions {
    pub fn max_abs(&self) -> f64 {
        [self.b_condition, self.delta_condition, self.a_condition, self.eta_condition]
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

pub fn first_order_conditions_at(basis: &Basis, theta: [f64; 4], u1: &[f64], u2: &[f64]) -> FirstOrderConditions {
    let fit = assemble(basis, u1, u2, theta);
    let [a, b, delta, eta] = theta;
    let [w1, dw1, w2, dw2] = basis.profiles(delta, eta);
    let (sa, sb) = ((1.0 - a * a).sqrt(), (1.0 - b * b).sqrt());
    let g = &basis.grid;
    let comb = |ca: f64, cb: f64| -> Vec<f64> {
        fit.phi.iter().zip(&fit.psi).map(|(f, s)| ca * f + cb * s).collect()
    };
    FirstOrderConditions {
        b_condition: g.dot(&comb(-b, sb), &w1),
        delta_condition: g.dot(&comb(sb, b), &dw1),
        a_condition: g.dot(&comb(sa, -a), &w2),
        eta_condition: g.dot(&comb(a, sa), &dw2),
    }
}

pub fn first_order_conditions(fit: &FitResult, gs: &GroundState) -> Result<FirstOrderConditions> {
    let basis = fit.basis(gs.grid())?;
    Ok(first_order_conditions_at(&basis, fit.params(), &gs.pair.u1, &gs.pair.u2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeMatch {
    pub corr: f64,
    /// Least-squares amplitude of the measured field along the predicted shape, over e^{−√|μ₂|x_n}.
    pub amplitude_ratio: f64,
    /// Fraction of the field's squared norm in its odd part about the window centre.
    pub odd_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectorReport {
    pub scale: f64,
    pub phi: ShapeMatch,
    pub psi: ShapeMatch,
    pub phi_far: ShapeMatch,
    pub psi_far: ShapeMatch,
}

impl CorrectorReport {
    pub fn corr_phi(&self) -> f64 {
        self.phi.corr
    }

    pub fn corr_psi(&self) -> f64 {
        self.psi.corr
    }
}

fn shape_match(grid: &Grid, field: &[f64], center: f64, half: f64, shape: impl Fn(f64) -> f64, scale: f64) -> Result<ShapeMatch> {
    let idx: Vec<usize> = (0..grid.len()).filter(|&k| (grid.x(k) - center).abs() < half).collect();
    if idx.len() < 3 {
        return Err(Error::EmptyWindow(format!("window |x - {center}| < {half} holds {} points", idx.len())));
    }
    let h = grid.h();
    let (mut fm, mut mm, mut ff) = (0.0, 0.0, 0.0);
    for &k in &idx {
        let m = shape(grid.x(k) - center);
        fm += h * field[k] * m;
        mm += h * m * m;
        ff += h * field[k] * field[k];
    }
    // parity about the centre by interpolating the mirror value
    let mirror = |x: f64| {
        let s = (x + grid.half_width()) / h;
        let k = (s.floor() as usize).min(grid.len() - 2);
        let t = s - k as f64;
        (1.0 - t) * field[k] + t * field[k + 1]
    };
    let (mut odd, mut total) = (0.0, 0.0);
    for &k in &idx {
        let x = grid.x(k);
        let f = field[k];
        let fr = mirror(2.0 * center - x);
        odd += 0.25 * (f - fr) * (f - fr);
        total += f * f;
    }
    Ok(ShapeMatch {
        corr: if ff > 0.0 && mm > 0.0 { fm / (ff * mm).sqrt() } else { 0.0 },
        amplitude_ratio: fm / mm / scale,
        odd_fraction: if total > 0.0 { odd / total } else { 0.0 },
    })
}

/// Compares φ̂, ψ̂ with −2(xw_*′+w_*)e^{−s}, −(x/2)w_*e^{−s} near the first bump and the swapped
/// shapes near the second.
pub fn corrector_shapes(fit: &FitResult, gs: &GroundState) -> Result<CorrectorReport> {
    if !(gs.p < 2.0) {
        return Err(Error::PredictionUndefined { p: gs.p });
    }
    let grid = gs.grid();
    let half = fit.xn / 4.0;
    let scale = (-gs.mu2.abs().sqrt() * fit.xn).exp();
    let c1 = fit.origin + fit.delta;
    let c2 = fit.origin + fit.xn - fit.eta;
    let near_phi = |y: f64| -2.0 * (y * w_star_prime(y) + w_star(y));
    let near_psi = |y: f64| -0.5 * y * w_star(y);
    let far_psi = |y: f64| 2.0 * (y * w_star_prime(y) + w_star(y));
    let far_phi = |y: f64| 0.5 * y * w_star(y);
    Ok(CorrectorReport {
        scale,
        phi: shape_match(grid, &fit.phi_hat, c1, half, near_phi, scale)?,
        psi: shape_match(grid, &fit.psi_hat, c1, half, near_psi, scale)?,
        phi_far: shape_match(grid, &fit.phi_hat, c2, half, far_phi, scale)?,
        psi_far: shape_match(grid, &fit.psi_hat, c2, half, far_psi, scale)?,
    })
}
