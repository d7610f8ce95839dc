//! Orthonormality-preserving gradient flow for the two-orbital problem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{
    apply_h, density, energy, energy_single, multiplier_matrix, power, EnergySplit, MultiplierMatrix, OrbitalPair,
};
use crate::error::{invalid, Error, Result};
use crate::fit::detect_bumps;
use crate::grid::{build_schrodinger, sup_norm, thomas_in_place, Grid};
use crate::solitons::{mu_from_norm, SolitonSpec};

/// 4√3 (2−p)^{−1/2}.
pub fn xn_prediction(p: f64) -> Result<f64> {
    if !(p < 2.0) {
        return Err(Error::PredictionUndefined { p });
    }
    Ok(4.0 * 3.0_f64.sqrt() / (2.0 - p).sqrt())
}

/// L = max(60, 2 x_pred + 60).
pub fn auto_half_width(p: f64) -> Result<f64> {
    Ok((2.0 * xn_prediction(p)? + 60.0).max(60.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Explicit,
    SemiImplicit,
    /// Limited-memory quasi-Newton on the pair manifold, preconditioned by (−D_xx + c)^{−1}.
    Lbfgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Solve,
    Probe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Start {
    Ansatz,
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub p: f64,
    /// Half width L; `None` applies the sizing rule.
    pub half_width: Option<f64>,
    pub h: f64,
    pub tau: f64,
    pub tau_min: f64,
    pub shift: f64,
    pub tol: f64,
    pub max_iterations: usize,
    pub xn_seed: Option<f64>,
    pub mixing_angle: f64,
    pub scheme: Scheme,
    pub backtracking: bool,
    pub mode: Mode,
    pub start: Start,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            p: 1.9,
            half_width: None,
            h: 0.05,
            tau: 0.5,
            tau_min: 1e-6,
            shift: 1.0,
            tol: 1e-8,
            max_iterations: 2_000_000,
            xn_seed: None,
            mixing_angle: 0.0,
            scheme: Scheme::SemiImplicit,
            backtracking: true,
            mode: Mode::Solve,
            start: Start::Ansatz,
        }
    }
}

impl SolverConfig {
    pub fn new(p: f64) -> Self {
        Self { p, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p;
        match self.mode {
            Mode::Solve if !(p > 1.5 && p <= 2.0) => {
                return Err(invalid(format!("p = {p} outside the solve range (1.5, 2]; p > 2 needs probe mode")))
            }
            Mode::Probe if !(p > 1.5 && p < 2.5) => {
                return Err(invalid(format!("p = {p} outside the probe range (1.5, 2.5)")))
            }
            _ => {}
        }
        if !(self.tau > 0.0) || !(self.tol > 0.0) || !(self.h > 0.0) || !(self.tau_min > 0.0) {
            return Err(invalid("tau, tau_min, tol and h must be positive"));
        }
        if !(self.shift >= 0.0) {
            return Err(invalid("shift must be non-negative"));
        }
        if let Some(l) = self.half_width {
            if !(l > 0.0) {
                return Err(invalid(format!("half width must be positive, got {l}")));
            }
        }
        if let Some(x) = self.xn_seed {
            if !(x > 0.0) {
                return Err(invalid(format!("xn_seed must be positive, got {x}")));
            }
        }
        Ok(())
    }

    pub fn resolved_half_width(&self) -> Result<f64> {
        match self.half_width {
            Some(l) => Ok(l),
            None => auto_half_width(self.p)
                .map_err(|_| invalid(format!("p = {} requires an explicit half width", self.p))),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::with_spacing(self.resolved_half_width()?, self.h)
    }

    pub fn resolved_xn_seed(&self) -> Result<f64> {
        match self.xn_seed {
            Some(x) => Ok(x),
            None => xn_prediction(self.p)
                .map_err(|_| invalid(format!("p = {} requires an explicit xn seed", self.p))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub pair: OrbitalPair,
    pub p: f64,
    pub split: EnergySplit,
    pub mu1: f64,
    pub mu2: f64,
    pub lambda: MultiplierMatrix,
    pub residual_sup: f64,
    pub iterations: usize,
    pub gauge_fixed: bool,
    pub warnings: Vec<String>,
}

impl GroundState {
    pub fn grid(&self) -> &Grid {
        &self.pair.grid
    }

    /// Rebuilds the derived quantities of a stored pair.
    pub fn from_pair(pair: OrbitalPair, p: f64) -> Result<Self> {
        let split = energy(&pair, p)?;
        let lambda = multiplier_matrix(&pair, p)?;
        let residual_sup = crate::energy::projected_residual(&pair, p, &lambda)?;
        let ([mu1, mu2], _) = lambda.eigen();
        Ok(Self {
            pair,
            p,
            split,
            mu1,
            mu2,
            lambda,
            residual_sup,
            iterations: 0,
            gauge_fixed: false,
            warnings: Vec::new(),
        })
    }
}

/// Pair times S^{−1/2}, S the Gram matrix.
pub fn lowdin_orthonormalize(pair: &OrbitalPair) -> Result<OrbitalPair> {
    let s = pair.gram();
    let det = s[0][0] * s[1][1] - s[0][1] * s[0][1];
    if !(det > 1e-14) {
        return Err(Error::DegeneratePair { det });
    }
    let ([l1, l2], v) = MultiplierMatrix { m: s }.eigen();
    let (r1, r2) = (1.0 / l1.sqrt(), 1.0 / l2.sqrt());
    let mut m = [[0.0; 2]; 2];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = v[i][0] * r1 * v[j][0] + v[i][1] * r2 * v[j][1];
        }
    }
    let mut out = pair.mixed(m);
    out.orthonormalized = true;
    Ok(out)
}

/// Two rotated solitons (√2/2)(w̃ ± w̃(·−x_n)) at the unit-norm multiplier, Löwdin-orthonormalized.
pub fn initial_ansatz(p: f64, grid: &Grid, xn_seed: f64) -> Result<OrbitalPair> {
    if !(xn_seed > 0.0) {
        return Err(invalid(format!("xn_seed must be positive, got {xn_seed}")));
    }
    if xn_seed >= grid.half_width() {
        return Err(Error::DomainTooSmall(format!(
            "xn_seed {xn_seed} does not fit in half width {}",
            grid.half_width()
        )));
    }
    let spec = SolitonSpec::new(p, mu_from_norm(p, 1.0)?)?;
    let w1 = spec.sample(grid, 0.0);
    let w2 = spec.sample(grid, xn_seed);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let u1 = w1.iter().zip(&w2).map(|(a, b)| r * (a + b)).collect();
    let u2 = w1.iter().zip(&w2).map(|(a, b)| r * (b - a)).collect();
    lowdin_orthonormalize(&OrbitalPair::new(grid.clone(), u1, u2)?)
}

/// Random smooth orthonormal pair: Gaussian bumps with random centres, widths and weights.
pub fn random_pair(grid: &Grid, seed: u64, spread: f64) -> Result<OrbitalPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bumps = Vec::new();
    for _ in 0..6 {
        let c: f64 = rng.gen_range(-spread..spread);
        let w: f64 = rng.gen_range(2.0..6.0);
        let a1: f64 = rng.gen_range(-1.0..1.0);
        let a2: f64 = rng.gen_range(-1.0..1.0);
        bumps.push((c, w, a1, a2));
    }
    let f = |x: f64, pick: usize| {
        bumps
            .iter()
            .map(|&(c, w, a1, a2)| {
                let g = (-((x - c) / w).powi(2)).exp();
                if pick == 0 {
                    a1 * g
                } else {
                    a2 * g
                }
            })
            .sum::<f64>()
    };
    let u1 = grid.sample(|x| f(x, 0));
    let u2 = grid.sample(|x| f(x, 1));
    lowdin_orthonormalize(&OrbitalPair::new(grid.clone(), u1, u2)?)
}

struct Factor {
    tau: f64,
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl Factor {
    fn new(n: usize, tau: f64, shift: f64, inv_h2: f64) -> Self {
        Self {
            tau,
            diag: vec![1.0 + tau * (2.0 * inv_h2 + shift); n],
            off: vec![-tau * inv_h2; n - 1],
        }
    }
}

struct FlowState {
    u1: Vec<f64>,
    u2: Vec<f64>,
    /// ρ^{p−1}
    attract: Vec<f64>,
    energy: f64,
}

/// Roundoff allowance for energy comparisons on an n-point grid.
fn energy_slack(n: usize, energy: f64) -> f64 {
    64.0 * (n as f64).sqrt() * f64::EPSILON * energy.abs()
}

fn flow_energy(u1: &[f64], u2: &[f64], grid: &Grid, p: f64, attract: &mut [f64]) -> f64 {
    let t = crate::energy::kinetic(u1, grid) + crate::energy::kinetic(u2, grid);
    let n = u1.len();
    let mut pot = 0.0;
    for k in 0..n {
        let r = u1[k] * u1[k] + u2[k] * u2[k];
        let a = power(r, p - 1.0);
        attract[k] = a;
        pot += grid.weight(k) * r * a;
    }
    t - pot / p
}

fn lowdin_in_place(u1: &mut [f64], u2: &mut [f64], grid: &Grid) -> Result<()> {
    let pair_gram = [
        grid.dot(u1, u1),
        grid.dot(u1, u2),
        grid.dot(u2, u2),
    ];
    let s = [[pair_gram[0], pair_gram[1]], [pair_gram[1], pair_gram[2]]];
    let det = s[0][0] * s[1][1] - s[0][1] * s[0][1];
    if !(det > 1e-14) {
        return Err(Error::DegeneratePair { det });
    }
    let ([l1, l2], v) = MultiplierMatrix { m: s }.eigen();
    let (r1, r2) = (1.0 / l1.sqrt(), 1.0 / l2.sqrt());
    let mut m = [[0.0; 2]; 2];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = v[i][0] * r1 * v[j][0] + v[i][1] * r2 * v[j][1];
        }
    }
    for k in 0..u1.len() {
        let (a, b) = (u1[k], u2[k]);
        u1[k] = m[0][0] * a + m[1][0] * b;
        u2[k] = m[0][1] * a + m[1][1] * b;
    }
    Ok(())
}

/// Runs the flow from `start` and returns the gauge-fixed state.
pub fn relax_from(config: &SolverConfig, start: OrbitalPair) -> Result<GroundState> {
    config.validate()?;
    if config.scheme == Scheme::Lbfgs {
        return relax_lbfgs(config, start);
    }
    let grid = start.grid.clone();
    let p = config.p;
    let n = grid.len();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let explicit = config.scheme == Scheme::Explicit;

    let mut u1 = start.u1;
    let mut u2 = start.u2;
    lowdin_in_place(&mut u1, &mut u2, &grid)?;
    let mut attract = vec![0.0; n];
    let e0 = flow_energy(&u1, &u2, &grid, p, &mut attract);
    let mut cur = FlowState { u1, u2, attract, energy: e0 };

    let mut tau = if explicit { config.tau.min(0.4 / (2.0 * inv_h2 + 1.0)) } else { config.tau };
    let mut factor = Factor::new(n, tau, config.shift, inv_h2);
    let mut hu1 = vec![0.0; n];
    let mut hu2 = vec![0.0; n];
    let mut v1 = vec![0.0; n];
    let mut v2 = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut trial_attract = vec![0.0; n];
    let mut accepted_run = 0usize;
    let mut residual = f64::INFINITY;

    for iter in 0..=config.max_iterations {
        apply_h(&cur.u1, &cur.attract, inv_h2, &mut hu1);
        apply_h(&cur.u2, &cur.attract, inv_h2, &mut hu2);
        let l11 = grid.dot(&hu1, &cur.u1);
        let l22 = grid.dot(&hu2, &cur.u2);
        let l12 = 0.5 * (grid.dot(&hu1, &cur.u2) + grid.dot(&hu2, &cur.u1));
        residual = 0.0;
        for k in 0..n {
            let r1 = hu1[k] - l11 * cur.u1[k] - l12 * cur.u2[k];
            let r2 = hu2[k] - l12 * cur.u1[k] - l22 * cur.u2[k];
            residual = residual.max(r1.abs()).max(r2.abs());
        }
        if !residual.is_finite() {
            return Err(Error::NumericalFailure(format!("residual became non-finite at iteration {iter}")));
        }
        if residual <= config.tol {
            let pair = OrbitalPair {
                grid: grid.clone(),
                u1: cur.u1,
                u2: cur.u2,
                orthonormalized: true,
            };
            let mut gs = GroundState::from_pair(pair, p)?;
            gs.iterations = iter;
            return gauge_fix(&gs);
        }
        if iter == config.max_iterations {
            break;
        }

        loop {
            if explicit {
                for k in 0..n {
                    v1[k] = cur.u1[k] - tau * (hu1[k] - l11 * cur.u1[k] - l12 * cur.u2[k]);
                    v2[k] = cur.u2[k] - tau * (hu2[k] - l12 * cur.u1[k] - l22 * cur.u2[k]);
                }
            } else {
                if factor.tau != tau {
                    factor = Factor::new(n, tau, config.shift, inv_h2);
                }
                let c = config.shift;
                for k in 0..n {
                    let a = cur.attract[k] + c;
                    v1[k] = cur.u1[k] + tau * (a * cur.u1[k] + l11 * cur.u1[k] + l12 * cur.u2[k]);
                    v2[k] = cur.u2[k] + tau * (a * cur.u2[k] + l12 * cur.u1[k] + l22 * cur.u2[k]);
                }
                thomas_in_place(&factor.diag, &factor.off, 0.0, &mut v1, &mut scratch)?;
                thomas_in_place(&factor.diag, &factor.off, 0.0, &mut v2, &mut scratch)?;
            }
            lowdin_in_place(&mut v1, &mut v2, &grid)?;
            let e_new = flow_energy(&v1, &v2, &grid, p, &mut trial_attract);
            let slack = 64.0 * f64::EPSILON * cur.energy.abs();
            if !config.backtracking || e_new <= cur.energy + slack {
                std::mem::swap(&mut cur.u1, &mut v1);
                std::mem::swap(&mut cur.u2, &mut v2);
                std::mem::swap(&mut cur.attract, &mut trial_attract);
                cur.energy = e_new;
                accepted_run += 1;
                if accepted_run % 50 == 0 && !explicit {
                    tau = (tau * 1.2).min(1e6);
                }
                break;
            }
            tau *= 0.5;
            accepted_run = 0;
            if tau < config.tau_min {
                return Err(Error::Stagnation { tau, iterations: iter });
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: config.max_iterations,
        residual,
    })
}

const LBFGS_MEMORY: usize = 20;

/// Stacked pair (u₁ then u₂) for the quasi-Newton iteration.
struct Stacked<'a> {
    grid: &'a Grid,
    n: usize,
}

impl Stacked<'_> {
    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.n;
        self.grid.dot(&a[..n], &b[..n]) + self.grid.dot(&a[n..], &b[n..])
    }

    /// Removes the components along span(u₁, u₂).
    fn project(&self, u: &[f64], v: &mut [f64]) {
        let n = self.n;
        let (u1, u2) = u.split_at(n);
        let c = [
            [self.grid.dot(u1, &v[..n]), self.grid.dot(u1, &v[n..])],
            [self.grid.dot(u2, &v[..n]), self.grid.dot(u2, &v[n..])],
        ];
        for k in 0..n {
            v[k] -= u1[k] * c[0][0] + u2[k] * c[1][0];
            v[n + k] -= u1[k] * c[0][1] + u2[k] * c[1][1];
        }
    }
}

struct Point {
    u: Vec<f64>,
    energy: f64,
    /// 2(Hu_i − Σ Λ_ij u_j)
    grad: Vec<f64>,
    residual: f64,
}

fn evaluate(u: Vec<f64>, grid: &Grid, p: f64, inv_h2: f64) -> Point {
    let n = grid.len();
    let mut attract = vec![0.0; n];
    let energy = flow_energy(&u[..n], &u[n..], grid, p, &mut attract);
    let mut hu = vec![0.0; 2 * n];
    {
        let (h1, h2) = hu.split_at_mut(n);
        apply_h(&u[..n], &attract, inv_h2, h1);
        apply_h(&u[n..], &attract, inv_h2, h2);
    }
    let (u1, u2) = u.split_at(n);
    let l11 = grid.dot(&hu[..n], u1);
    let l22 = grid.dot(&hu[n..], u2);
    let l12 = 0.5 * (grid.dot(&hu[..n], u2) + grid.dot(&hu[n..], u1));
    let mut residual = 0.0_f64;
    for k in 0..n {
        let r1 = hu[k] - l11 * u1[k] - l12 * u2[k];
        let r2 = hu[n + k] - l12 * u1[k] - l22 * u2[k];
        residual = residual.max(r1.abs()).max(r2.abs());
        hu[k] = 2.0 * r1;
        hu[n + k] = 2.0 * r2;
    }
    Point {
        u,
        energy,
        grad: hu,
        residual,
    }
}

fn retract(u: &[f64], d: &[f64], alpha: f64, grid: &Grid) -> Result<Vec<f64>> {
    let n = grid.len();
    let mut v: Vec<f64> = u.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
    let (v1, v2) = v.split_at_mut(n);
    lowdin_in_place(v1, v2, grid)?;
    Ok(v)
}

fn relax_lbfgs(config: &SolverConfig, start: OrbitalPair) -> Result<GroundState> {
    let grid = start.grid.clone();
    let p = config.p;
    let n = grid.len();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let space = Stacked { grid: &grid, n };
    let diag = vec![2.0 * inv_h2 + config.shift.max(1e-3); n];
    let off = vec![-inv_h2; n - 1];
    let mut scratch = vec![0.0; n];
    let mut precondition = |v: &mut [f64]| -> Result<()> {
        let (a, b) = v.split_at_mut(n);
        thomas_in_place(&diag, &off, 0.0, a, &mut scratch)?;
        thomas_in_place(&diag, &off, 0.0, b, &mut scratch)
    };

    let mut u = start.u1;
    u.extend_from_slice(&start.u2);
    {
        let (a, b) = u.split_at_mut(n);
        lowdin_in_place(a, b, &grid)?;
    }
    let mut cur = evaluate(u, &grid, p, inv_h2);
    let mut memory: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut alphas = vec![0.0; LBFGS_MEMORY];

    for iter in 0..=config.max_iterations {
        if !cur.residual.is_finite() {
            return Err(Error::NumericalFailure(format!("residual became non-finite at iteration {iter}")));
        }
        if cur.residual <= config.tol {
            let pair = OrbitalPair {
                grid: grid.clone(),
                u1: cur.u[..n].to_vec(),
                u2: cur.u[n..].to_vec(),
                orthonormalized: true,
            };
            let mut gs = GroundState::from_pair(pair, p)?;
            gs.iterations = iter;
            return gauge_fix(&gs);
        }
        if iter == config.max_iterations {
            break;
        }

        // two-loop recursion
        let mut q = cur.grad.clone();
        for (i, (s, y, rho)) in memory.iter().enumerate().rev() {
            let a = rho * space.dot(s, &q);
            alphas[i] = a;
            q.iter_mut().zip(y).for_each(|(qk, yk)| *qk -= a * yk);
        }
        precondition(&mut q)?;
        if let Some((s, y, _)) = memory.back() {
            let mut py = y.clone();
            precondition(&mut py)?;
            let gamma = space.dot(s, y) / space.dot(y, &py);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for (i, (s, y, rho)) in memory.iter().enumerate() {
            let b = rho * space.dot(y, &q);
            let a = alphas[i];
            q.iter_mut().zip(s).for_each(|(qk, sk)| *qk += (a - b) * sk);
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        space.project(&cur.u, &mut d);
        let mut slope = space.dot(&cur.grad, &d);
        if !(slope < 0.0) {
            memory.clear();
            d = cur.grad.iter().map(|v| -v).collect();
            precondition(&mut d)?;
            space.project(&cur.u, &mut d);
            slope = space.dot(&cur.grad, &d);
        }

        let dmax = sup_norm(&d);
        let mut alpha = if dmax > 0.5 { 0.5 / dmax } else { 1.0 };
        let slack = energy_slack(grid.len(), cur.energy);
        let next = loop {
            let trial = evaluate(retract(&cur.u, &d, alpha, &grid)?, &grid, p, inv_h2);
            if trial.energy <= cur.energy + 1e-4 * alpha * slope + slack {
                break trial;
            }
            alpha *= 0.5;
            if alpha < config.tau_min {
                if !memory.is_empty() {
                    memory.clear();
                    alpha = f64::NAN;
                    break trial;
                }
                return Err(Error::Stagnation { tau: alpha, iterations: iter });
            }
        };
        if alpha.is_nan() {
            continue;
        }

        let mut s: Vec<f64> = next.u.iter().zip(&cur.u).map(|(a, b)| a - b).collect();
        space.project(&next.u, &mut s);
        let mut old_grad = cur.grad.clone();
        space.project(&next.u, &mut old_grad);
        let y: Vec<f64> = next.grad.iter().zip(&old_grad).map(|(a, b)| a - b).collect();
        for (ms, my, mrho) in memory.iter_mut() {
            space.project(&next.u, ms);
            space.project(&next.u, my);
            *mrho = 1.0 / space.dot(ms, my);
        }
        memory.retain(|(_, _, rho)| rho.is_finite() && *rho > 0.0);
        let sy = space.dot(&s, &y);
        if sy > 0.0 {
            if memory.len() == LBFGS_MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        cur = next;
    }
    Err(Error::NonConvergence {
        iterations: config.max_iterations,
        residual: cur.residual,
    })
}

/// Builds the start pair from the config and runs the flow.
pub fn relax(config: &SolverConfig) -> Result<GroundState> {
    config.validate()?;
    let grid = config.grid()?;
    let start = match config.start {
        Start::Ansatz => {
            let pair = initial_ansatz(config.p, &grid, config.resolved_xn_seed()?)?;
            if config.mixing_angle != 0.0 {
                pair.rotated(config.mixing_angle)
            } else {
                pair
            }
        }
        Start::Random { seed } => {
            let spread = config.xn_seed.unwrap_or(20.0).min(0.5 * grid.half_width());
            random_pair(&grid, seed, spread)?
        }
    };
    relax_from(config, start)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleState {
    pub grid: Grid,
    pub u: Vec<f64>,
    pub split: EnergySplit,
    pub mu: f64,
    pub residual_sup: f64,
    pub iterations: usize,
}

/// Single-orbital flow for J₁(p), started from the unit-norm soliton.
pub fn relax_single(config: &SolverConfig) -> Result<SingleState> {
    config.validate()?;
    let grid = config.grid_single()?;
    let p = config.p;
    let n = grid.len();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let spec = SolitonSpec::new(p, mu_from_norm(p, 1.0)?)?;
    let mut u = spec.sample(&grid, 0.0);
    let normalize = |u: &mut Vec<f64>| {
        let nrm = grid.dot(u, u).sqrt();
        u.iter_mut().for_each(|a| *a /= nrm);
    };
    normalize(&mut u);
    let single_energy = |u: &[f64], attract: &mut [f64]| {
        let t = crate::energy::kinetic(u, &grid);
        let mut pot = 0.0;
        for k in 0..n {
            let r = u[k] * u[k];
            attract[k] = power(r, p - 1.0);
            pot += grid.weight(k) * r * attract[k];
        }
        t - pot / p
    };
    let mut attract = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut e = single_energy(&u, &mut attract);
    let mut tau = config.tau;
    let mut factor = Factor::new(n, tau, config.shift, inv_h2);
    let mut hu = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut run = 0usize;
    let mut residual = f64::INFINITY;
    for iter in 0..=config.max_iterations {
        apply_h(&u, &attract, inv_h2, &mut hu);
        let mu = grid.dot(&hu, &u);
        residual = hu.iter().zip(&u).fold(0.0_f64, |m, (a, b)| m.max((a - mu * b).abs()));
        if residual <= config.tol {
            let split = energy_single(&u, &grid, p)?;
            return Ok(SingleState {
                grid,
                u,
                split,
                mu,
                residual_sup: residual,
                iterations: iter,
            });
        }
        if iter == config.max_iterations {
            break;
        }
        loop {
            if factor.tau != tau {
                factor = Factor::new(n, tau, config.shift, inv_h2);
            }
            for k in 0..n {
                v[k] = u[k] + tau * ((attract[k] + config.shift + mu) * u[k]);
            }
            thomas_in_place(&factor.diag, &factor.off, 0.0, &mut v, &mut scratch)?;
            normalize(&mut v);
            let e_new = single_energy(&v, &mut trial);
            if e_new <= e + energy_slack(n, e) {
                std::mem::swap(&mut u, &mut v);
                std::mem::swap(&mut attract, &mut trial);
                e = e_new;
                run += 1;
                if run % 50 == 0 {
                    tau = (tau * 1.2).min(1e6);
                }
                break;
            }
            tau *= 0.5;
            run = 0;
            if tau < config.tau_min {
                return Err(Error::Stagnation { tau, iterations: iter });
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: config.max_iterations,
        residual,
    })
}

impl SolverConfig {
    /// Grid for the single-orbital problem: explicit L, or L = 60.
    pub fn grid_single(&self) -> Result<Grid> {
        Grid::with_spacing(self.half_width.unwrap_or(60.0), self.h)
    }
}

fn reflect(u: &mut [f64]) {
    u.reverse();
}

/// Rotates to the Λ eigenbasis, fixes signs and orientation.
pub fn gauge_fix(gs: &GroundState) -> Result<GroundState> {
    let grid = gs.pair.grid.clone();
    let lambda = multiplier_matrix(&gs.pair, gs.p)?;
    if lambda.m[0][1] != lambda.m[1][0] {
        return Err(Error::NumericalFailure("multiplier matrix is not symmetric".into()));
    }
    let (_, v) = lambda.eigen();
    let mut pair = gs.pair.mixed(v);
    pair.orthonormalized = gs.pair.orthonormalized;

    if pair.u1.iter().sum::<f64>() < 0.0 {
        pair.u1.iter_mut().for_each(|a| *a = -*a);
    }
    let rho = density(&pair);
    let (k1, _) = pair
        .u1
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (k, &a)| if a > bv { (k, a) } else { (bi, bv) });
    let mut xa = grid.x(k1);
    let mut xb = detect_bumps(&rho, &grid).ok().map(|b| {
        let [l, r] = b.locations;
        if (l - xa).abs() > (r - xa).abs() {
            l
        } else {
            r
        }
    });
    if let Some(x) = xb {
        if x < xa {
            reflect(&mut pair.u1);
            reflect(&mut pair.u2);
            xa = -xa;
            xb = Some(-x);
        }
    }
    let flip = match xb {
        Some(x) => pair.u2[grid.nearest_index(x)] < 0.0,
        None => {
            let (_, val) = pair
                .u2
                .iter()
                .fold((0.0_f64, 0.0_f64), |(m, s), &a| if a.abs() > m { (a.abs(), a) } else { (m, s) });
            val < 0.0
        }
    };
    if flip {
        pair.u2.iter_mut().for_each(|a| *a = -*a);
    }

    let split = energy(&pair, gs.p)?;
    let lambda = multiplier_matrix(&pair, gs.p)?;
    let residual_sup = crate::energy::projected_residual(&pair, gs.p, &lambda)?;
    let mut warnings = gs.warnings.clone();
    let n = grid.len();
    let tail = [pair.u1[0], pair.u1[1], pair.u1[n - 1], pair.u1[n - 2], pair.u2[0], pair.u2[1], pair.u2[n - 1], pair.u2[n - 2]]
        .iter()
        .fold(0.0_f64, |m, a| m.max(a.abs()));
    let tail_msg = "domain too small: boundary values exceed 1e-8";
    if tail > 1e-8 && !warnings.iter().any(|w| w == tail_msg) {
        warnings.push(tail_msg.to_string());
    }
    let (mu1, mu2) = (lambda.m[0][0].min(lambda.m[1][1]), lambda.m[0][0].max(lambda.m[1][1]));
    if let Some(x) = xb {
        let unresolved = "x_n unresolved below force scale";
        let scale = (-(mu2.abs().sqrt()) * (x - xa).abs()).exp();
        if scale < 1e-5 && !warnings.iter().any(|w| w == unresolved) {
            warnings.push(unresolved.to_string());
        }
    }
    Ok(GroundState {
        pair,
        p: gs.p,
        split,
        mu1,
        mu2,
        lambda,
        residual_sup,
        iterations: gs.iterations,
        gauge_fixed: true,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenCheck {
    pub eig1: f64,
    pub eig2: f64,
    pub gap1: f64,
    pub gap2: f64,
}

/// Two lowest eigenvalues of −D_xx − ρ^{p−1} against the multipliers.
pub fn eigen_crosscheck(gs: &GroundState) -> Result<EigenCheck> {
    let grid = &gs.pair.grid;
    let rho = density(&gs.pair);
    let v: Vec<f64> = rho.iter().map(|&r| -power(r, gs.p - 1.0)).collect();
    let op = build_schrodinger(&v, grid)?;
    let pairs = op.lowest_eigenpairs(2, grid)?;
    let (eig1, eig2) = (pairs[0].eigenvalue, pairs[1].eigenvalue);
    Ok(EigenCheck {
        eig1,
        eig2,
        gap1: (eig1 - gs.mu1).abs(),
        gap2: (eig2 - gs.mu2).abs(),
    })
}

/// Linear interpolation of samples onto another grid, zero outside the source domain.
pub fn resample(u: &[f64], from: &Grid, to: &Grid) -> Vec<f64> {
    let h = from.h();
    let l = from.half_width();
    to.sample(|x| {
        let s = (x + l) / h;
        if s < 0.0 || s > (from.len() - 1) as f64 {
            return 0.0;
        }
        let k = (s.floor() as usize).min(from.len() - 2);
        let t = s - k as f64;
        (1.0 - t) * u[k] + t * u[k + 1]
    })
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub p: f64,
    pub result: std::result::Result<GroundState, Error>,
    pub warm_started: bool,
}

/// Continuation over p values, each solve warm-started from the previous state.
pub fn continue_sweep(p_values: &[f64], base: &SolverConfig) -> Vec<SweepOutcome> {
    let mut out = Vec::with_capacity(p_values.len());
    let mut previous: Option<GroundState> = None;
    for &p in p_values {
        let mut cfg = base.clone();
        cfg.p = p;
        cfg.half_width = base.half_width.or_else(|| auto_half_width(p).ok());
        let warm = previous.as_ref().and_then(|prev| {
            let grid = cfg.grid().ok()?;
            let u1 = resample(&prev.pair.u1, prev.grid(), &grid);
            let u2 = resample(&prev.pair.u2, prev.grid(), &grid);
            let pair = OrbitalPair::new(grid, u1, u2).ok()?;
            relax_from(&cfg, pair).ok()
        });
        let (result, warm_started) = match warm {
            Some(gs) => (Ok(gs), true),
            None => (relax(&cfg), false),
        };
        if let Ok(gs) = &result {
            previous = Some(gs.clone());
        }
        out.push(SweepOutcome { p, result, warm_started });
    }
    out
}
