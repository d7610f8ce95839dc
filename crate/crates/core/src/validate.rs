//! Built-in pass/fail suite over the closed-form anchors and structural properties.

use serde::{Deserialize, Serialize};

use crate::asymptotics::{overlap_suite, reference_multipliers};
use crate::energy::{identity_report, OrbitalPair};
use crate::error::Result;
use crate::grid::{build_schrodinger, Grid};
use crate::solitons::{w_base, w_star, SolitonSpec};
use crate::solver::{
    eigen_crosscheck, gauge_fix, initial_ansatz, lowdin_orthonormalize, relax, relax_single, GroundState,
    Scheme, SolverConfig,
};

/// Deliberate defects for checking that the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    #[default]
    None,
    /// w_* replaced by −w_*.
    FlipSolitonSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub quick: bool,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidateOptions {
    /// Skip the two-orbital solve.
    pub quick: bool,
    pub mutation: Mutation,
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn push(&mut self, name: &str, value: f64, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            passed: passed && value.is_finite(),
            value,
            detail,
        });
    }

    fn run(&mut self, name: &str, f: impl FnOnce() -> Result<(f64, bool, String)>) {
        match f() {
            Ok((v, ok, d)) => self.push(name, v, ok, d),
            Err(e) => self.push(name, f64::NAN, false, format!("error: {e}")),
        }
    }
}

pub fn run_validation(opts: &ValidateOptions) -> ValidationReport {
    let sign = match opts.mutation {
        Mutation::None => 1.0,
        Mutation::FlipSolitonSign => -1.0,
    };
    let ws = move |x: f64| sign * w_star(x);
    let mut s = Suite { checks: Vec::new() };

    s.run("w_star positive and even", || {
        let g = Grid::with_spacing(40.0, 0.05)?;
        let mut worst = 0.0_f64;
        let mut positive = true;
        for k in 0..g.len() {
            let x = g.x(k);
            positive &= ws(x) > 0.0;
            worst = worst.max((ws(x) - ws(-x)).abs());
        }
        Ok((worst, positive && worst == 0.0, format!("max |w(x) - w(-x)| = {worst:e}")))
    });

    s.run("w_star solves -u'' + u/16 - u^3 = 0", || {
        let g = Grid::with_spacing(40.0, 0.02)?;
        let u = g.sample(ws);
        let h2 = g.h() * g.h();
        let worst = (1..g.len() - 1)
            .map(|k| (-(u[k + 1] - 2.0 * u[k] + u[k - 1]) / h2 + u[k] / 16.0 - u[k].powi(3)).abs())
            .fold(0.0, f64::max);
        Ok((worst, worst < 1e-6, format!("max residual {worst:e}")))
    });

    s.run("||w||^2 = 4 and ||w_star||^2 = 1", || {
        let g = Grid::with_spacing(80.0, 0.01)?;
        let w = g.sample(w_base);
        let v = g.sample(ws);
        let err = (g.inner_product(&w, &w)? - 4.0).abs().max((g.inner_product(&v, &v)? - 1.0).abs());
        Ok((err, err < 1e-8, format!("max norm error {err:e}")))
    });

    s.run("w_tilde(2, -1/16) reduces to w_star", || {
        let spec = SolitonSpec::new(2.0, -1.0 / 16.0)?;
        let worst = (-400..=400)
            .map(|k| {
                let x = k as f64 * 0.1;
                (spec.value(x) - ws(x)).abs()
            })
            .fold(0.0, f64::max);
        Ok((worst, worst < 1e-14, format!("max difference {worst:e}")))
    });

    s.run("J1(2) = -1/48 +/- 5e-4", || {
        let mut cfg = SolverConfig::new(2.0);
        cfg.half_width = Some(40.0);
        let e = relax_single(&cfg)?.split.total;
        let err = (e + 1.0 / 48.0).abs();
        Ok((e, err <= 5e-4, format!("E = {e:.10}, error {err:e}")))
    });

    s.run("mu1(2) = -1/16 +/- 1e-3", || {
        let mut cfg = SolverConfig::new(2.0);
        cfg.half_width = Some(40.0);
        let mu = relax_single(&cfg)?.mu;
        Ok((mu, (mu + 1.0 / 16.0).abs() <= 1e-3, format!("mu = {mu:.10}")))
    });

    s.run("J1(2) error order 2 under h halving", || {
        let mut errs = Vec::new();
        for h in [0.1, 0.05] {
            let mut cfg = SolverConfig::new(2.0);
            cfg.half_width = Some(40.0);
            cfg.h = h;
            cfg.tol = 1e-11;
            errs.push((relax_single(&cfg)?.split.total + 1.0 / 48.0).abs());
        }
        let r = errs[0] / errs[1];
        Ok((r, (3.5..=4.5).contains(&r), format!("error ratio {r:.4}")))
    });

    s.run("-D_xx - w_star^2 has lowest eigenvalue -1/16", || {
        let g = Grid::with_spacing(60.0, 0.02)?;
        let v: Vec<f64> = g.sample(|x| -ws(x).powi(2));
        let eig = build_schrodinger(&v, &g)?.lowest_eigenpairs(1, &g)?;
        let u = g.sample(ws);
        let overlap = g.inner_product(&eig[0].eigenvector, &u)?.abs();
        let err = (eig[0].eigenvalue + 1.0 / 16.0).abs();
        let pos = eig[0].eigenvector[g.center_index()] * u[g.center_index()] > 0.0;
        Ok((
            eig[0].eigenvalue,
            err < 1e-4 && overlap > 0.999 && pos,
            format!("eigenvalue error {err:e}, overlap with w_star {overlap:.6}"),
        ))
    });

    s.run("-D_xx - 3 w_star^2 has eigenvalue -1/16 with odd eigenvector", || {
        let g = Grid::with_spacing(60.0, 0.02)?;
        let v: Vec<f64> = g.sample(|x| -3.0 * ws(x).powi(2));
        let eig = build_schrodinger(&v, &g)?.lowest_eigenpairs(2, &g)?;
        let err = (eig[1].eigenvalue + 1.0 / 16.0).abs();
        let f = &eig[1].eigenvector;
        let odd = (0..g.len()).map(|k| (f[k] + f[g.len() - 1 - k]).abs()).fold(0.0, f64::max);
        Ok((
            eig[1].eigenvalue,
            err < 1e-4 && odd < 1e-6 && eig[0].eigenvalue < eig[1].eigenvalue,
            format!("second eigenvalue error {err:e}, odd defect {odd:e}"),
        ))
    });

    s.run("Schrodinger operator symmetric", || {
        let g = Grid::with_spacing(20.0, 0.05)?;
        let v: Vec<f64> = g.sample(|x| -ws(x).powi(2));
        let op = build_schrodinger(&v, &g)?;
        let f = g.sample(|x| (-0.1 * x * x).exp() * (1.0 + x));
        let q = g.sample(|x| (0.3 * x).sin() * ws(x));
        let lhs = g.inner_product(&op.apply(&f)?, &q)?;
        let rhs = g.inner_product(&f, &op.apply(&q)?)?;
        let err = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300);
        Ok((err, op.symmetric && err < 1e-12, format!("relative asymmetry {err:e}")))
    });

    s.run("Lowdin orthonormalization idempotent", || {
        let g = Grid::with_spacing(60.0, 0.05)?;
        let raw = OrbitalPair::new(g.clone(), g.sample(ws), g.sample(|x| w_star(x - 25.0) + 0.1 * ws(x)))?;
        let once = lowdin_orthonormalize(&raw)?;
        let twice = lowdin_orthonormalize(&once)?;
        let diff = once
            .u1
            .iter()
            .zip(&twice.u1)
            .chain(once.u2.iter().zip(&twice.u2))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let ortho = once.orthonormality_error();
        Ok((diff, diff < 1e-12 && ortho < 1e-12, format!("second pass moved {diff:e}, Gram error {ortho:e}")))
    });

    s.run("gauge fix deterministic under rotation and sign", || {
        let g = Grid::with_spacing(60.0, 0.05)?;
        let pair = initial_ansatz(2.0, &g, 20.0)?;
        let base = gauge_fix(&GroundState::from_pair(pair.clone(), 2.0)?)?;
        let mut worst = 0.0_f64;
        for theta in [0.4, 1.9, -2.5] {
            let mut turned = pair.rotated(theta);
            turned.u2.iter_mut().for_each(|v| *v = -*v);
            let fixed = gauge_fix(&GroundState::from_pair(turned, 2.0)?)?;
            for (a, b) in fixed.pair.u1.iter().zip(&base.pair.u1).chain(fixed.pair.u2.iter().zip(&base.pair.u2)) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok((worst, worst < 1e-10, format!("max deviation {worst:e}")))
    });

    s.run("symmetric overlap I2 at p=2, xn=30 within 5%", || {
        let mu = -1.0 / 16.0;
        let t = overlap_suite(2.0, mu, mu, 30.0)?;
        let q = t.rows[1].quadrature;
        let closed = (0.5 - 30.0 / 8.0) * (-30.0_f64 / 4.0).exp();
        let r = q / closed;
        Ok((r, (r - 1.0).abs() <= 0.05, format!("quadrature/closed form {r:.5}")))
    });

    s.run("overlap integrals decrease as xn doubles", || {
        let (m1, m2) = reference_multipliers(1.95, 20.0)?;
        let near = overlap_suite(1.95, m1, m2, 20.0)?;
        let far = overlap_suite(1.95, m1, m2, 40.0)?;
        let worst = near
            .rows
            .iter()
            .zip(&far.rows)
            .map(|(a, b)| b.quadrature.abs() / a.quadrature.abs())
            .fold(0.0, f64::max);
        Ok((worst, worst < 1.0, format!("largest |I(2xn)|/|I(xn)| = {worst:e}")))
    });

    if !opts.quick {
        two_orbital_checks(&mut s);
    }

    ValidationReport {
        quick: opts.quick,
        checks: s.checks,
    }
}

fn two_orbital_checks(s: &mut Suite) {
    let mut cfg = SolverConfig::new(1.9);
    cfg.scheme = Scheme::Lbfgs;
    cfg.shift = 0.2;
    cfg.tol = 1e-10;
    let gs = match relax(&cfg) {
        Ok(gs) => gs,
        Err(e) => {
            s.push("two-orbital solve at p=1.9", f64::NAN, false, format!("error: {e}"));
            return;
        }
    };
    s.push(
        "two-orbital solve at p=1.9",
        gs.split.total,
        gs.mu1 < gs.mu2 && gs.mu2 < 0.0,
        format!("E = {:.10}, mu = ({:.8}, {:.8})", gs.split.total, gs.mu1, gs.mu2),
    );
    let id = identity_report(&gs);
    s.push("multiplier sum identity", id.musum_gap, id.musum_gap <= 1e-6, format!("gap {:e}", id.musum_gap));
    s.push("energy ratio identity", id.ratio_gap, id.ratio_gap <= 1e-5, format!("gap {:e}", id.ratio_gap));
    s.push("virial identity", id.virial_gap, id.virial_gap <= 1e-3, format!("relative gap {:e}", id.virial_gap));
    s.run("multipliers match Sturm eigenvalues", || {
        let e = eigen_crosscheck(&gs)?;
        let worst = e.gap1.max(e.gap2);
        Ok((worst, worst <= 1e-6, format!("max gap {worst:e}")))
    });
    s.run("gauge fix idempotent on converged state", || {
        let again = gauge_fix(&gs)?;
        let worst = again
            .pair
            .u1
            .iter()
            .zip(&gs.pair.u1)
            .chain(again.pair.u2.iter().zip(&gs.pair.u2))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok((worst, worst < 1e-10, format!("max deviation {worst:e}")))
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let r = run_validation(&ValidateOptions {
            quick: true,
            mutation: Mutation::None,
        });
        let failed: Vec<_> = r.failures().collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }

    #[test]
    fn sign_mutation_detected() {
        let r = run_validation(&ValidateOptions {
            quick: true,
            mutation: Mutation::FlipSolitonSign,
        });
        assert!(!r.all_passed());
        assert!(r.failures().any(|c| c.name.contains("reduces")));
    }
}
