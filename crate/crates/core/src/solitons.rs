//! Closed-form soliton profiles and their scaling laws.

use std::f64::consts::{LN_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::Grid;

/// ln(2 cosh y), stable for any |y|.
fn ln_two_cosh(y: f64) -> f64 {
    let a = y.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// w(x) = 2√2 / (eˣ + e⁻ˣ), the positive solution of u'' − u + u³ = 0.
pub fn w_base(x: f64) -> f64 {
    let a = x.abs();
    let e = (-a).exp();
    2.0 * SQRT_2 * e / (1.0 + e * e)
}

/// w_*(x) = (√2/2)/(e^{x/4} + e^{−x/4}) = w(x/4)/4.
pub fn w_star(x: f64) -> f64 {
    let a = 0.25 * x.abs();
    let e = (-a).exp();
    0.5 * SQRT_2 * e / (1.0 + e * e)
}

pub fn w_star_prime(x: f64) -> f64 {
    -0.25 * (0.25 * x).tanh() * w_star(x)
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p < 3.0) {
        return Err(invalid(format!("exponent p must lie in (1, 3), got {p}")));
    }
    Ok(())
}

fn w_tilde_unchecked(p: f64, x: f64) -> f64 {
    let q = p - 1.0;
    (((2.0 * p.sqrt()).ln() - ln_two_cosh(q * x)) / q).exp()
}

/// w̃_p(x) = (2√p / (e^{(p−1)x} + e^{(1−p)x}))^{1/(p−1)}.
pub fn w_tilde(p: f64, x: f64) -> Result<f64> {
    check_p(p)?;
    Ok(w_tilde_unchecked(p, x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonSpec {
    pub p: f64,
    pub mu: f64,
}

impl SolitonSpec {
    pub fn new(p: f64, mu: f64) -> Result<Self> {
        check_p(p)?;
        if !(mu < 0.0) || !mu.is_finite() {
            return Err(invalid(format!("mu must be negative, got {mu}")));
        }
        Ok(Self { p, mu })
    }

    pub fn sqrt_abs_mu(&self) -> f64 {
        self.mu.abs().sqrt()
    }

    fn amplitude(&self) -> f64 {
        self.mu.abs().powf(0.5 / (self.p - 1.0))
    }

    pub fn value(&self, x: f64) -> f64 {
        self.amplitude() * w_tilde_unchecked(self.p, self.sqrt_abs_mu() * x)
    }

    /// Analytic derivative: −√|μ| tanh((p−1)√|μ|x) w̃(p,μ)(x).
    pub fn derivative(&self, x: f64) -> f64 {
        let k = self.sqrt_abs_mu();
        -k * ((self.p - 1.0) * k * x).tanh() * self.value(x)
    }

    pub fn sample(&self, grid: &Grid, center: f64) -> Vec<f64> {
        grid.sample(|x| self.value(x - center))
    }

    pub fn sample_derivative(&self, grid: &Grid, center: f64) -> Vec<f64> {
        grid.sample(|x| self.derivative(x - center))
    }
}

/// w̃(p,μ)(x) = |μ|^{1/(2(p−1))} w̃_p(√|μ| x).
pub fn w_tilde_scaled(spec: &SolitonSpec, x: f64) -> f64 {
    spec.value(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoefficients {
    pub norm_slope: f64,
    pub sqrt_mu_slope: f64,
}

impl ExpansionCoefficients {
    pub fn printed() -> Self {
        Self {
            norm_slope: 6.0 - 12.0 * LN_2,
            sqrt_mu_slope: (6.0 - 12.0_f64.ln()) / 16.0 + LN_2,
        }
    }
}

/// ‖w̃_p‖² by trapezoid quadrature on [−60, 60] with h = 0.01 (profile decays like e^{−|x|}).
pub fn w_tilde_norm_sq(p: f64) -> Result<f64> {
    check_p(p)?;
    let grid = Grid::with_spacing(60.0, 0.01)?;
    let f = grid.sample(|x| w_tilde_unchecked(p, x));
    Ok(grid.dot(&f, &f))
}

/// ‖w̃_p‖² ≈ 4 + (6 − 12 ln 2)(p − 2).
pub fn norm_linearization(p: f64) -> f64 {
    4.0 + ExpansionCoefficients::printed().norm_slope * (p - 2.0)
}

const MU_BRACKET: (f64, f64) = (1e-6, 1e3);
const MU_BISECTION_MAX: usize = 200;

fn bisect_abs_mu(target: f64, norm_of: impl Fn(f64) -> f64) -> Result<f64> {
    let (mut lo, mut hi) = MU_BRACKET;
    let (flo, fhi) = (norm_of(lo) - target, norm_of(hi) - target);
    if flo.signum() == fhi.signum() {
        return Err(Error::NumericalFailure(format!(
            "norm target {target} not bracketed by |mu| in [{lo:e}, {hi:e}] (residuals {flo:e}, {fhi:e})"
        )));
    }
    let increasing = fhi > flo;
    for _ in 0..MU_BISECTION_MAX {
        // bisect in log |mu|
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let f = norm_of(mid) - target;
        if (f > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// μ < 0 with ‖w̃(p,μ)‖² = target, using ‖w̃(p,μ)‖² = |μ|^{(3−p)/(2(p−1))}‖w̃_p‖².
pub fn mu_from_norm(p: f64, target_norm_sq: f64) -> Result<f64> {
    check_p(p)?;
    if !(target_norm_sq > 0.0) || !target_norm_sq.is_finite() {
        return Err(invalid(format!("target norm must be positive, got {target_norm_sq}")));
    }
    let base = w_tilde_norm_sq(p)?;
    mu_from_norm_with(p, target_norm_sq, base)
}

/// As [`mu_from_norm`] with ‖w̃_p‖² supplied.
pub fn mu_from_norm_with(p: f64, target_norm_sq: f64, base_norm_sq: f64) -> Result<f64> {
    check_p(p)?;
    let alpha = (3.0 - p) / (2.0 * (p - 1.0));
    let m = bisect_abs_mu(target_norm_sq, |m| m.powf(alpha) * base_norm_sq)?;
    Ok(-m)
}

/// μ < 0 whose profile has the requested trapezoid norm on the given grid.
pub fn mu_from_norm_on_grid(p: f64, target_norm_sq: f64, grid: &Grid) -> Result<f64> {
    check_p(p)?;
    if !(target_norm_sq > 0.0) {
        return Err(invalid(format!("target norm must be positive, got {target_norm_sq}")));
    }
    let m = bisect_abs_mu(target_norm_sq, |m| {
        let spec = SolitonSpec { p, mu: -m };
        let f = spec.sample(grid, 0.0);
        grid.dot(&f, &f)
    })?;
    Ok(-m)
}

/// √|μ| ≈ 1/4 − ((6 − ln 12)/16 + ln 2)(p − 2).
pub fn sqrt_mu_linearization(p: f64) -> f64 {
    0.25 - ExpansionCoefficients::printed().sqrt_mu_slope * (p - 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn closed_form_values() {
        assert_relative_eq!(w_base(0.0), SQRT_2, epsilon = 1e-15);
        assert_relative_eq!(w_star(0.0), SQRT_2 / 4.0, epsilon = 1e-15);
        assert_eq!(w_base(800.0), 0.0);
        assert!(w_base(30.0) < w_base(29.0));
    }

    #[test]
    fn w_star_is_quarter_scaled_w() {
        for i in -400..=400 {
            let x = i as f64 * 0.173;
            assert!((w_star(x) - 0.25 * w_base(x / 4.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn w_tilde_reduces_at_p2() {
        for i in -200..=200 {
            let x = i as f64 * 0.11;
            assert!((w_tilde(2.0, x).unwrap() - w_base(x)).abs() < 1e-14);
        }
        assert_relative_eq!(w_tilde(1.9, 0.0).unwrap(), 1.9_f64.powf(0.5 / 0.9), epsilon = 1e-14);
        assert!(w_tilde(3.0, 0.0).is_err());
        assert!(w_tilde(1.0, 0.0).is_err());
    }

    #[test]
    fn w_tilde_no_overflow() {
        let v = w_tilde(1.5, 5000.0).unwrap();
        assert!(v.is_finite() && v >= 0.0);
        assert!(w_star(1e6).is_finite());
    }

    #[test]
    fn norm_near_two() {
        let n = w_tilde_norm_sq(1.95).unwrap();
        assert!((n - 4.1159).abs() < 5e-3, "norm = {n}");
        assert!((n - norm_linearization(1.95)).abs() < 5e-3);
        assert!((w_tilde_norm_sq(2.0).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_profile_identities() {
        let spec = SolitonSpec::new(2.0, -1.0 / 16.0).unwrap();
        for i in -300..=300 {
            let x = i as f64 * 0.2;
            assert!((w_tilde_scaled(&spec, x) - w_star(x)).abs() < 1e-14);
            assert!((spec.derivative(x) - w_star_prime(x)).abs() < 1e-14);
        }
        let spec = SolitonSpec::new(1.9, -0.09).unwrap();
        for i in -100..=100 {
            let x = i as f64 * 0.37;
            let direct = 0.09_f64.powf(1.0 / 1.8) * w_tilde(1.9, 0.3 * x).unwrap();
            assert!((spec.value(x) - direct).abs() < 1e-13);
        }
        assert!(SolitonSpec::new(1.9, 0.1).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let spec = SolitonSpec::new(1.87, -0.11).unwrap();
        let d = 1e-5;
        for i in -50..=50 {
            let x = i as f64 * 0.7;
            let fd = (spec.value(x + d) - spec.value(x - d)) / (2.0 * d);
            assert!((fd - spec.derivative(x)).abs() < 1e-9);
        }
    }

    fn el_residual(h: f64) -> f64 {
        let spec = SolitonSpec::new(1.9, -0.09).unwrap();
        let grid = Grid::with_spacing(60.0, h).unwrap();
        let w = spec.sample(&grid, 0.0);
        let n = w.len();
        let mut worst = 0.0_f64;
        for k in 1..n - 1 {
            let d2 = (w[k - 1] - 2.0 * w[k] + w[k + 1]) / (h * h);
            let r = d2 + spec.mu * w[k] + w[k].powf(2.0 * spec.p - 1.0);
            worst = worst.max(r.abs());
        }
        worst
    }

    #[test]
    fn euler_lagrange_residual_second_order() {
        let r1 = el_residual(0.05);
        let r2 = el_residual(0.025);
        assert!(r1 < 0.01 * 0.05 * 0.05, "r1 = {r1}");
        assert!((r1 / r2 - 4.0).abs() < 0.5, "ratio = {}", r1 / r2);
    }

    #[test]
    fn mu_from_norm_anchors() {
        assert_relative_eq!(mu_from_norm(2.0, 1.0).unwrap(), -1.0 / 16.0, max_relative = 1e-10);
        assert_relative_eq!(mu_from_norm(2.0, 4.0).unwrap(), -1.0, max_relative = 1e-10);
        let mu = mu_from_norm(1.9, 1.0).unwrap();
        assert!((mu + 0.094).abs() < 3e-3, "mu = {mu}");
        assert!(mu_from_norm(1.9, -1.0).is_err());
    }

    #[test]
    fn mu_from_norm_matches_grid_norm() {
        let mu = mu_from_norm(1.9, 1.0).unwrap();
        let spec = SolitonSpec::new(1.9, mu).unwrap();
        let grid = Grid::with_spacing(80.0, 0.05).unwrap();
        let f = spec.sample(&grid, 0.0);
        assert!((grid.dot(&f, &f) - 1.0).abs() < 1e-10);
        let mu_g = mu_from_norm_on_grid(1.9, 1.0, &grid).unwrap();
        assert!((mu_g / mu - 1.0).abs() < 1e-9);
    }

    #[test]
    fn expansion_constants() {
        let c = ExpansionCoefficients::printed();
        assert!((c.norm_slope + 2.317766).abs() < 1e-6);
        // (6 − ln 12)/16 + ln 2 evaluates to 0.9128405
        assert!((c.sqrt_mu_slope - 0.912840515).abs() < 1e-9);
        assert_eq!(sqrt_mu_linearization(2.0), 0.25);
        assert!((sqrt_mu_linearization(1.9) - 0.34128405).abs() < 1e-8);
    }

    #[test]
    fn linearization_error_shrinks_toward_two() {
        let err = |p: f64| (sqrt_mu_linearization(p) - mu_from_norm(p, 1.0).unwrap().abs().sqrt()).abs();
        let (e19, e199) = (err(1.9), err(1.99));
        assert!(e19 >= 8.0 * e199, "err(1.9) = {e19}, err(1.99) = {e199}");
    }

    #[test]
    fn peak_relocation_subgrid() {
        let grid = Grid::with_spacing(20.0, 0.05).unwrap();
        for &delta in &[0.013, -0.021, 0.0249, 0.3] {
            let f = grid.sample(|x| w_star(x - delta));
            let k = (1..f.len() - 1).max_by(|&i, &j| f[i].total_cmp(&f[j])).unwrap();
            let (a, b, c) = (f[k - 1], f[k], f[k + 1]);
            let off = 0.5 * (a - c) / (a - 2.0 * b + c);
            let est = grid.x(k) + off * grid.h();
            assert!((est - delta).abs() <= grid.h() * grid.h() / 2.0);
        }
    }

    proptest! {
        #[test]
        fn profiles_positive_even_decreasing(p in 1.2f64..2.8, mu in -2.0f64..-0.01, x in 0.01f64..60.0) {
            let spec = SolitonSpec::new(p, mu).unwrap();
            let v = spec.value(x);
            prop_assert!(v >= 0.0);
            prop_assert_eq!(v, spec.value(-x));
            prop_assert!(spec.value(x * 0.5) >= v);
            prop_assert!(w_star(x) > 0.0 && w_star(x) == w_star(-x));
        }

        #[test]
        fn mu_norm_roundtrip(p in 1.6f64..2.4, m in 0.01f64..1.0) {
            let base = w_tilde_norm_sq(p).unwrap();
            let alpha = (3.0 - p) / (2.0 * (p - 1.0));
            let norm = m.powf(alpha) * base;
            let mu = mu_from_norm_with(p, norm, base).unwrap();
            prop_assert!((mu + m).abs() <= 1e-9 * m);
        }
    }
}
