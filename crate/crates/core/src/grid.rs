//! Uniform grid on [-L, L], trapezoid quadrature and tridiagonal Schrödinger operators.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default absolute residual tolerance for eigenpairs.
pub const EIG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    n_points: usize,
    spacing: f64,
}

impl Grid {
    pub fn new(half_width: f64, n_points: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(invalid(format!("half width must be positive, got {half_width}")));
        }
        if n_points % 2 == 0 {
            return Err(invalid(format!("n_points must be odd, got {n_points}")));
        }
        if n_points < 3 {
            return Err(invalid(format!("n_points must be at least 3, got {n_points}")));
        }
        Ok(Self {
            half_width,
            n_points,
            spacing: 2.0 * half_width / (n_points - 1) as f64,
        })
    }

    /// Grid with spacing as close to `h` as possible while keeping an odd point count.
    pub fn with_spacing(half_width: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(invalid(format!("spacing must be positive, got {h}")));
        }
        let cells_half = (half_width / h).round().max(1.0) as usize;
        Self::new(half_width, 2 * cells_half + 1)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.spacing
    }

    pub fn x(&self, k: usize) -> f64 {
        // symmetric evaluation keeps x_{(n-1)/2} == 0 exactly
        let mid = (self.n_points - 1) / 2;
        if k >= mid {
            (k - mid) as f64 * self.spacing
        } else {
            -((mid - k) as f64) * self.spacing
        }
    }

    pub fn center_index(&self) -> usize {
        (self.n_points - 1) / 2
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.x(k)).collect()
    }

    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 || k + 1 == self.n_points {
            0.5 * self.spacing
        } else {
            self.spacing
        }
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n_points).map(|k| f(self.x(k))).collect()
    }

    /// Index of the grid point nearest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let k = ((x + self.half_width) / self.spacing).round();
        k.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    pub fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.n_points {
            return Err(invalid(format!(
                "sample length {} does not match grid size {}",
                f.len(),
                self.n_points
            )));
        }
        Ok(())
    }

    pub fn inner_product(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        self.check_len(g)?;
        Ok(self.dot(f, g))
    }

    /// Trapezoid inner product without length checks.
    pub(crate) fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        let n = f.len();
        let inner: f64 = f[1..n - 1].iter().zip(&g[1..n - 1]).map(|(a, b)| a * b).sum();
        self.spacing * (inner + 0.5 * (f[0] * g[0] + f[n - 1] * g[n - 1]))
    }

    pub(crate) fn norm_sq(&self, f: &[f64]) -> f64 {
        self.dot(f, f)
    }

    /// Trapezoid integral of samples.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        let n = f.len();
        let inner: f64 = f[1..n - 1].iter().sum();
        Ok(self.spacing * (inner + 0.5 * (f[0] + f[n - 1])))
    }
}

pub fn build_grid(half_width: f64, n_points: usize) -> Result<Grid> {
    Grid::new(half_width, n_points)
}

pub fn inner_product(f: &[f64], g: &[f64], grid: &Grid) -> Result<f64> {
    grid.inner_product(f, g)
}

pub fn sup_norm(f: &[f64]) -> f64 {
    f.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriDiagOperator {
    pub diagonal: Vec<f64>,
    pub off_diagonal: Vec<f64>,
    pub symmetric: bool,
}

impl TriDiagOperator {
    pub fn new(diagonal: Vec<f64>, off_diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.is_empty() || off_diagonal.len() + 1 != diagonal.len() {
            return Err(invalid(format!(
                "tridiagonal shape mismatch: diagonal {} off-diagonal {}",
                diagonal.len(),
                off_diagonal.len()
            )));
        }
        Ok(Self {
            diagonal,
            off_diagonal,
            symmetric: true,
        })
    }

    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.len() {
            return Err(invalid(format!(
                "vector length {} does not match operator size {}",
                u.len(),
                self.len()
            )));
        }
        let mut out = vec![0.0; u.len()];
        self.apply_into(u, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        let d = &self.diagonal;
        let e = &self.off_diagonal;
        if n == 1 {
            out[0] = d[0] * u[0];
            return;
        }
        out[0] = d[0] * u[0] + e[0] * u[1];
        for k in 1..n - 1 {
            out[k] = e[k - 1] * u[k - 1] + d[k] * u[k] + e[k] * u[k + 1];
        }
        out[n - 1] = e[n - 2] * u[n - 2] + d[n - 1] * u[n - 1];
    }

    /// Solves (A + shift·I) y = rhs by Thomas elimination.
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.len() {
            return Err(invalid(format!(
                "rhs length {} does not match operator size {}",
                rhs.len(),
                self.len()
            )));
        }
        let mut y = rhs.to_vec();
        let mut scratch = vec![0.0; rhs.len()];
        thomas_in_place(&self.diagonal, &self.off_diagonal, shift, &mut y, &mut scratch)?;
        Ok(y)
    }

    /// Number of eigenvalues strictly below `level` (Sturm count via LDLᵀ pivots).
    pub fn count_below(&self, level: f64) -> usize {
        let d = &self.diagonal;
        let e = &self.off_diagonal;
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = d[0] - level;
        if q < 0.0 {
            count += 1;
        }
        for k in 1..d.len() {
            if q.abs() < tiny {
                q = -tiny;
            }
            q = d[k] - level - e[k - 1] * e[k - 1] / q;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..n {
            let mut r = 0.0;
            if k > 0 {
                r += self.off_diagonal[k - 1].abs();
            }
            if k + 1 < n {
                r += self.off_diagonal[k].abs();
            }
            lo = lo.min(self.diagonal[k] - r);
            hi = hi.max(self.diagonal[k] + r);
        }
        (lo, hi)
    }

    /// The `k` lowest eigenpairs, eigenvectors normalized in the grid inner product.
    pub fn lowest_eigenpairs(&self, k: usize, grid: &Grid) -> Result<Vec<EigenPair>> {
        lowest_eigenpairs(self, k, grid)
    }
}

pub(crate) fn thomas_in_place(
    diag: &[f64],
    off: &[f64],
    shift: f64,
    y: &mut [f64],
    c: &mut [f64],
) -> Result<()> {
    let n = y.len();
    let mut beta = diag[0] + shift;
    if beta == 0.0 {
        return Err(Error::SingularSystem { row: 0 });
    }
    y[0] /= beta;
    for k in 1..n {
        c[k] = off[k - 1] / beta;
        beta = diag[k] + shift - off[k - 1] * c[k];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::SingularSystem { row: k });
        }
        y[k] = (y[k] - off[k - 1] * y[k - 1]) / beta;
    }
    for k in (0..n - 1).rev() {
        y[k] -= c[k + 1] * y[k + 1];
    }
    Ok(())
}

/// Solves (A − λI) y = b for symmetric tridiagonal A by elimination with partial pivoting.
/// Exact zero pivots are replaced by `tiny`, as inverse iteration wants.
fn solve_pivoted(diag: &[f64], off: &[f64], lambda: f64, b: &mut [f64], tiny: f64) {
    let n = diag.len();
    let mut d: Vec<f64> = diag.iter().map(|v| v - lambda).collect();
    let mut du: Vec<f64> = off.to_vec();
    let mut dl: Vec<f64> = off.to_vec();
    let guard = |v: f64| if v == 0.0 { tiny } else { v };
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            d[i] = guard(d[i]);
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
            dl[i] = 0.0;
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                dl[i] = du[i + 1];
                du[i + 1] = -fact * dl[i];
            } else {
                dl[i] = 0.0;
            }
            du[i] = temp;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - fact * b[i + 1];
        }
    }
    d[n - 1] = guard(d[n - 1]);
    b[n - 1] /= d[n - 1];
    if n > 1 {
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - dl[i] * b[i + 2]) / d[i];
    }
}

/// Matrix of −D_xx + V with homogeneous Dirichlet conditions beyond ±L.
pub fn build_schrodinger(potential: &[f64], grid: &Grid) -> Result<TriDiagOperator> {
    grid.check_len(potential)?;
    let h2 = grid.h() * grid.h();
    let diagonal = potential.iter().map(|v| 2.0 / h2 + v).collect();
    let off_diagonal = vec![-1.0 / h2; grid.len() - 1];
    TriDiagOperator::new(diagonal, off_diagonal)
}

pub fn solve_shifted(op: &TriDiagOperator, shift: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    op.solve_shifted(shift, rhs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub eigenvalue: f64,
    pub eigenvector: Vec<f64>,
    pub residual: f64,
    /// Set when the eigenvalue is within 1e-13 of its neighbour.
    pub degenerate: bool,
}

const BISECTION_WIDTH: f64 = 1e-12;
const BISECTION_MAX_ITER: usize = 400;

fn bisect_eigenvalue(op: &TriDiagOperator, index: usize, lo: f64, hi: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo <= BISECTION_WIDTH {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if op.count_below(mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::NumericalFailure(format!(
        "eigenvalue bisection for index {index} stalled in [{lo:e}, {hi:e}] after {BISECTION_MAX_ITER} iterations"
    )))
}

pub fn lowest_eigenpairs(op: &TriDiagOperator, k: usize, grid: &Grid) -> Result<Vec<EigenPair>> {
    if !(1..=3).contains(&k) {
        return Err(invalid(format!("k must be 1, 2 or 3, got {k}")));
    }
    if op.len() != grid.len() {
        return Err(invalid("operator size does not match grid"));
    }
    if !op.symmetric {
        return Err(invalid("eigen-solver requires a symmetric operator"));
    }
    let n = op.len();
    let (glo, ghi) = op.gershgorin();
    let pad = 1e-9 * (glo.abs().max(ghi.abs()) + 1.0);
    let mut values = Vec::with_capacity(k);
    for i in 0..k.min(n) {
        values.push(bisect_eigenvalue(op, i, glo - pad, ghi + pad)?);
    }

    let mut pairs: Vec<EigenPair> = Vec::with_capacity(values.len());
    for (i, &lambda) in values.iter().enumerate() {
        let scale = op.diagonal.iter().fold(lambda.abs(), |m, d| m.max(d.abs()));
        // start vector with no special symmetry
        let mut v: Vec<f64> = (0..n)
            .map(|j| 1.0 + 0.5 * ((j as f64 * 0.618_033_988_749_895 + i as f64 * 0.3).fract() - 0.5))
            .collect();
        let tiny = f64::EPSILON * scale * 4.0;
        let mut attempt = 0;
        let mut residual = f64::INFINITY;
        while attempt < 6 {
            for _ in 0..2 {
                solve_pivoted(&op.diagonal, &op.off_diagonal, lambda, &mut v, tiny);
                // eigenvectors of the symmetric matrix are orthogonal in the plain dot product
                for prev in &pairs {
                    let pv = &prev.eigenvector;
                    let ov = v.iter().zip(pv).map(|(a, b)| a * b).sum::<f64>() / pv.iter().map(|b| b * b).sum::<f64>();
                    for (a, b) in v.iter_mut().zip(pv) {
                        *a -= ov * b;
                    }
                }
                let nrm = grid.norm_sq(&v).sqrt();
                if !(nrm > 0.0) || !nrm.is_finite() {
                    return Err(Error::NumericalFailure(format!(
                        "inverse iteration for eigenvalue {lambda:e} produced a null vector"
                    )));
                }
                v.iter_mut().for_each(|a| *a /= nrm);
            }
            let av = op.apply(&v)?;
            residual = av
                .iter()
                .zip(&v)
                .fold(0.0_f64, |m, (a, b)| m.max((a - lambda * b).abs()));
            if residual <= EIG_TOL {
                break;
            }
            attempt += 1;
        }
        if residual > EIG_TOL {
            return Err(Error::NumericalFailure(format!(
                "inverse iteration for eigenvalue {lambda:e} left residual {residual:e}"
            )));
        }
        // deterministic sign: largest-magnitude entry positive
        let imax = v
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |(bi, bv), (j, a)| if a.abs() > bv { (j, a.abs()) } else { (bi, bv) })
            .0;
        if v[imax] < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
        pairs.push(EigenPair {
            eigenvalue: lambda,
            eigenvector: v,
            residual,
            degenerate: false,
        });
    }
    for i in 1..pairs.len() {
        if (pairs[i].eigenvalue - pairs[i - 1].eigenvalue).abs() < 1e-13 {
            pairs[i].degenerate = true;
            pairs[i - 1].degenerate = true;
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solitons::{w_base, w_star};
    use proptest::prelude::*;

    #[test]
    fn grid_spacing_and_origin() {
        let g = build_grid(40.0, 1601).unwrap();
        assert!((g.h() - 0.05).abs() < 1e-15);
        assert_eq!(g.x(800), 0.0);
        assert_eq!(g.x(0), -40.0);
        assert_eq!(g.x(1600), 40.0);
        let g = build_grid(1.0, 3).unwrap();
        assert_eq!(g.coordinates(), vec![-1.0, 0.0, 1.0]);
        let g = build_grid(450.0, 18001).unwrap();
        assert!((g.h() - 0.05).abs() < 1e-14);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(build_grid(40.0, 1600).is_err());
        assert!(build_grid(0.0, 11).is_err());
        assert!(build_grid(-1.0, 11).is_err());
        assert!(build_grid(f64::NAN, 11).is_err());
    }

    #[test]
    fn trapezoid_norms() {
        let g = build_grid(40.0, 1601).unwrap();
        let w = g.sample(w_base);
        assert!((inner_product(&w, &w, &g).unwrap() - 4.0).abs() < 1e-6);
        let ws = g.sample(w_star);
        assert!((inner_product(&ws, &ws, &g).unwrap() - 1.0).abs() < 1e-6);
        let g = build_grid(1.0, 3).unwrap();
        let one = vec![1.0; 3];
        assert_eq!(inner_product(&one, &one, &g).unwrap(), 2.0);
        assert!(inner_product(&one, &[1.0, 1.0], &g).is_err());
    }

    #[test]
    fn laplacian_of_polynomials() {
        let g = build_grid(5.0, 101).unwrap();
        let op = build_schrodinger(&vec![0.0; g.len()], &g).unwrap();
        let lin = op.apply(&g.coordinates()).unwrap();
        for v in &lin[1..g.len() - 1] {
            assert!(v.abs() < 1e-9);
        }
        let quad = op.apply(&g.sample(|x| x * x)).unwrap();
        for v in &quad[1..g.len() - 1] {
            assert!((v + 2.0).abs() < 1e-8);
        }
    }

    fn limit_residual(h: f64) -> f64 {
        let g = Grid::with_spacing(40.0, h).unwrap();
        let ws = g.sample(w_star);
        let v: Vec<f64> = ws.iter().map(|w| 1.0 / 16.0 - w * w).collect();
        let op = build_schrodinger(&v, &g).unwrap();
        let r = op.apply(&ws).unwrap();
        // rows next to the Dirichlet ghosts measure truncation, not the stencil
        sup_norm(&r[1..r.len() - 1])
    }

    #[test]
    fn limit_equation_residual_is_second_order() {
        let r1 = limit_residual(0.05);
        let r2 = limit_residual(0.025);
        assert!(r1 <= 0.01 * 0.05 * 0.05, "r1 = {r1}");
        let ratio = r1 / r2;
        assert!((ratio - 4.0).abs() <= 0.5, "ratio = {ratio}");
    }

    #[test]
    fn solve_shifted_zero_and_roundtrip() {
        let g = build_grid(10.0, 201).unwrap();
        let v = g.sample(|x| (x * 0.3).sin());
        let op = build_schrodinger(&v, &g).unwrap();
        let y = op.solve_shifted(1.0, &vec![0.0; g.len()]).unwrap();
        assert!(y.iter().all(|&a| a == 0.0));
        let f = g.sample(|x| (-(x * x) / 4.0).exp() + 0.1 * (3.0 * x).cos());
        let mut af = op.apply(&f).unwrap();
        af.iter_mut().zip(&f).for_each(|(a, b)| *a += 1.0 * b);
        let back = op.solve_shifted(1.0, &af).unwrap();
        for (a, b) in back.iter().zip(&f) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn solve_recovers_w_star_from_its_equation() {
        let g = Grid::with_spacing(60.0, 0.05).unwrap();
        let op = build_schrodinger(&vec![1.0; g.len()], &g).unwrap();
        // w_*'' = w_*/16 - w_*^3
        let rhs = g.sample(|x| {
            let w = w_star(x);
            w - (w / 16.0 - w * w * w)
        });
        let y = op.solve_shifted(0.0, &rhs).unwrap();
        let exact = g.sample(w_star);
        let err = y.iter().zip(&exact).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 0.01 * g.h() * g.h(), "err = {err}");
    }

    #[test]
    fn singular_system_is_reported() {
        let op = TriDiagOperator::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        assert!(matches!(op.solve_shifted(0.0, &[1.0, 1.0]), Err(Error::SingularSystem { row: 0 })));
    }

    #[test]
    fn particle_in_a_box() {
        let g = build_grid(40.0, 1601).unwrap();
        let op = build_schrodinger(&vec![0.0; g.len()], &g).unwrap();
        let pairs = op.lowest_eigenpairs(3, &g).unwrap();
        let ground = (std::f64::consts::PI / 80.0).powi(2);
        assert!((pairs[0].eigenvalue / ground - 1.0).abs() < 0.01);
        assert!(pairs[0].eigenvalue <= pairs[1].eigenvalue);
        assert!(pairs[1].eigenvalue <= pairs[2].eigenvalue);
        for p in &pairs {
            assert!((g.norm_sq(&p.eigenvector) - 1.0).abs() < 1e-10);
            assert!(p.residual <= EIG_TOL);
        }
    }

    #[test]
    fn kernel_anchors() {
        let g = build_grid(40.0, 1601).unwrap();
        let ws = g.sample(w_star);
        let v: Vec<f64> = ws.iter().map(|w| -w * w).collect();
        let op = build_schrodinger(&v, &g).unwrap();
        let pairs = op.lowest_eigenpairs(1, &g).unwrap();
        assert!((pairs[0].eigenvalue + 1.0 / 16.0).abs() < 1e-3);
        let ov = g.dot(&pairs[0].eigenvector, &ws);
        assert!(ov > 0.999, "overlap with w_* = {ov}");

        let v3: Vec<f64> = ws.iter().map(|w| -3.0 * w * w).collect();
        let op = build_schrodinger(&v3, &g).unwrap();
        let pairs = op.lowest_eigenpairs(3, &g).unwrap();
        let dws = g.sample(crate::solitons::w_star_prime);
        let nd = g.norm_sq(&dws).sqrt();
        let hit = pairs
            .iter()
            .find(|p| (p.eigenvalue + 1.0 / 16.0).abs() < 1e-3)
            .expect("eigenvalue -1/16 missing");
        let ov = (g.dot(&hit.eigenvector, &dws) / nd).abs();
        assert!(ov > 0.999, "overlap with w_*' = {ov}");
        let odd = (0..g.len()).map(|k| hit.eigenvector[k] + hit.eigenvector[g.len() - 1 - k]);
        assert!(odd.fold(0.0_f64, |m, a| m.max(a.abs())) < 1e-6);
    }

    #[test]
    fn eigen_rejects_bad_k() {
        let g = build_grid(1.0, 11).unwrap();
        let op = build_schrodinger(&vec![0.0; 11], &g).unwrap();
        assert!(op.lowest_eigenpairs(0, &g).is_err());
        assert!(op.lowest_eigenpairs(4, &g).is_err());
    }

    proptest! {
        #[test]
        fn inner_product_symmetric_bilinear(
            f in proptest::collection::vec(-5.0f64..5.0, 21),
            g in proptest::collection::vec(-5.0f64..5.0, 21),
            k in proptest::collection::vec(-5.0f64..5.0, 21),
            alpha in -3.0f64..3.0,
        ) {
            let grid = build_grid(2.0, 21).unwrap();
            let fg = grid.inner_product(&f, &g).unwrap();
            let gf = grid.inner_product(&g, &f).unwrap();
            prop_assert_eq!(fg, gf);
            let mix: Vec<f64> = f.iter().zip(&k).map(|(a, b)| alpha * a + b).collect();
            let lhs = grid.inner_product(&mix, &g).unwrap();
            let rhs = alpha * fg + grid.inner_product(&k, &g).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn sturm_count_matches_eigenvalues(
            v in proptest::collection::vec(-3.0f64..3.0, 31),
        ) {
            let grid = build_grid(3.0, 31).unwrap();
            let op = build_schrodinger(&v, &grid).unwrap();
            let pairs = op.lowest_eigenpairs(3, &grid).unwrap();
            for (i, p) in pairs.iter().enumerate() {
                prop_assert!(op.count_below(p.eigenvalue - 1e-8) <= i);
                prop_assert!(op.count_below(p.eigenvalue + 1e-8) >= i + 1);
                if i > 0 {
                    prop_assert!(pairs[i - 1].eigenvalue <= p.eigenvalue);
                }
            }
        }
    }
}
