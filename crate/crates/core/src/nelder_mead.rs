//! Bounded Nelder–Mead simplex search.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub f_tol: f64,
    pub max_iterations: usize,
    pub initial_step: f64,
    /// Coordinates are projected into [lower, upper].
    pub lower: f64,
    pub upper: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            f_tol: 1e-12,
            max_iterations: 2000,
            initial_step: 0.05,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult<const D: usize> {
    pub x: [f64; D],
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn minimize<const D: usize>(
    f: impl Fn(&[f64; D]) -> f64,
    start: [f64; D],
    opts: &NelderMeadOptions,
) -> NelderMeadResult<D> {
    let project = |mut x: [f64; D]| {
        for v in x.iter_mut() {
            *v = v.clamp(opts.lower, opts.upper);
        }
        x
    };
    let eval = |x: &[f64; D]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<([f64; D], f64)> = Vec::with_capacity(D + 1);
    let x0 = project(start);
    simplex.push((x0, eval(&x0)));
    for i in 0..D {
        let mut x = x0;
        x[i] += opts.initial_step;
        if x[i] > opts.upper {
            x[i] = x0[i] - opts.initial_step;
        }
        let x = project(x);
        simplex.push((x, eval(&x)));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[D].1 - simplex[0].1 <= opts.f_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut centroid = [0.0; D];
        for (x, _) in &simplex[..D] {
            for j in 0..D {
                centroid[j] += x[j] / D as f64;
            }
        }
        let worst = simplex[D];
        let along = |t: f64| {
            let mut x = [0.0; D];
            for j in 0..D {
                x[j] = centroid[j] + t * (worst.0[j] - centroid[j]);
            }
            project(x)
        };
        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            simplex[D] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[D - 1].1 {
            simplex[D] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let x = along(-0.5);
            (x, eval(&x))
        } else {
            let x = along(0.5);
            (x, eval(&x))
        };
        if fc < worst.1.min(fr) {
            simplex[D] = (xc, fc);
            continue;
        }
        let best = simplex[0].0;
        for item in simplex.iter_mut().skip(1) {
            let mut x = [0.0; D];
            for j in 0..D {
                x[j] = best[j] + 0.5 * (item.0[j] - best[j]);
            }
            let x = project(x);
            *item = (x, eval(&x));
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    NelderMeadResult {
        x: simplex[0].0,
        f: simplex[0].1,
        iterations,
        converged,
    }
}
