//! Deterministic derivative-free optimizers: a box-projected Nelder-Mead
//! simplex for low-dimensional minimization and a golden-section line search.
//! No randomness is used anywhere, so identical inputs give identical runs.

/// Options for a single Nelder-Mead run.
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Hard cap on iterations (one reflection cycle each).
    pub max_iterations: usize,
    /// Convergence threshold on the spread of simplex function values.
    pub value_tolerance: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            value_tolerance: 1e-12,
        }
    }
}

/// Outcome of a Nelder-Mead run (a minimizer).
#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(lo, hi);
    }
}

/// Minimizes `f` over the axis-aligned box `bounds`, starting from `x0`.
/// Every trial point is projected into the box before evaluation, so `f` is
/// never called outside it. Classic coefficients (reflection 1, expansion 2,
/// contraction 0.5, shrink 0.5); ties in vertex ordering keep insertion
/// order, making the run fully deterministic.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: NelderMeadOptions,
) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(n, bounds.len(), "one bound pair per coordinate");
    assert!(n > 0, "nonzero dimension");

    let mut eval = |x: &[f64]| -> f64 {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    // Initial simplex: x0 and one displaced vertex per axis (5% of the box,
    // flipped if it would leave the box degenerate at the upper edge).
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    project(&mut start, bounds);
    simplex.push(start.clone());
    for i in 0..n {
        let (lo, hi) = bounds[i];
        let span = (hi - lo).abs();
        let step = if span > 0.0 { 0.05 * span } else { 0.05 };
        let mut v = start.clone();
        v[i] = if v[i] + step <= hi {
            v[i] + step
        } else {
            v[i] - step
        };
        project(&mut v, bounds);
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        // Stable sort: best first; equal values keep existing order.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let reordered: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let revalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex = reordered;
        values = revalues;

        if (values[n] - values[0]).abs() <= opts.value_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|v| v[d]).sum::<f64>() / n as f64)
            .collect();

        let blend = |t: f64| -> Vec<f64> {
            let mut v: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n])
                .map(|(&c, &w)| c + t * (c - w))
                .collect();
            project(&mut v, bounds);
            v
        };

        let reflected = blend(1.0);
        let fr = eval(&reflected);
        if fr < values[0] {
            let expanded = blend(2.0);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let contracted = if fr < values[n] {
            blend(0.5)
        } else {
            blend(-0.5)
        };
        let fc = eval(&contracted);
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].clone();
        for i in 1..=n {
            for d in 0..n {
                simplex[i][d] = best[d] + 0.5 * (simplex[i][d] - best[d]);
            }
            project(&mut simplex[i], bounds);
            values[i] = eval(&simplex[i]);
        }
    }

    let mut order: Vec<usize> = (0..=n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    NelderMeadResult {
        x: simplex[order[0]].clone(),
        value: values[order[0]],
        iterations,
        converged,
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_8; // (sqrt(5) - 1) / 2

/// Golden-section search for the maximum of a unimodal function on
/// `[lo, hi]`, shrinking the bracket until it is narrower than `tol`.
/// Returns the bracket midpoint and the final half-width.
pub fn golden_section_max<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    assert!(hi >= lo, "ordered bracket");
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    (0.5 * (lo + hi), 0.5 * (hi - lo))
}

/// Golden-section search for the minimum of a unimodal function on `[lo, hi]`.
pub fn golden_section_min<F>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let mut f = f;
    golden_section_max(move |x| -f(x), lo, hi, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl_interior_minimum() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + (x[1] + 0.2).powi(2);
        let res = nelder_mead(
            f,
            &[0.9, 0.9],
            &[(-1.0, 1.0); 2],
            NelderMeadOptions::default(),
        );
        assert!(res.converged);
        assert!((res.x[0] - 0.3).abs() < 1e-6, "{:?}", res.x);
        assert!((res.x[1] + 0.2).abs() < 1e-6, "{:?}", res.x);
    }

    #[test]
    fn boundary_minimum_respects_box() {
        // Unconstrained minimum at x = -2, box floor at 0.
        let f = |x: &[f64]| (x[0] + 2.0).powi(2);
        let res = nelder_mead(f, &[0.8], &[(0.0, 1.0)], NelderMeadOptions::default());
        assert!(res.x[0] >= 0.0 && res.x[0] < 1e-6, "{:?}", res.x);
    }

    #[test]
    fn never_evaluates_outside_box() {
        let bounds = [(0.0, 1.0), (-0.5, 0.5)];
        let f = |x: &[f64]| {
            assert!(
                x[0] >= 0.0 && x[0] <= 1.0 && x[1] >= -0.5 && x[1] <= 0.5,
                "{x:?}"
            );
            x[0] * x[0] + x[1]
        };
        let _ = nelder_mead(f, &[1.0, 0.5], &bounds, NelderMeadOptions::default());
    }

    #[test]
    fn rosenbrock_valley_from_nearby_start() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let res = nelder_mead(
            f,
            &[0.8, 0.9],
            &[(-2.0, 2.0); 2],
            NelderMeadOptions {
                max_iterations: 5000,
                value_tolerance: 1e-14,
            },
        );
        assert!(
            (res.x[0] - 1.0).abs() < 1e-4 && (res.x[1] - 1.0).abs() < 1e-4,
            "{:?}",
            res
        );
    }

    #[test]
    fn deterministic_runs_agree_bitwise() {
        let f = |x: &[f64]| (x[0] - 0.25).powi(2) + 0.5 * (x[1] - 0.75).powi(2);
        let a = nelder_mead(
            f,
            &[0.0, 0.0],
            &[(0.0, 1.0); 2],
            NelderMeadOptions::default(),
        );
        let b = nelder_mead(
            f,
            &[0.0, 0.0],
            &[(0.0, 1.0); 2],
            NelderMeadOptions::default(),
        );
        assert_eq!(a.x, b.x);
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, half) = golden_section_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-6);
        assert!((x - 0.3).abs() < 1e-6);
        assert!(half <= 0.5e-6);
    }

    #[test]
    fn golden_section_minimum_wrapper() {
        let (x, _) = golden_section_min(|x| (x - 2.0).powi(2), 0.0, 5.0, 1e-8);
        assert!((x - 2.0).abs() < 1e-7);
    }

    #[test]
    fn golden_section_endpoint_maximum() {
        let (x, _) = golden_section_max(|x| x, 0.0, 1.0, 1e-6);
        assert!(x > 1.0 - 1e-5);
    }
}
