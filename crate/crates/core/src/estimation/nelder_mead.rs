//! Derivative-free simplex minimization.
//!
//! Objective values of `+∞` mark infeasible points; they always lose
//! comparisons, so the simplex contracts back into the feasible region.

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Stop once every vertex is within this distance of the best one.
    pub diameter_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|(v, _)| {
            v.iter()
                .zip(best)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

fn affine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b - a)
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Minimizes `f` from `start` with axis-aligned initial steps.
pub fn minimize(
    mut f: impl FnMut(&[f64]) -> f64,
    start: &[f64],
    steps: &[f64],
    opts: SimplexOptions,
) -> SimplexResult {
    let dim = start.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), eval(start)));
    for k in 0..dim {
        let mut v = start.to_vec();
        v[k] += steps[k];
        let fv = eval(&v);
        simplex.push((v, fv));
    }

    let mut iterations = 0;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if diameter(&simplex) < opts.diameter_tol {
            let (x, f) = simplex.swap_remove(0);
            return SimplexResult {
                x,
                f,
                iterations,
                converged: true,
            };
        }
        if iterations >= opts.max_iter {
            let (x, f) = simplex.swap_remove(0);
            return SimplexResult {
                x,
                f,
                iterations,
                converged: false,
            };
        }
        iterations += 1;

        let worst = simplex[dim].clone();
        let centroid: Vec<f64> = (0..dim)
            .map(|k| simplex[..dim].iter().map(|(v, _)| v[k]).sum::<f64>() / dim as f64)
            .collect();
        let reflected = affine(&centroid, &worst.0, -1.0);
        let fr = eval(&reflected);

        if fr < simplex[0].1 {
            let expanded = affine(&centroid, &worst.0, -2.0);
            let fe = eval(&expanded);
            simplex[dim] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
            continue;
        }
        // contraction, outside if the reflection improved on the worst point
        let (cand, fc) = if fr < worst.1 {
            let c = affine(&centroid, &reflected, 0.5);
            let fc = eval(&c);
            (c, fc)
        } else {
            let c = affine(&centroid, &worst.0, 0.5);
            let fc = eval(&c);
            (c, fc)
        };
        if fc < worst.1.min(fr) {
            simplex[dim] = (cand, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let v = affine(&best, &vertex.0, 0.5);
            let fv = eval(&v);
            *vertex = (v, fv);
        }
    }
}
