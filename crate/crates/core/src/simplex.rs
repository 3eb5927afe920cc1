//! Nelder–Mead simplex minimization with restart on collapse.
//!
//! The objective may return `+∞` (or NaN, treated as `+∞`) to mark infeasible
//! points; such vertices are always the first to be replaced.

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Edge length of the initial simplex along each axis, relative to
    /// `max(|x0_i|, 1)`.
    pub initial_step: f64,
    /// Convergence requires `f_worst - f_best < f_tol`...
    pub f_tol: f64,
    /// ...and every vertex within `x_tol` of the best one (max-norm).
    pub x_tol: f64,
    pub max_evaluations: usize,
    /// Fresh simplices built around the incumbent after convergence.
    pub max_restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            f_tol: 1e-10,
            x_tol: 1e-8,
            max_evaluations: 20_000,
            max_restarts: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub restarts: usize,
    pub converged: bool,
    /// Max-norm distance of the final simplex vertices from the best vertex.
    pub spread: f64,
}

struct Vertex {
    x: Vec<f64>,
    f: f64,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

pub fn minimize<F>(mut objective: F, x0: &[f64], options: &SimplexOptions) -> SimplexOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    assert!(dim >= 1, "simplex search needs at least one variable");

    let mut evaluations = 0usize;
    let mut iterations = 0usize;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        sanitize(objective(x))
    };

    let mut best = Vertex {
        x: x0.to_vec(),
        f: eval(x0, &mut evaluations),
    };
    let mut restarts = 0usize;
    let mut converged;
    let mut spread;

    loop {
        let start_f = best.f;
        let (vertex, conv, sp) = run_once(
            &mut |x: &[f64], e: &mut usize| eval(x, e),
            best,
            options,
            &mut evaluations,
            &mut iterations,
        );
        best = vertex;
        converged = conv;
        spread = sp;
        let improved = start_f - best.f;
        if !converged || evaluations >= options.max_evaluations {
            break;
        }
        if restarts > 0 && !(improved > options.f_tol) {
            break;
        }
        if restarts >= options.max_restarts {
            break;
        }
        restarts += 1;
    }

    SimplexOutcome {
        x: best.x,
        value: best.f,
        iterations,
        evaluations,
        restarts,
        converged,
        spread,
    }
}

fn run_once<E>(
    eval: &mut E,
    start: Vertex,
    options: &SimplexOptions,
    evaluations: &mut usize,
    iterations: &mut usize,
) -> (Vertex, bool, f64)
where
    E: FnMut(&[f64], &mut usize) -> f64,
{
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let dim = start.x.len();
    let mut simplex = Vec::with_capacity(dim + 1);
    for i in 0..dim {
        let mut x = start.x.clone();
        x[i] += options.initial_step * x[i].abs().max(1.0);
        let f = eval(&x, evaluations);
        simplex.push(Vertex { x, f });
    }
    simplex.push(start);

    let order = |s: &mut Vec<Vertex>| s.sort_by(|a, b| a.f.total_cmp(&b.f));
    order(&mut simplex);

    let spread_of = |s: &[Vertex]| {
        s[1..]
            .iter()
            .flat_map(|v| v.x.iter().zip(&s[0].x).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max)
    };

    loop {
        let f_spread = simplex[dim].f - simplex[0].f;
        let x_spread = spread_of(&simplex);
        if f_spread.is_finite() && f_spread < options.f_tol && x_spread < options.x_tol {
            return (simplex.swap_remove(0), true, x_spread);
        }
        if *evaluations >= options.max_evaluations {
            return (simplex.swap_remove(0), false, x_spread);
        }
        *iterations += 1;

        let mut centroid = vec![0.0; dim];
        for v in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(&v.x) {
                *c += x / dim as f64;
            }
        }
        let along = |t: f64, worst: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(worst)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let worst = simplex[dim].x.clone();
        let xr = along(REFLECT, &worst);
        let fr = eval(&xr, evaluations);

        if fr < simplex[0].f {
            let xe = along(EXPAND, &worst);
            let fe = eval(&xe, evaluations);
            simplex[dim] = if fe < fr {
                Vertex { x: xe, f: fe }
            } else {
                Vertex { x: xr, f: fr }
            };
        } else if fr < simplex[dim - 1].f {
            simplex[dim] = Vertex { x: xr, f: fr };
        } else {
            let outside = fr < simplex[dim].f;
            let xc = if outside {
                along(CONTRACT, &worst)
            } else {
                along(-CONTRACT, &worst)
            };
            let fc = eval(&xc, evaluations);
            let accept = if outside { fc <= fr } else { fc < simplex[dim].f };
            if accept {
                simplex[dim] = Vertex { x: xc, f: fc };
            } else {
                let best = simplex[0].x.clone();
                for v in simplex.iter_mut().skip(1) {
                    for (x, b) in v.x.iter_mut().zip(&best) {
                        *x = b + SHRINK * (*x - b);
                    }
                    v.f = eval(&v.x, evaluations);
                }
            }
        }
        order(&mut simplex);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = minimize(f, &[-1.2, 1.0], &SimplexOptions::default());
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6, "{:?}", out.x);
        assert!((out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_five_dims() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - i as f64).powi(2)).sum();
        let out = minimize(f, &[3.0; 5], &SimplexOptions::default());
        for (i, v) in out.x.iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn infeasible_region_is_avoided() {
        let f = |x: &[f64]| if x[0] < 0.5 { f64::INFINITY } else { (x[0] - 0.2).powi(2) + x[1].powi(2) };
        let out = minimize(f, &[2.0, 1.0], &SimplexOptions::default());
        assert!(out.x[0] >= 0.5);
        assert!((out.x[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn budget_exhaustion_reports_unconverged() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions { max_evaluations: 20, ..Default::default() };
        let out = minimize(f, &[-1.2, 1.0], &opts);
        assert!(!out.converged);
        assert!(out.evaluations <= 25);
    }
}
