//! Nelder–Mead simplex search with standard coefficients.
//!
//! Vertices with equal objective are ordered lexicographically by position,
//! so the search is fully deterministic even on the flat plateaus of a step
//! function.

use std::cmp::Ordering;

const REFLECTION: f64 = 1.0;
const EXPANSION: f64 = 2.0;
const CONTRACTION: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Edge of the axis-aligned starting simplex; a negative edge builds it
    /// on the other side of the start.
    pub initial_step: f64,
    /// Stop once every vertex is within this distance of the best one.
    pub diameter_tolerance: f64,
    /// Stop once the best value is at or below this.
    pub value_target: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// The simplex diameter fell below the tolerance.
    pub collapsed: bool,
}

#[derive(Debug, Clone)]
struct Vertex {
    point: Vec<f64>,
    value: f64,
}

fn vertex_order(a: &Vertex, b: &Vertex) -> Ordering {
    a.value.total_cmp(&b.value).then_with(|| {
        a.point
            .iter()
            .zip(&b.point)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// `base + coeff * (to - base)`, componentwise.
fn towards(base: &[f64], to: &[f64], coeff: f64) -> Vec<f64> {
    base.iter().zip(to).map(|(b, t)| b + coeff * (t - b)).collect()
}

fn diameter(simplex: &[Vertex]) -> f64 {
    let best = &simplex[0].point;
    simplex[1..]
        .iter()
        .map(|v| v.point.iter().zip(best).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Minimizes `f` from `start`. Non-finite objective values are treated as
/// `+inf`.
pub fn minimize<F>(mut f: F, start: &[f64], opts: &SearchOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = start.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vertex> = Vec::with_capacity(dim + 1);
    simplex.push(Vertex { point: start.to_vec(), value: eval(start) });
    for k in 0..dim {
        let mut point = start.to_vec();
        point[k] += opts.initial_step;
        let value = eval(&point);
        simplex.push(Vertex { point, value });
    }

    let mut iterations = 0;
    let mut collapsed = false;
    loop {
        simplex.sort_by(vertex_order);
        if diameter(&simplex) < opts.diameter_tolerance {
            collapsed = true;
            break;
        }
        if simplex[0].value <= opts.value_target || iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; dim];
        for v in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(&v.point) {
                *c += x / dim as f64;
            }
        }
        let worst = simplex[dim].clone();
        let best_value = simplex[0].value;
        let second_worst = simplex[dim - 1].value;

        let reflected = towards(&centroid, &worst.point, -REFLECTION);
        let fr = eval(&reflected);

        if fr < best_value {
            let expanded = towards(&centroid, &reflected, EXPANSION);
            let fe = eval(&expanded);
            simplex[dim] = if fe < fr {
                Vertex { point: expanded, value: fe }
            } else {
                Vertex { point: reflected, value: fr }
            };
            continue;
        }
        // Ties with the second-worst vertex still move the simplex, so it can
        // travel across a plateau instead of contracting on it.
        if fr <= second_worst && fr < worst.value {
            simplex[dim] = Vertex { point: reflected, value: fr };
            continue;
        }
        if fr < worst.value {
            let outside = towards(&centroid, &reflected, CONTRACTION);
            let fc = eval(&outside);
            if fc <= fr {
                simplex[dim] = Vertex { point: outside, value: fc };
                continue;
            }
        } else {
            let inside = towards(&centroid, &worst.point, CONTRACTION);
            let fc = eval(&inside);
            if fc < worst.value {
                simplex[dim] = Vertex { point: inside, value: fc };
                continue;
            }
        }

        let best = simplex[0].point.clone();
        for v in simplex[1..].iter_mut() {
            v.point = towards(&best, &v.point, SHRINK);
            v.value = eval(&v.point);
        }
    }

    let best = simplex.swap_remove(0);
    Minimum { point: best.point, value: best.value, iterations, evaluations, collapsed }
}
