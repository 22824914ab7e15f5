//! Box-constrained Nelder–Mead.
//!
//! Trial points are clamped into the box. Non-finite objective values are
//! treated as `+∞`, which lets callers encode infeasibility directly.

use crate::region::AxisBox;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Initial simplex edge as a fraction of each box width.
    pub initial_step: f64,
    /// Stop when the spread of simplex values drops below this.
    pub ftol: f64,
    /// ... and the simplex diameter (relative to the box) below this.
    pub xtol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_evals: 500,
            initial_step: 0.1,
            ftol: 1e-12,
            xtol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

impl NelderMead {
    pub fn minimize(&self, f: &dyn Fn(&[f64]) -> f64, x0: &[f64], bounds: &AxisBox) -> Minimum {
        let n = x0.len();
        let widths = bounds.widths();
        let evals = std::cell::Cell::new(0usize);
        let eval = |x: &[f64]| {
            evals.set(evals.get() + 1);
            sanitize(f(x))
        };
        let clamp = |mut x: Vec<f64>| {
            bounds.clamp(&mut x);
            x
        };

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let start = clamp(x0.to_vec());
        let v0 = eval(&start);
        simplex.push((start.clone(), v0));
        for i in 0..n {
            let mut x = start.clone();
            let step = self.initial_step * widths[i].max(1e-12);
            // step inward when the start sits on the upper face
            x[i] = if x[i] + step <= bounds.hi[i] {
                x[i] + step
            } else {
                x[i] - step
            };
            let x = clamp(x);
            let v = eval(&x);
            simplex.push((x, v));
        }
        if n == 0 {
            return Minimum {
                x: start,
                value: v0,
                evals: evals.get(),
            };
        }

        let scale = widths.iter().cloned().fold(0.0, f64::max).max(1e-300);
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[n].1;
            let diameter = simplex[1..]
                .iter()
                .map(|(x, _)| {
                    x.iter()
                        .zip(&simplex[0].0)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            let flat = worst.is_finite() && (worst - best).abs() <= self.ftol * (1.0 + best.abs());
            if evals.get() >= self.max_evals || (flat && diameter <= self.xtol * scale) || diameter == 0.0 {
                break;
            }

            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for i in 0..n {
                    centroid[i] += x[i] / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                clamp(
                    centroid
                        .iter()
                        .zip(&simplex[n].0)
                        .map(|(c, w)| c + t * (w - c))
                        .collect(),
                )
            };

            let xr = along(-1.0);
            let fr = eval(&xr);
            if fr < simplex[0].1 {
                let xe = along(-2.0);
                let fe = eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < simplex[n].1 {
                let x = along(-0.5);
                let v = eval(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = eval(&x);
                (x, v)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
                continue;
            }
            // shrink toward the best vertex
            let best_x = simplex[0].0.clone();
            for k in 1..=n {
                let x = clamp(
                    best_x
                        .iter()
                        .zip(&simplex[k].0)
                        .map(|(b, x)| b + 0.5 * (x - b))
                        .collect(),
                );
                let v = eval(&x);
                simplex[k] = (x, v);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Minimum {
            x,
            value,
            evals: evals.get(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_in_a_box() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let b = AxisBox::cube(2, 2.0);
        let nm = NelderMead {
            max_evals: 4000,
            ..Default::default()
        };
        let m = nm.minimize(&f, &[-1.2, 1.0], &b);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m);
    }

    #[test]
    fn respects_bounds_and_infeasibility() {
        // minimum of x² sits at 0, but x < 0.3 is declared infeasible
        let f = |x: &[f64]| if x[0] < 0.3 { f64::INFINITY } else { x[0] * x[0] };
        let b = AxisBox::new(vec![-1.0], vec![2.0]).unwrap();
        let m = NelderMead::default().minimize(&f, &[1.5], &b);
        assert!(m.x[0] >= 0.3 && m.x[0] < 0.31, "{:?}", m);
        let g = |x: &[f64]| -x[0];
        let m = NelderMead::default().minimize(&g, &[0.0], &b);
        assert_eq!(m.x[0], 2.0);
    }

    #[test]
    fn budget_is_respected() {
        let f = |x: &[f64]| x.iter().map(|v| v.sin()).sum::<f64>();
        let nm = NelderMead {
            max_evals: 37,
            ..Default::default()
        };
        let m = nm.minimize(&f, &[0.1, 0.2, 0.3], &AxisBox::cube(3, 5.0));
        assert!(m.evals <= 37 + 5);
    }
}
