//! Explicit Runge–Kutta integrators for `ẋ = f(t, x)`.
//!
//! Adaptive Dormand–Prince 5(4) with FSAL and a fixed-step classical RK4.
//! Both integrate forwards or backwards (`t1 < t0`).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Dormand–Prince 5(4), error per step `≤ atol + rtol·|x|` (RMS norm).
    Rk45 { atol: f64, rtol: f64, max_steps: usize },
    /// Classical RK4 with `ceil(|t1 − t0| · steps_per_unit)` equal steps.
    Rk4 { steps_per_unit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSpec {
    pub method: Method,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        IntegratorSpec::rk45(1e-10)
    }
}

impl IntegratorSpec {
    pub fn rk45(tol: f64) -> Self {
        IntegratorSpec {
            method: Method::Rk45 {
                atol: tol,
                rtol: tol,
                max_steps: 1_000_000,
            },
        }
    }

    pub fn rk4(steps_per_unit: usize) -> Self {
        IntegratorSpec {
            method: Method::Rk4 { steps_per_unit },
        }
    }

    /// Nominal accuracy of the method, used to scale round-trip tolerances.
    pub fn tolerance(&self) -> f64 {
        match self.method {
            Method::Rk45 { atol, rtol, .. } => atol.max(rtol),
            Method::Rk4 { steps_per_unit } => (1.0 / steps_per_unit as f64).powi(4),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::Rk45 { atol, rtol, max_steps } => {
                if !(atol > 0.0 && rtol >= 0.0 && max_steps > 0) {
                    return Err(Error::Contract(format!(
                        "RK45 needs atol > 0, rtol >= 0, max_steps > 0 (got {atol}, {rtol}, {max_steps})"
                    )));
                }
            }
            Method::Rk4 { steps_per_unit } => {
                if steps_per_unit == 0 {
                    return Err(Error::Contract("RK4 needs at least one step per unit".into()));
                }
            }
        }
        Ok(())
    }
}

/// Right-hand side `f(t, x, out)`.
pub type Rhs<'a> = dyn Fn(f64, &[f64], &mut [f64]) + 'a;

/// Integrates from `(t0, x0)` to `t1`.
pub fn solve(f: &Rhs<'_>, t0: f64, t1: f64, x0: &[f64], spec: &IntegratorSpec) -> Result<Vec<f64>> {
    if t0 == t1 {
        return Ok(x0.to_vec());
    }
    match spec.method {
        Method::Rk45 { atol, rtol, max_steps } => dopri5(f, t0, t1, x0, atol, rtol, max_steps),
        Method::Rk4 { steps_per_unit } => Ok(rk4(f, t0, t1, x0, steps_per_unit)),
    }
}

/// Integrates from `(t0, x0)` through each of `stops` in order, returning the
/// state at every stop. Each leg is an independent solve started from the
/// previous stop.
pub fn solve_stops(f: &Rhs<'_>, t0: f64, x0: &[f64], stops: &[f64], spec: &IntegratorSpec) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(stops.len());
    let mut t = t0;
    let mut x = x0.to_vec();
    for &s in stops {
        x = solve(f, t, s, &x, spec)?;
        t = s;
        out.push(x.clone());
    }
    Ok(out)
}

fn rk4(f: &Rhs<'_>, t0: f64, t1: f64, x0: &[f64], steps_per_unit: usize) -> Vec<f64> {
    let n = x0.len();
    let steps = (((t1 - t0).abs() * steps_per_unit as f64).ceil() as usize).max(1);
    let dt = (t1 - t0) / steps as f64;
    let mut x = x0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for s in 0..steps {
        let t = t0 + dt * s as f64;
        f(t, &x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        f(t + 0.5 * dt, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        f(t + 0.5 * dt, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + dt * k3[i];
        }
        f(t + dt, &tmp, &mut k4);
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn rms_scaled(v: &[f64], y0: &[f64], y1: &[f64], atol: f64, rtol: f64) -> f64 {
    let n = v.len();
    let s: f64 = (0..n)
        .map(|i| {
            let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
            let r = v[i] / sc;
            r * r
        })
        .sum();
    (s / n as f64).sqrt()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[allow(clippy::too_many_arguments)]
fn dopri5(f: &Rhs<'_>, t0: f64, t1: f64, x0: &[f64], atol: f64, rtol: f64, max_steps: usize) -> Result<Vec<f64>> {
    let n = x0.len();
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut y = x0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];

    let fail = |t: f64, y: &[f64], reason: &str| Error::IntegrationFailure {
        t,
        x: y.to_vec(),
        reason: reason.to_string(),
    };

    let mut t = t0;
    f(t, &y, &mut k1);
    if !all_finite(&k1) {
        return Err(fail(t, &y, "non-finite vector field"));
    }

    // initial step (Hairer–Nørsett–Wanner heuristic)
    let zeros = vec![0.0; n];
    let d0 = rms_scaled(&y, &y, &zeros, atol, rtol);
    let d1 = rms_scaled(&k1, &y, &zeros, atol, rtol);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span);
    for i in 0..n {
        tmp[i] = y[i] + dir * h * k1[i];
    }
    f(t + dir * h, &tmp, &mut k2);
    for i in 0..n {
        err[i] = (k2[i] - k1[i]) / h;
    }
    let d2 = rms_scaled(&err, &y, &zeros, atol, rtol);
    let h1 = if d1.max(d2) <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    h = (100.0 * h).min(h1).min(span);

    let mut steps = 0usize;
    let mut last_rejected = false;
    loop {
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        if steps >= max_steps {
            return Err(fail(t, &y, "maximum step count exceeded"));
        }
        // a rounding-level remainder: close it with an Euler step
        if remaining <= 1e-14 * t1.abs().max(span) {
            for i in 0..n {
                y[i] += dir * remaining * k1[i];
            }
            break;
        }
        let mut final_step = false;
        if h >= remaining {
            h = remaining;
            final_step = true;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(fail(t, &y, "step size underflow"));
        }
        let hs = dir * h;

        for i in 0..n {
            tmp[i] = y[i] + hs * A21 * k1[i];
        }
        f(t + C2 * hs, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * hs, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * hs, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * hs, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if final_step { t1 } else { t + hs };
        f(t + hs, &tmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t_new, &ynew, &mut k7);
        steps += 1;

        let finite = all_finite(&ynew) && all_finite(&k7);
        let e = if finite {
            for i in 0..n {
                err[i] = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            rms_scaled(&err, &y, &ynew, atol, rtol)
        } else {
            f64::INFINITY
        };

        if e <= 1.0 {
            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            let mut fac = if e == 0.0 { 5.0 } else { 0.9 * e.powf(-0.2) };
            fac = fac.clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            last_rejected = false;
            if final_step {
                break;
            }
        } else {
            let fac = if e.is_finite() {
                (0.9 * e.powf(-0.2)).clamp(0.2, 1.0)
            } else {
                0.2
            };
            h *= fac;
            last_rejected = true;
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(_t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = x[1];
        out[1] = -x[0];
    }

    #[test]
    fn short_backward_solve_absorbs_rounding_remainders() {
        let drift = |_t: f64, _x: &[f64], out: &mut [f64]| out.fill(-1.2);
        let x = solve(
            &drift,
            9.999999999999999e-5,
            0.0,
            &[0.0, -0.00011999999999999996],
            &IntegratorSpec::default(),
        )
        .unwrap();
        assert!(x[1].abs() < 1e-18 && x[0] > 1.1e-4);
    }

    #[test]
    fn rk45_harmonic_oscillator() {
        let x = solve(&harmonic, 0.0, 1.0, &[1.0, 0.0], &IntegratorSpec::rk45(1e-10)).unwrap();
        assert!((x[0] - 1f64.cos()).abs() < 1e-9);
        assert!((x[1] + 1f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn rk45_backwards_round_trip() {
        let spec = IntegratorSpec::rk45(1e-10);
        let x = solve(&harmonic, 0.0, 2.0, &[0.3, -0.4], &spec).unwrap();
        let back = solve(&harmonic, 2.0, 0.0, &x, &spec).unwrap();
        assert!((back[0] - 0.3).abs() < 1e-9 && (back[1] + 0.4).abs() < 1e-9);
    }

    #[test]
    fn rk4_convergence_order() {
        let exact = 1f64.cos();
        let err = |steps| {
            let x = solve(&harmonic, 0.0, 1.0, &[1.0, 0.0], &IntegratorSpec::rk4(steps)).unwrap();
            (x[0] - exact).abs()
        };
        let ratio = err(20) / err(40);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn time_dependent_field() {
        // ẋ = t² → x(1) = 1/3
        let f = |t: f64, _x: &[f64], out: &mut [f64]| out[0] = t * t;
        let x = solve(&f, 0.0, 1.0, &[0.0], &IntegratorSpec::default()).unwrap();
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn blow_up_reports_failure() {
        // ẋ = x², x(0) = 1 blows up at t = 1
        let f = |_t: f64, x: &[f64], out: &mut [f64]| out[0] = x[0] * x[0];
        let err = solve(&f, 0.0, 2.0, &[1.0], &IntegratorSpec::rk45(1e-8)).unwrap_err();
        match err {
            Error::IntegrationFailure { t, .. } => assert!(t < 1.0 + 1e-6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_span_is_identity() {
        let x = solve(&harmonic, 0.5, 0.5, &[1.0, 2.0], &IntegratorSpec::default()).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
    }
}
