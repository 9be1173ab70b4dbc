//! Adaptive Dormand-Prince 5(4) integrator for matrix-valued ODEs.

use crate::{CMatrix, Error, Result, C64};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-8,
            atol: 1e-10,
            initial_step: 1e-3,
            max_step: 1.0,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub t: f64,
}

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combo(y: &CMatrix, h: f64, terms: &[(f64, &CMatrix)]) -> CMatrix {
    let mut out = y.clone();
    for (c, k) in terms {
        let w = C64::new(h * c, 0.0);
        for (o, v) in out.as_mut_slice().iter_mut().zip(k.as_slice()) {
            *o += w * v;
        }
    }
    out
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1`.
///
/// After every accepted step `observer(t, y)` is called; returning `true`
/// stops the integration early.
pub fn integrate<F, O>(
    mut f: F,
    y0: CMatrix,
    t0: f64,
    t1: f64,
    opts: OdeOptions,
    mut observer: O,
) -> Result<(CMatrix, OdeStats)>
where
    F: FnMut(f64, &CMatrix) -> CMatrix,
    O: FnMut(f64, &CMatrix) -> bool,
{
    let mut t = t0;
    let mut y = y0;
    let mut h = opts.initial_step.min(t1 - t0).max(1e-12);
    let mut stats = OdeStats { accepted: 0, rejected: 0, t };
    let mut k1 = f(t, &y);
    while t < t1 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::NonConvergence {
                what: "ode step budget".into(),
                residual: t1 - t,
            });
        }
        h = h.min(t1 - t).min(opts.max_step);
        let k2 = f(t + C2 * h, &combo(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &combo(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &combo(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * h,
            &combo(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &combo(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = combo(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = f(t + h, &y_new);
        let mut err_sq = 0.0;
        let n = y.len() as f64;
        for idx in 0..y.len() {
            let e = (k1.as_slice()[idx] * E1
                + k3.as_slice()[idx] * E3
                + k4.as_slice()[idx] * E4
                + k5.as_slice()[idx] * E5
                + k6.as_slice()[idx] * E6
                + k7.as_slice()[idx] * E7)
                * h;
            let sc = opts.atol + opts.rtol * y.as_slice()[idx].norm().max(y_new.as_slice()[idx].norm());
            err_sq += (e.norm() / sc).powi(2);
        }
        let err = (err_sq / n).sqrt();
        if !err.is_finite() {
            return Err(Error::NonConvergence {
                what: "ode produced non-finite state".into(),
                residual: f64::INFINITY,
            });
        }
        if err <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7;
            stats.accepted += 1;
            stats.t = t;
            if observer(t, &y) {
                break;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::NonConvergence {
                    what: "ode step size underflow".into(),
                    residual: err,
                });
            }
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_with_rotation() {
        let lam = C64::new(-0.5, 2.0);
        let y0 = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        let (y, stats) = integrate(|_, y| y * lam, y0, 0.0, 3.0, OdeOptions { rtol: 1e-10, atol: 1e-12, ..Default::default() }, |_, _| false).unwrap();
        let exact = (lam * 3.0).exp();
        assert!((y[(0, 0)] - exact).norm() < 1e-8);
        assert!((stats.t - 3.0).abs() < 1e-12);
    }

    #[test]
    fn observer_stops_early() {
        let y0 = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        let (_, stats) = integrate(|_, y| -y, y0, 0.0, 100.0, OdeOptions::default(), |t, _| t > 1.0).unwrap();
        assert!(stats.t < 10.0);
    }
}
