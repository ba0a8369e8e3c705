//! Adaptive Dormand–Prince 5(4) integrator for complex vector ODEs with
//! dense output, used for the propagator equations.

use num_complex::Complex64 as C;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on the step size; `None` means the integration span.
    pub h_max: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-9, max_steps: 10_000_000, h_max: None }
    }
}

impl OdeOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, ..Self::default() }
    }
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

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn combine(out: &mut [C], y: &[C], h: f64, terms: &[(f64, &[C])]) {
    for i in 0..out.len() {
        let mut acc = C::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        out[i] = y[i] + acc * h;
    }
}

/// Integrates `y' = f(t, y)` from `times[0]` and returns the state at every
/// entry of `times` (which must be non-decreasing).
pub fn integrate<F>(mut rhs: F, y0: &[C], times: &[f64], opts: &OdeOptions) -> Result<Vec<Vec<C>>>
where
    F: FnMut(f64, &[C], &mut [C]),
{
    let n = y0.len();
    let mut out = Vec::with_capacity(times.len());
    if times.is_empty() {
        return Ok(out);
    }
    let t0 = times[0];
    let t_end = *times.last().unwrap();
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidTimeGrid("output times must be non-decreasing".into()));
    }
    let mut next = 0;
    while next < times.len() && times[next] == t0 {
        out.push(y0.to_vec());
        next += 1;
    }
    if next == times.len() {
        return Ok(out);
    }

    let span = t_end - t0;
    let h_max = opts.h_max.unwrap_or(span).min(span);
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k1 = vec![C::new(0.0, 0.0); n];
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (k1.clone(), k1.clone(), k1.clone(), k1.clone(), k1.clone(), k1.clone());
    let mut tmp = k1.clone();
    let mut y_new = k1.clone();
    rhs(t, &y, &mut k1);

    // initial step from the scale of y and y'
    let scale: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.norm()).collect();
    let rms = |v: &[C]| {
        (v.iter().zip(&scale).map(|(x, s)| (x.norm() / s).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt()
    };
    let d0 = rms(&y);
    let d1 = rms(&k1);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(h_max).max(1e-12 * span.max(1.0));

    let mut steps = 0usize;
    let mut rejected_last = false;
    let mut cont: [Vec<C>; 5] = std::array::from_fn(|_| vec![C::new(0.0, 0.0); n]);
    while next < times.len() {
        if steps >= opts.max_steps {
            return Err(Error::IntegratorFailure { t, reason: "maximum number of steps exceeded".into() });
        }
        steps += 1;
        let last = t + h >= t_end - 1e-13 * span;
        if last {
            h = t_end - t;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::IntegratorFailure { t, reason: "step size underflow".into() });
        }

        combine(&mut tmp, &y, h, &[(A21, &k1)]);
        rhs(t + C2 * h, &tmp, &mut k2);
        combine(&mut tmp, &y, h, &[(A31, &k1), (A32, &k2)]);
        rhs(t + C3 * h, &tmp, &mut k3);
        combine(&mut tmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        rhs(t + C4 * h, &tmp, &mut k4);
        combine(&mut tmp, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        rhs(t + C5 * h, &tmp, &mut k5);
        combine(&mut tmp, &y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        rhs(t + h, &tmp, &mut k6);
        combine(&mut y_new, &y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        rhs(t + h, &y_new, &mut k7);

        let mut err = 0.0;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let s = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
            err += (e.norm() / s).powi(2);
        }
        let err = (err / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::IntegratorFailure { t, reason: "non-finite error estimate".into() });
        }

        if err <= 1.0 {
            let t_new = if last { t_end } else { t + h };
            for i in 0..n {
                let ydiff = y_new[i] - y[i];
                let bspl = k1[i] * h - ydiff;
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - k7[i] * h - bspl;
                cont[4][i] =
                    (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
            }
            while next < times.len() && times[next] <= t_new {
                let tq = times[next];
                if tq == t_new {
                    out.push(y_new.clone());
                } else {
                    let s = (tq - t) / h;
                    let s1 = 1.0 - s;
                    out.push(
                        (0..n)
                            .map(|i| {
                                cont[0][i]
                                    + (cont[1][i]
                                        + (cont[2][i] + (cont[3][i] + cont[4][i] * s1) * s) * s1)
                                        * s
                            })
                            .collect(),
                    );
                }
                next += 1;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            let mut fac = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
            fac = fac.clamp(0.2, 5.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            rejected_last = false;
            h = (h * fac).min(h_max);
        } else {
            rejected_last = true;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_is_accurate() {
        let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let opts = OdeOptions::with_tolerance(1e-11);
        let ys = integrate(|_, y, dy| dy[0] = C::i() * 2.0 * y[0], &[C::new(1.0, 0.0)], &times, &opts).unwrap();
        for (t, y) in times.iter().zip(&ys) {
            let exact = C::from_polar(1.0, 2.0 * t);
            assert!((y[0] - exact).norm() < 1e-9, "t={t} err={}", (y[0] - exact).norm());
        }
    }

    #[test]
    fn dense_output_between_steps() {
        // sparse grid forces interpolation within long steps
        let times = vec![0.0, 0.123, 0.5, 1.77, 3.0];
        let opts = OdeOptions::with_tolerance(1e-12);
        let ys = integrate(
            |t, y, dy| dy[0] = y[0] * (-0.3 + C::i() * t.cos()),
            &[C::new(0.5, 0.2)],
            &times,
            &opts,
        )
        .unwrap();
        for (t, y) in times.iter().zip(&ys) {
            let exact = C::new(0.5, 0.2) * (C::new(-0.3 * t, t.sin())).exp();
            assert!((y[0] - exact).norm() < 1e-10);
        }
    }

    #[test]
    fn start_time_returns_initial() {
        let ys = integrate(|_, _, dy| dy[0] = C::new(1.0, 0.0), &[C::new(3.0, 1.0)], &[0.0], &OdeOptions::default()).unwrap();
        assert_eq!(ys, vec![vec![C::new(3.0, 1.0)]]);
    }
}
