//! Small numerical kernels shared across modules: compensated summation,
//! uniform-grid quadrature, cubic Hermite interpolation and an adaptive
//! Dormand–Prince integrator for two-component systems.

/// Neumaier-compensated sum.
pub fn ksum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Composite Simpson rule on uniformly spaced samples. An odd number of
/// intervals is handled with a trailing 3/8 panel.
pub fn simpson(samples: &[f64], dx: f64) -> f64 {
    let n = samples.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * dx * (samples[0] + samples[1]),
        3 => dx / 3.0 * (samples[0] + 4.0 * samples[1] + samples[2]),
        _ => {
            let intervals = n - 1;
            let (even_end, tail) = if intervals.is_multiple_of(2) {
                (n - 1, 0.0)
            } else {
                let k = n - 4;
                let t = 3.0 * dx / 8.0
                    * (samples[k] + 3.0 * samples[k + 1] + 3.0 * samples[k + 2] + samples[k + 3]);
                (n - 4, t)
            };
            let interior = ksum((1..even_end).map(|i| {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                w * samples[i]
            }));
            dx / 3.0 * (samples[0] + interior + samples[even_end]) + tail
        }
    }
}

/// Trapezoid rule on uniformly spaced samples.
pub fn trapezoid(samples: &[f64], dx: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => {
            let inner = ksum(samples[1..n - 1].iter().copied());
            dx * (inner + 0.5 * (samples[0] + samples[n - 1]))
        }
    }
}

/// Cubic Hermite interpolation on a single cell `[x0, x0 + h]`.
#[inline]
pub fn hermite(t: f64, h: f64, f0: f64, d0: f64, f1: f64, d1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1
}

/// Four-point Lagrange interpolation of uniformly spaced samples at
/// fractional index `s` (clamped stencil at the ends).
pub fn lagrange4(values: &[f64], s: f64) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    if n < 4 {
        let i = s.round().clamp(0.0, (n - 1) as f64) as usize;
        return values[i];
    }
    let base = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut acc = 0.0;
    for j in 0..4 {
        let xj = (base + j) as f64;
        let mut w = 1.0;
        for m in 0..4 {
            if m != j {
                let xm = (base + m) as f64;
                w *= (s - xm) / (xj - xm);
            }
        }
        acc += w * values[base + j];
    }
    acc
}

/// Adaptive Dormand–Prince 5(4) stepper for `y' = f(t, y)` with `y ∈ ℝ²`.
#[derive(Debug, Clone)]
pub struct DormandPrince {
    pub rtol: f64,
    pub atol: f64,
    pub h: f64,
    pub h_min: f64,
    pub steps: usize,
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

type State = [f64; 2];

#[inline]
fn axpy(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

impl DormandPrince {
    pub fn new(rtol: f64, atol: f64, h0: f64) -> Self {
        Self {
            rtol,
            atol,
            h: h0,
            h_min: 1e-14,
            steps: 0,
        }
    }

    /// One attempted step of size `h`; returns the new state and the scaled error norm.
    fn attempt<F: Fn(f64, &State) -> State>(&self, f: &F, t: f64, y: &State, h: f64) -> (State, f64) {
        let k1 = f(t, y);
        let k2 = f(t + C2 * h, &axpy(y, &[(A21, &k1)], h));
        let k3 = f(t + C3 * h, &axpy(y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(t + C4 * h, &axpy(y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(
            t + C5 * h,
            &axpy(y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
        );
        let k6 = f(
            t + h,
            &axpy(y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h),
        );
        let y5 = axpy(y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
        let k7 = f(t + h, &y5);
        let mut err = 0.0_f64;
        for i in 0..2 {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.atol + self.rtol * y[i].abs().max(y5[i].abs());
            err = err.max((e / sc).abs());
        }
        (y5, err)
    }

    /// Take one accepted adaptive step not exceeding `t_max`; returns the new `(t, y)`.
    pub fn step<F: Fn(f64, &State) -> State>(&mut self, f: &F, t: f64, y: &State, t_max: f64) -> (f64, State) {
        loop {
            let h = self.h.min(t_max - t);
            let (y_new, err) = self.attempt(f, t, y, h);
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 || h <= self.h_min {
                self.steps += 1;
                if h == self.h || factor < 1.0 {
                    self.h = (h * factor).max(self.h_min);
                }
                return (t + h, y_new);
            }
            self.h = (h * factor).max(self.h_min);
        }
    }

    /// Integrate from `t0` to `t1` exactly.
    pub fn integrate<F: Fn(f64, &State) -> State>(&mut self, f: &F, t0: f64, y0: State, t1: f64) -> State {
        let mut t = t0;
        let mut y = y0;
        while t < t1 {
            let (tn, yn) = self.step(f, t, &y, t1);
            t = if (t1 - tn).abs() <= 1e-14 * t1.abs().max(1.0) { t1 } else { tn };
            y = yn;
        }
        y
    }
}
