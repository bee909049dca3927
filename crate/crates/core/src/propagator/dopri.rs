//! Dormand–Prince 5(4) with the standard fourth-order continuous extension.

use super::PropagatorError;

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// b - b_hat
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Absolute and relative local error tolerances.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-9,
            atol: 1e-12,
        }
    }
}

/// One accepted step's interpolation data.
#[derive(Debug, Clone)]
pub struct DenseSegment {
    pub t: f64,
    pub h: f64,
    r: [Vec<f64>; 5],
}

impl DenseSegment {
    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.h >= 0.0 {
            (self.t, self.t + self.h)
        } else {
            (self.t + self.h, self.t)
        };
        t >= lo && t <= hi
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let s = (t - self.t) / self.h;
        let s1 = 1.0 - s;
        let [r0, r1, r2, r3, r4] = &self.r;
        for i in 0..out.len() {
            out[i] = r0[i] + s * (r1[i] + s1 * (r2[i] + s * (r3[i] + s1 * r4[i])));
        }
    }
}

pub(crate) struct Options<'h> {
    pub dense: bool,
    pub max_step: f64,
    pub max_steps: usize,
    /// Called after every accepted step; returns `true` if it modified the state.
    pub hook: Option<&'h mut dyn FnMut(f64, &mut [f64]) -> Result<bool, PropagatorError>>,
}

impl Default for Options<'_> {
    fn default() -> Self {
        Options {
            dense: false,
            max_step: f64::INFINITY,
            max_steps: 1_000_000,
            hook: None,
        }
    }
}

pub(crate) struct Outcome {
    pub y: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
    pub segments: Vec<DenseSegment>,
}

fn weighted_rms(v: &[f64], scale: &[f64]) -> f64 {
    let n = v.len().max(1) as f64;
    (v.iter().zip(scale).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n).sqrt()
}

pub(crate) fn integrate<F>(
    mut rhs: F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    tol: Tolerances,
    mut opts: Options<'_>,
) -> Result<Outcome, PropagatorError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), PropagatorError>,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut out = Outcome {
        y: Vec::new(),
        accepted: 0,
        rejected: 0,
        segments: Vec::new(),
    };
    if t0 == t1 || n == 0 {
        out.y = y;
        return Ok(out);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut scale = vec![0.0; n];

    rhs(t0, &y, &mut k[0])?;

    // initial step (Hairer & Wanner, II.4)
    for i in 0..n {
        scale[i] = tol.atol + tol.rtol * y[i].abs();
    }
    let d0 = weighted_rms(&y, &scale);
    let d1 = weighted_rms(&k[0], &scale);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(span).min(opts.max_step);
    for i in 0..n {
        ytmp[i] = y[i] + dir * h0 * k[0][i];
    }
    rhs(t0 + dir * h0, &ytmp, &mut k[1])?;
    for i in 0..n {
        err[i] = k[1][i] - k[0][i];
    }
    let d2 = weighted_rms(&err, &scale) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    let mut h = (100.0 * h0).min(h1).min(span).min(opts.max_step);

    let mut t = t0;
    let mut last_reject = false;
    let mut steps = 0usize;
    while (t1 - t) * dir > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(PropagatorError::TooManySteps { t });
        }
        let remaining = (t1 - t).abs();
        if h >= remaining || remaining - h < 1e-12 * remaining.max(1.0) {
            h = remaining;
        } else if h < 1e-14 * t.abs().max(1.0) {
            return Err(PropagatorError::StepSizeUnderflow { t });
        }
        let hs = dir * h;

        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                ytmp[i] = y[i] + hs * acc;
            }
            rhs(t + C[s] * hs, &ytmp, &mut k[s])?;
        }
        // stage 7 evaluated at the 5th-order solution (FSAL)
        ynew.copy_from_slice(&ytmp);
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc += E[j] * kj[i];
            }
            err[i] = hs * acc;
            scale[i] = tol.atol + tol.rtol * y[i].abs().max(ynew[i].abs());
        }
        let e = weighted_rms(&err, &scale);
        if !e.is_finite() {
            out.rejected += 1;
            h *= 0.2;
            last_reject = true;
            continue;
        }
        if e <= 1.0 {
            if opts.dense {
                let mut r: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
                for i in 0..n {
                    let ydiff = ynew[i] - y[i];
                    let bspl = hs * k[0][i] - ydiff;
                    r[0][i] = y[i];
                    r[1][i] = ydiff;
                    r[2][i] = bspl;
                    r[3][i] = ydiff - hs * k[6][i] - bspl;
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate() {
                        acc += D[j] * kj[i];
                    }
                    r[4][i] = hs * acc;
                }
                out.segments.push(DenseSegment { t, h: hs, r });
            }
            t = if h == remaining { t1 } else { t + hs };
            y.copy_from_slice(&ynew);
            let fsal = k[6].clone();
            k[0].copy_from_slice(&fsal);
            out.accepted += 1;
            if let Some(hook) = opts.hook.as_mut() {
                if hook(t, &mut y)? {
                    rhs(t, &y, &mut k[0])?;
                }
            }
            let mut fac = 0.9 * e.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_reject {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(opts.max_step);
            last_reject = false;
        } else {
            out.rejected += 1;
            let fac = (0.9 * e.powf(-0.2)).max(0.2);
            h *= fac;
            last_reject = true;
        }
    }
    out.y = y;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let out = integrate(
            |_, y, dy| {
                dy[0] = -y[0];
                Ok(())
            },
            0.0,
            1.0,
            &[1.0],
            Tolerances::default(),
            Options::default(),
        )
        .unwrap();
        assert!((out.y[0] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn backward_and_dense() {
        let out = integrate(
            |t, _, dy| {
                dy[0] = t.cos();
                Ok(())
            },
            2.0,
            -1.0,
            &[2.0f64.sin()],
            Tolerances::default(),
            Options {
                dense: true,
                ..Options::default()
            },
        )
        .unwrap();
        assert!((out.y[0] - (-1.0f64).sin()).abs() < 1e-9);
        let mut v = [0.0];
        for seg in &out.segments {
            let tm = seg.t + 0.37 * seg.h;
            seg.eval(tm, &mut v);
            assert!((v[0] - tm.sin()).abs() < 1e-8, "{tm}");
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let r = integrate(
            |_, y, dy| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            0.0,
            2.0,
            &[1.0],
            Tolerances::default(),
            Options::default(),
        );
        match r {
            Err(PropagatorError::StepSizeUnderflow { t }) | Err(PropagatorError::TooManySteps { t }) => {
                assert!(t > 0.9 && t <= 1.0, "{t}")
            }
            other => panic!("expected failure, got {:?}", other.map(|o| o.y)),
        }
    }
}
