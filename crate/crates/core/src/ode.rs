//! Dormand–Prince 5(4) integrator with a state-admissibility hook.
//!
//! A step whose stages or endpoint leave the admissible set is rejected and
//! the step size halved, independently of the error controller.

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
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
// Fifth-order weights equal the last row of A (FSAL); these are the
// differences between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5Options {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; `None` picks one from `|y| / |f(y)|`.
    pub h0: Option<f64>,
    /// Give up once admissibility rejections drive the step below this.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Dopri5Options {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-12,
            h0: None,
            h_min: 1e-12,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Halt {
    /// Reached `t_end`.
    Finished,
    /// The observer asked to stop.
    Stopped,
    /// Step size fell below `h_min` while rejecting inadmissible states.
    StepUnderflow {
        t: f64,
    },
    MaxSteps {
        t: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integration {
    pub t: f64,
    pub y: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
    pub halt: Halt,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Integrates `y' = f(y)` from `t = 0` to `t_end`.
///
/// `f` returns `None` at inadmissible states. `observe` sees every accepted
/// step and returns `false` to stop.
pub fn integrate<F, O>(mut f: F, y0: &[f64], t_end: f64, opts: &Dopri5Options, mut observe: O) -> Option<Integration>
where
    F: FnMut(&[f64]) -> Option<Vec<f64>>,
    O: FnMut(f64, &[f64]) -> bool,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut k0 = f(&y)?;
    let mut h = opts.h0.unwrap_or_else(|| {
        let (d0, d1) = (sup(&y), sup(&k0));
        if d0 > 1e-5 && d1 > 1e-5 {
            0.01 * d0 / d1
        } else {
            1e-6
        }
    });
    let mut accepted = 0;
    let mut rejected = 0;
    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    if !observe(t, &y) {
        return Some(Integration {
            t,
            y,
            accepted,
            rejected,
            halt: Halt::Stopped,
        });
    }
    while t < t_end {
        if accepted + rejected >= opts.max_steps {
            return Some(Integration {
                t,
                y,
                accepted,
                rejected,
                halt: Halt::MaxSteps { t },
            });
        }
        h = h.min(t_end - t);
        k[0].copy_from_slice(&k0);
        let mut admissible = true;
        for s in 1..7 {
            for j in 0..n {
                stage[j] = y[j] + h * (0..s).map(|r| A[s][r] * k[r][j]).sum::<f64>();
            }
            match f(&stage) {
                Some(v) => k[s] = v,
                None => {
                    admissible = false;
                    break;
                }
            }
        }
        if !admissible {
            rejected += 1;
            h *= 0.5;
            if h < opts.h_min {
                return Some(Integration {
                    t,
                    y,
                    accepted,
                    rejected,
                    halt: Halt::StepUnderflow { t },
                });
            }
            continue;
        }
        // Stage 6 is evaluated at the fifth-order solution.
        let y_new = stage.clone();
        let scale = opts.atol + opts.rtol * sup(&y).max(sup(&y_new));
        let err = (0..n)
            .map(|j| (h * (0..7).map(|s| E[s] * k[s][j]).sum::<f64>()).abs())
            .fold(0.0_f64, f64::max)
            / scale;
        if err <= 1.0 {
            t += h;
            y = y_new;
            k0 = k[6].clone();
            accepted += 1;
            let grow = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= grow;
            if !observe(t, &y) {
                return Some(Integration {
                    t,
                    y,
                    accepted,
                    rejected,
                    halt: Halt::Stopped,
                });
            }
        } else {
            rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    Some(Integration {
        t,
        y,
        accepted,
        rejected,
        halt: Halt::Finished,
    })
}
