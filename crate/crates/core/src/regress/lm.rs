//! Levenberg–Marquardt for small dense least-squares problems.

use crate::error::{Error, Result};

/// A sum-of-squares objective over a flat parameter vector.
pub(crate) trait LeastSquares {
    fn n_params(&self) -> usize;

    /// Sum of squared residuals at `theta`.
    fn loss(&self, theta: &[f64]) -> f64;

    /// Overwrite `jtj` (row-major `P×P`) and `jtr` with `JᵀJ` and `Jᵀr` at `theta`, and
    /// return the sum of squared residuals.
    fn normal_equations(&self, theta: &[f64], jtj: &mut [f64], jtr: &mut [f64]) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmSettings {
    pub lambda0: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub factor: f64,
    pub max_iters: usize,
    /// Stop when the relative loss decrease over this many iterations is below `rel_tol`.
    pub window: usize,
    pub rel_tol: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        LmSettings {
            lambda0: 1e-2,
            lambda_min: 1e-12,
            lambda_max: 1e12,
            factor: 10.0,
            max_iters: 200,
            window: 5,
            rel_tol: 1e-7,
        }
    }
}

/// Damping and per-iteration history of one run. `losses[0]` is the initial loss and
/// `losses[t]` the loss held after iteration `t`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LmState {
    pub lambda: f64,
    pub losses: Vec<f64>,
    pub accepted: Vec<bool>,
    pub lambdas: Vec<f64>,
}

impl LmState {
    pub fn iterations(&self) -> usize {
        self.accepted.len()
    }

    pub fn initial_loss(&self) -> f64 {
        self.losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("history starts with the initial loss")
    }
}

pub(crate) fn minimize(problem: &impl LeastSquares, theta: &mut [f64], settings: &LmSettings) -> Result<LmState> {
    let p = problem.n_params();
    let mut jtj = vec![0.0; p * p];
    let mut jtr = vec![0.0; p];
    let mut loss = problem.normal_equations(theta, &mut jtj, &mut jtr);
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { what: "lm", step: 0 });
    }
    let mut state = LmState {
        lambda: settings.lambda0,
        losses: vec![loss],
        ..LmState::default()
    };
    let mut a = vec![0.0; p * p];
    let mut delta = vec![0.0; p];
    let mut cand = vec![0.0; p];
    for _ in 0..settings.max_iters {
        if loss == 0.0 {
            break;
        }
        // Marquardt scaling; a floor keeps columns with no curvature solvable.
        let trace: f64 = (0..p).map(|i| jtj[i * p + i]).sum();
        let floor = (trace / p as f64 * 1e-12).max(f64::MIN_POSITIVE);
        a.copy_from_slice(&jtj);
        for i in 0..p {
            a[i * p + i] += state.lambda * jtj[i * p + i].max(floor);
        }
        let mut accepted = false;
        if cholesky_solve(&mut a, &jtr, &mut delta, p) {
            for i in 0..p {
                cand[i] = theta[i] - delta[i];
            }
            let l = problem.loss(&cand);
            if l.is_finite() && l < loss {
                theta.copy_from_slice(&cand);
                loss = problem.normal_equations(theta, &mut jtj, &mut jtr);
                accepted = true;
            }
        }
        state.lambda = if accepted {
            (state.lambda / settings.factor).max(settings.lambda_min)
        } else {
            (state.lambda * settings.factor).min(settings.lambda_max)
        };
        state.accepted.push(accepted);
        state.lambdas.push(state.lambda);
        state.losses.push(loss);
        let t = state.losses.len() - 1;
        if t >= settings.window {
            let old = state.losses[t - settings.window];
            if old > 0.0 && (old - loss) / old < settings.rel_tol {
                break;
            }
        }
    }
    Ok(state)
}

/// Solve `A x = b` for symmetric positive definite `A` (overwritten by its factor).
/// Returns false if `A` is not numerically positive definite.
fn cholesky_solve(a: &mut [f64], b: &[f64], x: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * x[k];
        }
        x[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= a[k * n + i] * x[k];
        }
        x[i] = s / a[i * n + i];
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exponential decay `y = a·exp(-k·t)`.
    struct Decay {
        t: Vec<f64>,
        y: Vec<f64>,
    }

    impl Decay {
        fn residual(&self, th: &[f64], i: usize) -> (f64, [f64; 2]) {
            let e = (-th[1] * self.t[i]).exp();
            (th[0] * e - self.y[i], [e, -th[0] * self.t[i] * e])
        }
    }

    impl LeastSquares for Decay {
        fn n_params(&self) -> usize {
            2
        }

        fn loss(&self, th: &[f64]) -> f64 {
            (0..self.t.len()).map(|i| self.residual(th, i).0.powi(2)).sum()
        }

        fn normal_equations(&self, th: &[f64], jtj: &mut [f64], jtr: &mut [f64]) -> f64 {
            jtj.fill(0.0);
            jtr.fill(0.0);
            let mut l = 0.0;
            for i in 0..self.t.len() {
                let (r, j) = self.residual(th, i);
                l += r * r;
                for a in 0..2 {
                    jtr[a] += j[a] * r;
                    for b in 0..2 {
                        jtj[a * 2 + b] += j[a] * j[b];
                    }
                }
            }
            l
        }
    }

    #[test]
    fn recovers_decay_parameters() {
        let t: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let y = t.iter().map(|t| 3.0 * (-1.5 * t).exp()).collect();
        let prob = Decay { t, y };
        let mut th = [1.0, 0.2];
        let st = minimize(&prob, &mut th, &LmSettings::default()).unwrap();
        assert!((th[0] - 3.0).abs() < 1e-6 && (th[1] - 1.5).abs() < 1e-6, "{th:?}");
        assert!(st.losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn cholesky_matches_known_solution() {
        let mut a = [4.0, 2.0, 2.0, 3.0];
        let mut x = [0.0; 2];
        assert!(cholesky_solve(&mut a, &[2.0, 1.0], &mut x, 2));
        assert!((x[0] - 0.5).abs() < 1e-15 && x[1].abs() < 1e-15);
        let mut singular = [1.0, 1.0, 1.0, 1.0];
        assert!(!cholesky_solve(&mut singular, &[1.0, 1.0], &mut x, 2));
    }
}
