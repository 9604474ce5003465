//! Central finite-difference gradient checking.

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Worst disagreement found by [`check`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    /// `(input index, element index, analytic, numeric)` of the worst element.
    pub worst: Option<(usize, usize, f64, f64)>,
    pub checked: usize,
    pub passed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub step: f64,
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            step: 1e-4,
            rel: 1e-4,
            abs: 1e-6,
        }
    }
}

/// Compare the analytic gradient of the scalar `f(inputs)` against central differences.
///
/// An element passes when `|analytic - numeric| <= abs + rel * max(|analytic|, |numeric|)`.
/// `f` is re-run for every perturbed element, so it must be deterministic and must not
/// carry state between calls.
pub fn check<F>(f: F, inputs: &[Tensor<f64>], tol: Tolerance) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut graph = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| graph.leaf(t.clone(), true)).collect();
    let loss = f(&mut graph, &vars)?;
    graph.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| graph.grad(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()]))
        .collect();

    let eval = |perturbed: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vs: Vec<Var> = perturbed.iter().map(|t| g.leaf(t.clone(), false)).collect();
        let l = f(&mut g, &vs)?;
        Ok(g.value(l).item())
    };

    let mut report = GradCheckReport {
        max_abs_err: 0.0,
        max_rel_err: 0.0,
        worst: None,
        checked: 0,
        passed: true,
    };
    let mut worst_excess = f64::NEG_INFINITY;
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    for (ti, input) in inputs.iter().enumerate() {
        for ei in 0..input.len() {
            let orig = input.data()[ei];
            work[ti].data_mut()[ei] = orig + tol.step;
            let plus = eval(&work)?;
            work[ti].data_mut()[ei] = orig - tol.step;
            let minus = eval(&work)?;
            work[ti].data_mut()[ei] = orig;

            let numeric = (plus - minus) / (2.0 * tol.step);
            let a = analytic[ti][ei];
            let abs_err = (a - numeric).abs();
            let scale = a.abs().max(numeric.abs());
            let rel_err = if scale > 0.0 { abs_err / scale } else { 0.0 };
            report.max_abs_err = report.max_abs_err.max(abs_err);
            report.max_rel_err = report.max_rel_err.max(rel_err);
            let excess = abs_err - (tol.abs + tol.rel * scale);
            if excess > 0.0 {
                report.passed = false;
            }
            if excess > worst_excess {
                worst_excess = excess;
                report.worst = Some((ti, ei, a, numeric));
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
