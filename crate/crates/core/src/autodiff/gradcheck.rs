//! Central finite-difference gradient checks.

use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;

use super::{AutodiffError, Segments, Tape, Tensor, Var, LEAKY_SLOPE};
use crate::rng::SplitMix64;
use crate::sparse::SparseMatrix;

/// Denominator floor for relative errors, so that entries whose true
/// gradient is ~0 are compared on an absolute scale.
pub const REL_FLOOR: f64 = 1e-6;

pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input, entry)` with the largest error.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    libm::fabs(analytic - numeric) / libm::fmax(libm::fmax(libm::fabs(analytic), libm::fabs(numeric)), REL_FLOOR)
}

/// Compares the tape gradient of the scalar `f(inputs)` against central
/// differences with step `step` on every entry of every input.
pub fn check_gradients<F>(inputs: &[Tensor], step: f64, f: F) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>,
{
    let eval = |values: &[Tensor]| -> Result<f64, AutodiffError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|v| tape.constant(v.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|v| tape.param(v.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    tape.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| tape.grad_or_zero(v)).collect();

    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, checked: 0 };
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (i, grad) in analytic.iter().enumerate() {
        for k in 0..inputs[i].len() {
            let orig = inputs[i].data()[k];
            work[i].data_mut()[k] = orig + step;
            let plus = eval(&work)?;
            work[i].data_mut()[k] = orig - step;
            let minus = eval(&work)?;
            work[i].data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(grad.data()[k], numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = libm::fmax(err, report.max_rel_error);
                report.worst = Some((i, k));
            }
        }
    }
    Ok(report)
}

/// Names of the operations covered by [`check_op`].
pub const OPS: [&str; 24] = [
    "matmul",
    "add",
    "sub",
    "mul",
    "div",
    "scale",
    "scale_by",
    "add_row",
    "scale_rows",
    "concat",
    "row_softmax",
    "relu",
    "leaky_relu",
    "log",
    "exp",
    "sum",
    "mean",
    "row_mean",
    "gather_rows",
    "segment_sum",
    "weighted_segment_sum",
    "segment_softmax",
    "cosine_rows",
    "sparse_left",
];

/// Whether the op has a kink that finite differences may straddle.
pub fn is_piecewise(op: &str) -> bool {
    matches!(op, "relu" | "leaky_relu")
}

fn random_tensor(rng: &mut SplitMix64, rows: usize, cols: usize, low: f64, high: f64) -> Tensor {
    Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.uniform(low, high)).collect()).expect("shape")
}

/// Entries uniform in `[-1, 1]` pushed at least `margin` away from zero.
fn away_from_zero(rng: &mut SplitMix64, rows: usize, cols: usize, margin: f64) -> Tensor {
    let mut t = random_tensor(rng, rows, cols, -1.0, 1.0);
    for v in t.data_mut() {
        if libm::fabs(*v) < margin {
            *v = if *v < 0.0 { -margin } else { margin };
        }
    }
    t
}

fn random_groups(rng: &mut SplitMix64, n_groups: usize, n_rows: usize) -> Vec<Vec<usize>> {
    (0..n_groups)
        .map(|_| {
            let len = 1 + rng.below(4);
            (0..len).map(|_| rng.below(n_rows)).collect()
        })
        .collect()
}

/// Gradient-checks one named op on random inputs (shapes at most 8×8) drawn
/// from `rng`. The op output is reduced to a scalar by a fixed random
/// weighting so every output entry contributes.
pub fn check_op(op: &str, rng: &mut SplitMix64) -> Result<GradCheckReport, AutodiffError> {
    let r = 1 + rng.below(8);
    let c = 1 + rng.below(8);
    let k = 1 + rng.below(8);
    let mut inputs: Vec<Tensor> = Vec::new();
    let reducer_seed = rng.next_u64();

    // builds the op output from the input vars
    type Build = dyn Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>;
    let build: alloc::boxed::Box<Build> = match op {
        "matmul" => {
            inputs.push(random_tensor(rng, r, k, -1.0, 1.0));
            inputs.push(random_tensor(rng, k, c, -1.0, 1.0));
            alloc::boxed::Box::new(|t: &mut Tape, v: &[Var]| t.matmul(v[0], v[1]))
        }
        "add" | "sub" | "mul" => {
            inputs.push(random_tensor(rng, r, c, -1.0, 1.0));
            inputs.push(random_tensor(rng, r, c, -1.0, 1.0));
            match op {
                "add" => alloc::boxed::Box::new(|t: &mut Tape, v: &[Var]| t.add(v[0], v[1])),
                "sub" => alloc::boxed::Box::new(|t: &mut Tape, v: &[Var]| t.sub(v[0], v[1])),
                _ => alloc::boxed::Box::new(|t: &mut Tape, v: &[Var]| t.mul(v[0], v[1])),
            }
        }
        "div" => {
            inputs.push(random_tensor(rng, r, c, -1.0, 1.0));
            inputs.push(random_tensor(rng, r, c, 0.5, 2.0));
            alloc::boxed::Box::new(|t: &mut Tape, v: &[Var]| t.div(v[0], v[1]))
        }
        "scale" => {
            inputs.push(random_tensor(rng, r, c, -1.0, 1.0));
            let f = rng.uniform(-2.0, 2.0);
            alloc::boxed::Box::new(move |t: &mut Tape, v: &[Var]| t.scale(v[0], f))
        }
        "scale_by" => {
            inputs.push(random_tensor(rng, r, c, -1.0, 1.0));
            inputs.push(random_tensor(rng, 1, 1, -2.0, 2.0));
            alloc::boxed::Box::new(|t: &mut Tape, v: &[Var]| t.scale_by(v[0], v[1]))
        }
        "add_row" => {
            inputs.push(random_tensor(rng, r, c, -1.0, 1.0));
            inputs.push(random_tensor(rng, 1, c, -1.0, 1.0));
            alloc::boxed::Box::new(|t: &mut Tape, v: &[Var]| t.add_row(v[0], v[1]))
        }
        "scale_rows" => {
            inputs.push(random_tensor(rng, r, c, -1.0, 1.0));
            let factors: Vec<f64> = (0..r).map(|_| rng.uniform(-2.0, 2.0)).collect();
            alloc::boxed::Box::new(move |t: &mut Tape, v: &[Var]| t.scale_rows(v[0], &factors))
        }
        "concat" => {
            inputs.push(random_tensor(rng, r, c, -1.0, 1.0));
            inputs.push(random_tensor(rng, r, k, -1.0, 1.0));
            alloc::boxed::Box::new(|t: &mut Tape, v: &[Var]| t.concat_cols(&[v[0], v[1], v[0]]))
        }
        "row_softmax" => {
            inputs.push(random_tensor(rng, r, c, -2.0, 2.0));
            alloc::boxed::Box::new(|t: &mut Tape, v: &[Var]| t.row_softmax(v[0]))
        }
        "relu" => {
            inputs.push(away_from_zero(rng, r, c, 1e-2));
            alloc::boxed::Box::new(|t: &mut Tape, v: &[Var]| t.relu(v[0]))
        }
        "leaky_relu" => {
            inputs.push(away_from_zero(rng, r, c, 1e-2));
            alloc::boxed::Box::new(|t: &mut Tape, v: &[Var]| t.leaky_relu(v[0], LEAKY_SLOPE))
        }
        "log" => {
            inputs.push(random_tensor(rng, r, c, 0.2, 3.0));
            alloc::boxed::Box::new(|t: &mut Tape, v: &[Var]| t.log(v[0]))
        }
        "exp" => {
            inputs.push(random_tensor(rng, r, c, -2.0, 2.0));
            alloc::boxed::Box::new(|t: &mut Tape, v: &[Var]| t.exp(v[0]))
        }
        "sum" => {
            inputs.push(random_tensor(rng, r, c, -1.0, 1.0));
            alloc::boxed::Box::new(|t: &mut Tape, v: &[Var]| t.sum(v[0]))
        }
        "mean" => {
            inputs.push(random_tensor(rng, r, c, -1.0, 1.0));
            alloc::boxed::Box::new(|t: &mut Tape, v: &[Var]| t.mean(v[0]))
        }
        "row_mean" => {
            inputs.push(random_tensor(rng, r, c, -1.0, 1.0));
            alloc::boxed::Box::new(|t: &mut Tape, v: &[Var]| t.row_mean(v[0]))
        }
        "gather_rows" => {
            inputs.push(random_tensor(rng, r, c, -1.0, 1.0));
            let idx: Vec<usize> = (0..k).map(|_| rng.below(r)).collect();
            alloc::boxed::Box::new(move |t: &mut Tape, v: &[Var]| t.gather_rows(v[0], &idx))
        }
        "segment_sum" => {
            inputs.push(random_tensor(rng, r, c, -1.0, 1.0));
            let seg = Rc::new(Segments::means(&random_groups(rng, k, r)));
            alloc::boxed::Box::new(move |t: &mut Tape, v: &[Var]| t.segment_sum(v[0], &seg))
        }
        "weighted_segment_sum" => {
            inputs.push(random_tensor(rng, r, c, -1.0, 1.0));
            let seg = Rc::new(Segments::from_groups(&random_groups(rng, k, r)));
            inputs.push(random_tensor(rng, seg.n_entries(), 1, -1.0, 1.0));
            alloc::boxed::Box::new(move |t: &mut Tape, v: &[Var]| t.weighted_segment_sum(v[0], v[1], &seg))
        }
        "segment_softmax" => {
            let seg = Rc::new(Segments::from_groups(&random_groups(rng, k, r)));
            inputs.push(random_tensor(rng, seg.n_entries(), 1, -2.0, 2.0));
            alloc::boxed::Box::new(move |t: &mut Tape, v: &[Var]| t.segment_softmax(v[0], &seg))
        }
        "cosine_rows" => {
            inputs.push(random_tensor(rng, r, c, -1.0, 1.0));
            inputs.push(random_tensor(rng, r, c, -1.0, 1.0));
            alloc::boxed::Box::new(|t: &mut Tape, v: &[Var]| t.cosine_rows(v[0], v[1]))
        }
        "sparse_left" => {
            inputs.push(random_tensor(rng, r, c, -1.0, 1.0));
            let entries: Vec<(usize, usize, f64)> =
                (0..k * 2).map(|_| (rng.below(k), rng.below(r), rng.uniform(-1.0, 1.0))).collect();
            let m = Rc::new(SparseMatrix::from_triplets(k, r, &entries).expect("in range"));
            alloc::boxed::Box::new(move |t: &mut Tape, v: &[Var]| t.sparse_left(&m, v[0]))
        }
        _ => return Err(AutodiffError::Index { op: "check_op", index: 0, len: 0 }),
    };

    check_gradients(&inputs, DEFAULT_STEP, |tape, vars| {
        let out = build(tape, vars)?;
        let (rows, cols) = tape.value(out).shape();
        let mut rr = SplitMix64::new(reducer_seed);
        let weights = Tensor::new(rows, cols, (0..rows * cols).map(|_| rr.uniform(-1.0, 1.0)).collect())?;
        let w = tape.constant(weights);
        let weighted = tape.mul(out, w)?;
        tape.sum(weighted)
    })
}

/// Runs [`check_op`] `trials` times for every op in [`OPS`] and returns the
/// worst relative error per op.
pub fn op_suite(seed: u64, trials: usize) -> Result<Vec<(&'static str, f64)>, AutodiffError> {
    let mut rng = SplitMix64::new(seed);
    let mut out = vec![];
    for op in OPS {
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            worst = libm::fmax(worst, check_op(op, &mut rng)?.max_rel_error);
        }
        out.push((op, worst));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_op_passes_gradcheck() {
        for (op, err) in op_suite(11, 10).unwrap() {
            let tol = if is_piecewise(op) { 1e-3 } else { 1e-4 };
            assert!(err < tol, "{op}: {err}");
        }
    }

    #[test]
    fn relu_matmul_composition() {
        let mut rng = SplitMix64::new(5);
        let w = random_tensor(&mut rng, 4, 3, -1.0, 1.0);
        let x = random_tensor(&mut rng, 3, 2, -1.0, 1.0);
        let report = check_gradients(&[w, x], DEFAULT_STEP, |t, v| {
            let y = t.matmul(v[0], v[1])?;
            let r = t.relu(y)?;
            t.sum(r)
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
        assert_eq!(report.checked, 12 + 6);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // exp of a constant-shifted input, but the check is fed a function
        // whose tape gradient differs from its value: scale by 2 on the tape,
        // while the value is doubled only through the analytic path.
        let report = check_gradients(&[Tensor::scalar(0.7)], DEFAULT_STEP, |t, v| {
            let y = t.mul(v[0], v[0])?;
            if t.requires_grad(v[0]) {
                t.scale(y, 2.0)
            } else {
                Ok(y)
            }
        })
        .unwrap();
        assert!(report.max_rel_error > 0.4);
    }
}
