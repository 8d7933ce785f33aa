//! Central finite-difference comparison against tape gradients.

use super::{GradFault, Tape, Tensor, TensorError, Var};

/// Step used for the central differences.
pub const DEFAULT_STEP: f64 = 1e-5;
/// Largest accepted relative error.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Magnitudes below this are compared absolutely, so coordinates with a
/// vanishing gradient do not blow up the relative error.
const REL_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordCheck {
    pub param: usize,
    pub element: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares the gradient of `build` with respect to `params` at the given
/// `(param, element)` coordinates. `build` must return a scalar loss and use
/// the supplied `Var`s, which are the parameters in order. The analytic pass
/// runs on a tape carrying `fault`; numeric passes never do.
pub fn check_coordinates<F>(
    params: &[Tensor<f64>],
    build: F,
    coords: &[(usize, usize)],
    step: f64,
    fault: Option<GradFault>,
) -> Result<Vec<CoordCheck>, TensorError>
where
    F: for<'a> Fn(&mut Tape<'a, f64>, &[Var]) -> Result<Var, TensorError>,
{
    let analytic = {
        let mut tape = match fault {
            Some(f) => Tape::with_fault(f),
            None => Tape::new(),
        };
        let vars: Vec<Var> = params.iter().map(|p| tape.param(p)).collect();
        let loss = build(&mut tape, &vars)?;
        let grads = tape.backward(loss)?;
        vars.iter()
            .zip(params)
            .map(|(&v, p)| grads.get_or_zeros(v, p.shape()))
            .collect::<Vec<_>>()
    };

    let eval = |ps: &[Tensor<f64>]| -> Result<f64, TensorError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.param(p)).collect();
        let loss = build(&mut tape, &vars)?;
        Ok(tape.value(loss).item())
    };

    let mut work = params.to_vec();
    let mut out = Vec::with_capacity(coords.len());
    for &(pi, ei) in coords {
        let orig = work[pi].data()[ei];
        work[pi].data_mut()[ei] = orig + step;
        let plus = eval(&work)?;
        work[pi].data_mut()[ei] = orig - step;
        let minus = eval(&work)?;
        work[pi].data_mut()[ei] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic[pi].data()[ei];
        out.push(CoordCheck {
            param: pi,
            element: ei,
            analytic: a,
            numeric,
            rel_error: relative_error(a, numeric),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mlp_params() -> Vec<Tensor<f64>> {
        vec![
            Tensor::from_f64(&[2, 3], &[0.3, -0.5, 0.8, 0.1, 0.7, -0.2]).unwrap(),
            Tensor::from_f64(&[3], &[0.05, -0.1, 0.2]).unwrap(),
            Tensor::from_f64(&[3, 4], &[0.4, -0.3, 0.2, 0.1, -0.6, 0.5, 0.3, -0.2, 0.7, 0.1, -0.4, 0.2]).unwrap(),
        ]
    }

    fn mlp_logprob(tape: &mut Tape<'_, f64>, p: &[Var]) -> Result<Var, TensorError> {
        let x = tape.constant(Tensor::from_f64(&[2, 2], &[0.5, -1.0, 1.5, 0.25])?);
        let h = tape.matmul(x, p[0])?;
        let h = tape.add(h, p[1])?;
        let h = tape.tanh(h);
        let logits = tape.matmul(h, p[2])?;
        let lp = tape.log_softmax(logits);
        let picked = tape.pick(lp, &[1, 3])?;
        Ok(tape.mean(picked))
    }

    fn all_coords(params: &[Tensor<f64>]) -> Vec<(usize, usize)> {
        params
            .iter()
            .enumerate()
            .flat_map(|(i, p)| (0..p.numel()).map(move |e| (i, e)))
            .collect()
    }

    #[test]
    fn healthy_mlp_passes() {
        let params = mlp_params();
        let checks = check_coordinates(&params, mlp_logprob, &all_coords(&params), DEFAULT_STEP, None).unwrap();
        for c in checks {
            assert!(c.rel_error < DEFAULT_TOLERANCE, "{c:?}");
        }
    }

    #[test]
    fn corrupted_tanh_is_caught() {
        let params = mlp_params();
        let checks = check_coordinates(
            &params,
            mlp_logprob,
            &all_coords(&params),
            DEFAULT_STEP,
            Some(GradFault::TanhDerivative),
        )
        .unwrap();
        assert!(checks.iter().any(|c| c.rel_error > DEFAULT_TOLERANCE));
    }

    #[test]
    fn elementwise_ops_pass() {
        let params = vec![
            Tensor::from_f64(&[4], &[0.3, 1.2, 0.7, 2.0]).unwrap(),
            Tensor::from_f64(&[4], &[0.9, 0.4, 1.1, 0.6]).unwrap(),
        ];
        let build = |tape: &mut Tape<'_, f64>, p: &[Var]| -> Result<Var, TensorError> {
            let s = tape.sigmoid(p[0]);
            let e = tape.exp(p[1]);
            let l = tape.log(p[0])?;
            let r = tape.relu(p[1]);
            let prod = tape.mul(s, e)?;
            let d = tape.sub(prod, l)?;
            let m = tape.minimum(d, r)?;
            let c = tape.clip_by_value(m, -0.5, 2.5);
            let sm = tape.softmax(c);
            let cat = tape.concat(&[sm, r], 0)?;
            let sl = tape.slice(cat, 0, 2, 4)?;
            let sq = tape.mul(sl, sl)?;
            Ok(tape.sum(sq))
        };
        let checks = check_coordinates(&params, build, &all_coords(&params), DEFAULT_STEP, None).unwrap();
        for c in checks {
            assert!(c.rel_error < DEFAULT_TOLERANCE, "{c:?}");
        }
    }
}
