//! Central finite-difference gradient checking.

use super::param::{ParamId, ParamStore};
use super::tape::{NodeId, Tape};
use super::GradError;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub entries_checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares analytic gradients of the scalar built by `build` against
/// central differences for every entry of every parameter in `store`.
pub fn finite_diff_check<F, E>(store: &mut ParamStore, h: f64, build: F) -> Result<GradCheckReport, E>
where
    F: FnMut(&mut Tape) -> Result<NodeId, E>,
    E: From<GradError>,
{
    let ids: Vec<ParamId> = store.ids().collect();
    finite_diff_check_subset(store, &ids, h, build)
}

/// Same as [`finite_diff_check`] restricted to `ids`.
pub fn finite_diff_check_subset<F, E>(
    store: &mut ParamStore,
    ids: &[ParamId],
    h: f64,
    mut build: F,
) -> Result<GradCheckReport, E>
where
    F: FnMut(&mut Tape) -> Result<NodeId, E>,
    E: From<GradError>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let analytic = {
        let mut tape = Tape::new(store);
        let loss = build(&mut tape)?;
        tape.backward(loss).map_err(E::from)?
    };
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        entries_checked: 0,
    };
    for &id in ids {
        let n = store.get(id).value.len();
        for k in 0..n {
            let orig = store.get(id).value.data()[k];
            let plus = (orig as f64 + h) as f32;
            let minus = (orig as f64 - h) as f32;
            store.get_mut(id).value.data_mut()[k] = plus;
            let f_plus = eval_scalar(store, &mut build);
            store.get_mut(id).value.data_mut()[k] = minus;
            let f_minus = eval_scalar(store, &mut build);
            store.get_mut(id).value.data_mut()[k] = orig;
            let (f_plus, f_minus) = (f_plus?, f_minus?);
            if !f_plus.is_finite() || !f_minus.is_finite() {
                return Err(GradError::NonFinite { param: store.get(id).name.clone(), index: k }.into());
            }
            let numeric = (f_plus - f_minus) / (plus as f64 - minus as f64);
            let a = analytic.get(id).map_or(0.0, |g| g.data[k]);
            let err = relative_error(a, numeric);
            report.entries_checked += 1;
            if err > report.max_rel_err || report.worst_param.is_empty() {
                report.max_rel_err = err;
                report.worst_param = store.get(id).name.clone();
                report.worst_index = k;
                report.analytic_at_worst = a;
                report.numeric_at_worst = numeric;
            }
        }
    }
    Ok(report)
}

fn eval_scalar<F, E>(store: &ParamStore, build: &mut F) -> Result<f64, E>
where
    F: FnMut(&mut Tape) -> Result<NodeId, E>,
    E: From<GradError>,
{
    let mut tape = Tape::new(store);
    let loss = build(&mut tape)?;
    Ok(tape.scalar(loss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad::Tensor;

    #[test]
    fn square_at_three() {
        let mut s = ParamStore::new();
        let x = s.add("x", Tensor::scalar(3.0)).unwrap();
        let report = finite_diff_check(&mut s, 1e-4, |t| -> Result<_, GradError> {
            let n = t.param(x);
            let sq = t.mul(n, n)?;
            t.reduce_sum(sq)
        })
        .unwrap();
        assert!((report.analytic_at_worst - 6.0).abs() < 1e-12);
        assert!(report.max_rel_err < 1e-8, "{report:?}");
    }

    #[test]
    fn constant_function_has_zero_error() {
        let mut s = ParamStore::new();
        s.add("x", Tensor::row(vec![1.0, -2.0])).unwrap();
        let report = finite_diff_check(&mut s, 1e-3, |t| Ok::<_, GradError>(t.constant(1, 1, 4.2))).unwrap();
        assert_eq!(report.max_rel_err, 0.0);
        assert_eq!(report.entries_checked, 2);
    }

    #[test]
    fn non_finite_evaluation_names_parameter() {
        let mut s = ParamStore::new();
        let x = s.add("blowup", Tensor::scalar(0.0)).unwrap();
        let err = finite_diff_check(&mut s, 1e-3, |t| -> Result<_, GradError> {
            let n = t.param(x);
            let l = t.log(n)?;
            t.reduce_sum(l)
        });
        // log of a negative perturbation is NaN
        match err {
            Err(GradError::NonFinite { param, .. }) => assert_eq!(param, "blowup"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
