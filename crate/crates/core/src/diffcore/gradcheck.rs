use crate::error::Result;
use crate::real::Real;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};

/// Settings for [`gradient_check`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Lower bound on the relative-error denominator, multiplied by
    /// `max(1, |loss|)`. Entries far below the resolution of the central
    /// difference (about `eps |loss| / step`) are thus compared in absolute
    /// terms.
    pub floor: f64,
    /// Maximum number of entries checked per parameter (evenly strided).
    pub max_entries_per_param: usize,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            floor: 1e-6,
            max_entries_per_param: usize::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub entries_checked: usize,
}

/// Relative error `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares tape gradients of `loss` against central finite differences for
/// every parameter in `store`.
///
/// `loss` must build a fresh scalar loss on the given tape from the given
/// store, and must be deterministic (freeze any sampling noise).
pub fn gradient_check<T, F>(
    store: &mut ParamStore<T>,
    mut loss: F,
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    T: Real,
    F: FnMut(&mut Tape<T>, &ParamStore<T>) -> Result<Var>,
{
    let mut tape = Tape::new();
    let out = loss(&mut tape, store)?;
    let floor = opts.floor * tape.scalar(out).as_f64().abs().max(1.0);
    let grads = tape.backward(out)?;
    let mut analytic: Vec<Vec<f64>> = store
        .iter()
        .map(|p| vec![0.0; p.value().len()])
        .collect();
    for (id, g) in tape.param_grads(&grads) {
        analytic[id.index()] = g.iter().map(|v| v.as_f64()).collect();
    }

    let mut eval = |store: &ParamStore<T>| -> Result<f64> {
        let mut t = Tape::new();
        let v = loss(&mut t, store)?;
        Ok(t.scalar(v).as_f64())
    };

    let h = T::lit(opts.step);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        entries_checked: 0,
    };
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        let n = store.get(id).value().len();
        let stride = n.div_ceil(opts.max_entries_per_param.max(1)).max(1);
        for k in (0..n).step_by(stride) {
            let orig = store.get(id).value()[k];
            store.get_mut(id).value_mut()[k] = orig + h;
            let plus = eval(store)?;
            store.get_mut(id).value_mut()[k] = orig - h;
            let minus = eval(store)?;
            store.get_mut(id).value_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let err = relative_error(analytic[id.index()][k], numeric, floor);
            report.entries_checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((store.get(id).name().to_string(), k));
            }
        }
    }
    Ok(report)
}
