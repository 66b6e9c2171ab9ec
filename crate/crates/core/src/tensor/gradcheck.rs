use super::dense::Tensor;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Compares the tape gradient of a scalar function against central
/// differences.
///
/// Returns the largest `|analytic - numeric| / max(1, |analytic|, |numeric|)`
/// over all coordinates of `x`. The function is rebuilt on a fresh tape for
/// every evaluation, so any randomness inside it must be reseeded per call.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::invalid(format!("grad_check eps {eps} outside [1e-7, 1e-3]")));
    }
    let eval = |point: &Tensor| -> Result<(Tape, Var, Var)> {
        let mut tape = Tape::new();
        let input = tape.leaf(point.clone());
        let out = f(&mut tape, input)?;
        if !tape.value(out).is_scalar() {
            return Err(Error::invalid(format!(
                "grad_check needs a scalar function, got shape {:?}",
                tape.value(out).shape()
            )));
        }
        Ok((tape, input, out))
    };

    let (tape, input, out) = eval(x)?;
    let analytic = tape.backward(out)?.wrt(input, x);

    let mut worst = 0.0f64;
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let (t_plus, _, o_plus) = eval(&probe)?;
        let f_plus = t_plus.value(o_plus).item();
        probe.data_mut()[i] = orig - eps;
        let (t_minus, _, o_minus) = eval(&probe)?;
        let f_minus = t_minus.value(o_minus).item();
        probe.data_mut()[i] = orig;

        let numeric = (f_plus - f_minus) / (2.0 * eps);
        let a = analytic.data()[i];
        let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
        worst = worst.max(err);
    }
    Ok(worst)
}
