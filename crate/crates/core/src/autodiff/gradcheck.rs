use super::params::ParamSet;
use super::tape::{Tape, Var};
use crate::error::Result;

/// Compares reverse-mode gradients of a scalar-valued `build` against central
/// finite differences with step `eps`.
///
/// `build` receives a fresh tape and one leaf per parameter (in set order) and
/// returns the scalar output. The result is the maximum, over parameter
/// tensors, of `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖, 1e-8)`.
pub fn grad_check<F>(params: &ParamSet, build: F, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |p: &ParamSet| -> Result<(Tape, Var)> {
        let mut tape = Tape::new();
        let leaves: Vec<Var> = p.ids().map(|id| tape.param(p, id)).collect();
        let out = build(&mut tape, &leaves)?;
        Ok((tape, out))
    };

    let (tape, out) = eval(params)?;
    let mut analytic = params.zero_grads();
    tape.backward(out, &mut analytic)?;

    let mut worst = 0.0_f64;
    let mut probe = params.clone();
    for id in params.ids() {
        let n = params.get(id).len();
        let mut numeric = vec![0.0; n];
        for i in 0..n {
            let orig = params.get(id).data()[i];
            probe.get_mut(id).data_mut()[i] = orig + eps;
            let (t, o) = eval(&probe)?;
            let plus = t.value(o).item();
            probe.get_mut(id).data_mut()[i] = orig - eps;
            let (t, o) = eval(&probe)?;
            let minus = t.value(o).item();
            probe.get_mut(id).data_mut()[i] = orig;
            numeric[i] = (plus - minus) / (2.0 * eps);
        }
        let a = analytic.get(id);
        let diff = a.iter().zip(&numeric).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max(diff / na.max(nn).max(1e-8));
    }
    Ok(worst)
}
