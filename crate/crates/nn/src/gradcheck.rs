use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{NnError, ParameterStore, Tape, Var};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const MAX_COORDINATES: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub coordinates_checked: usize,
    /// (parameter, flat index, analytic, numeric) of the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
}

/// Compare tape gradients with central differences on up to
/// `MAX_COORDINATES` trainable coordinates (sampled with `seed` when there
/// are more). Relative error is `|a − n| / max(1e-8, |a| + |n|)`.
pub fn grad_check<F>(store: &ParameterStore, eps: f64, seed: u64, f: F) -> Result<GradCheckReport, NnError>
where
    F: Fn(&mut Tape, &ParameterStore) -> Result<Var, NnError>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    let analytic = tape.backward(loss)?;
    drop(tape);

    let coords: Vec<(String, usize)> = store
        .iter()
        .filter(|(_, e)| e.trainable)
        .flat_map(|(name, e)| (0..e.value.len()).map(move |i| (name.to_string(), i)))
        .collect();
    let chosen: Vec<usize> = if coords.len() <= MAX_COORDINATES {
        (0..coords.len()).collect()
    } else {
        let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), coords.len(), MAX_COORDINATES).into_vec();
        idx.sort_unstable();
        idx
    };

    let eval = |s: &ParameterStore| -> Result<f64, NnError> {
        let mut t = Tape::new();
        let v = f(&mut t, s)?;
        let value = t.value(v).item();
        if value.is_finite() {
            Ok(value)
        } else {
            Err(NnError::NonFinite { op: "grad_check" })
        }
    };

    let mut probe = store.clone();
    let mut report = GradCheckReport { max_relative_error: 0.0, coordinates_checked: 0, worst: None };
    for k in chosen {
        let (name, i) = &coords[k];
        let original = probe.value(name)?.data()[*i];
        probe.entry_mut(name)?.value.data_mut()[*i] = original + eps;
        let plus = eval(&probe)?;
        probe.entry_mut(name)?.value.data_mut()[*i] = original - eps;
        let minus = eval(&probe)?;
        probe.entry_mut(name)?.value.data_mut()[*i] = original;

        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic.get(name).map_or(0.0, |g| g.data()[*i]);
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        report.coordinates_checked += 1;
        if report.worst.is_none() || rel > report.max_relative_error {
            report.max_relative_error = rel;
            report.worst = Some((name.clone(), *i, a, numeric));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    #[test]
    fn quadratic_and_linear() {
        let mut store = ParameterStore::new();
        store.insert("x", Tensor::vector(vec![0.3, -1.2, 2.0]), true).unwrap();
        let quad = grad_check(&store, DEFAULT_EPS, 0, |t, s| {
            let x = t.param(s, "x")?;
            let sq = t.mul(x, x)?;
            t.sum(sq)
        })
        .unwrap();
        assert!(quad.max_relative_error < 1e-7, "{quad:?}");
        let lin = grad_check(&store, DEFAULT_EPS, 0, |t, s| {
            let x = t.param(s, "x")?;
            let y = t.scale(x, 3.0)?;
            t.sum(y)
        })
        .unwrap();
        assert!(lin.max_relative_error < 1e-9, "{lin:?}");
        assert_eq!(lin.coordinates_checked, 3);
    }
}
