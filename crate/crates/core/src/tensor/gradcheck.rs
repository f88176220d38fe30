use super::ParameterSet;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// Denominator floor for the relative error; keeps coordinates whose true
/// gradient is ~0 from reporting roundoff as a large relative error.
const REL_FLOOR: f64 = 1e-6;

/// Compares the analytic gradient returned by `f` with central differences
/// over every coordinate of every parameter.
///
/// `f` returns `(loss, gradients)`; gradient entries missing from the
/// returned set are treated as zero.
pub fn check_gradients<F>(f: F, params: &ParameterSet, eps: f64) -> GradCheckReport
where
    F: Fn(&ParameterSet) -> (f64, ParameterSet),
{
    let (_, analytic) = f(params);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    let mut probe = params.clone();
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in names {
        let n = params.get(&name).map_or(0, |t| t.len());
        for i in 0..n {
            let base = params.get(&name).unwrap().data()[i];
            probe.get_mut(&name).unwrap().data_mut()[i] = base + eps;
            let (plus, _) = f(&probe);
            probe.get_mut(&name).unwrap().data_mut()[i] = base - eps;
            let (minus, _) = f(&probe);
            probe.get_mut(&name).unwrap().data_mut()[i] = base;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.get(&name).map_or(0.0, |t| t.data()[i]);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            report.coordinates += 1;
            if rel > report.max_rel_error || report.worst_param.is_empty() {
                report.max_rel_error = rel;
                report.worst_param = name.clone();
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn quadratic_is_exact() {
        let mut p = ParameterSet::new();
        p.insert("w", Tensor::from_vec(1, 3, vec![0.3, -1.7, 2.5]).unwrap());
        let report = check_gradients(
            |ps| {
                let w = ps.get("w").unwrap();
                let loss = w.data().iter().map(|v| v * v).sum();
                let mut g = ps.zeros_like();
                for (gi, wi) in g.get_mut("w").unwrap().data_mut().iter_mut().zip(w.data()) {
                    *gi = 2.0 * wi;
                }
                (loss, g)
            },
            &p,
            1e-5,
        );
        assert_eq!(report.coordinates, 3);
        assert!(report.max_rel_error < 1e-9, "{report:?}");
    }

    #[test]
    fn detects_wrong_gradient() {
        let mut p = ParameterSet::new();
        p.insert("w", Tensor::from_vec(1, 1, vec![1.0]).unwrap());
        let report = check_gradients(
            |ps| {
                let w = ps.get("w").unwrap().get(0, 0);
                let mut g = ps.zeros_like();
                g.get_mut("w").unwrap().set(0, 0, 3.0 * w);
                (w * w, g)
            },
            &p,
            1e-5,
        );
        assert!(report.max_rel_error > 0.3);
    }
}
