/// Outcome of a finite-difference gradient comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
    pub passed: bool,
}

/// Denominator floor: entries whose analytic and numeric values are both
/// below this are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

/// Compares the analytic gradient returned by `model` against central
/// differences `(f(p + h e_i) − f(p − h e_i)) / 2h` for every coordinate.
///
/// `model` maps a flat parameter vector to `(loss, gradient)` and must be
/// deterministic.
pub fn grad_check<F>(mut model: F, params: &[f64], h: f64, tolerance: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = model(params);
    assert_eq!(analytic.len(), params.len(), "gradient length");
    let mut probe = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: params.len(),
        passed: true,
    };
    for i in 0..params.len() {
        probe[i] = params[i] + h;
        let (plus, _) = model(&probe);
        probe[i] = params[i] - h;
        let (minus, _) = model(&probe);
        probe[i] = params[i];
        let numeric = (plus - minus) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(REL_FLOOR);
        let rel = (analytic[i] - numeric).abs() / denom;
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
            report.analytic = analytic[i];
            report.numeric = numeric;
        }
    }
    report.passed = report.max_rel_error < tolerance;
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(p: &[f64]) -> (f64, Vec<f64>) {
        let c = [1.5, -2.0, 0.25];
        (p.iter().zip(c).map(|(a, b)| a * b).sum(), c.to_vec())
    }

    #[test]
    fn linear_model_is_exact() {
        let r = grad_check(linear, &[0.3, -1.0, 2.0], 1e-5, 1e-9);
        assert!(r.passed, "{r:?}");
        assert!(r.max_rel_error < 1e-9);
    }

    #[test]
    fn corrupted_gradient_detected() {
        let corrupt = |p: &[f64]| {
            let (l, mut g) = linear(p);
            g[1] += 0.1;
            (l, g)
        };
        let r = grad_check(corrupt, &[0.3, -1.0, 2.0], 1e-5, 1e-5);
        assert!(!r.passed);
        assert_eq!(r.worst_index, 1);
    }
}
