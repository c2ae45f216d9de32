//! Central finite-difference gradient checker.

/// One evaluation of the objective.
///
/// `pattern` fingerprints the on/off state of every piecewise-linear unit
/// (ReLU/tReLU) at the evaluated point. When the two perturbed points of a
/// central difference disagree on it, the difference straddles a kink and the
/// entry is excluded from the comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub value: f64,
    pub pattern: u64,
}

impl From<f64> for Probe {
    fn from(value: f64) -> Self {
        Probe { value, pattern: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Entries compared.
    pub checked: usize,
    /// Entries skipped because the perturbation crossed a kink.
    pub excluded: usize,
    pub max_rel_error: f64,
    /// Index of the worst entry, if any were checked.
    pub worst_index: Option<usize>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Relative error with an absolute floor so that entries whose true gradient
/// is zero do not divide by zero.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    const FLOOR: f64 = 1e-6;
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Compares `analytic` against `(f(θ+h) − f(θ−h)) / 2h` for every entry of `theta`.
///
/// `theta` is perturbed in place and restored before returning.
pub fn grad_check<F, P>(mut f: F, theta: &mut [f64], analytic: &[f64], h: f64, tol: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> P,
    P: Into<Probe>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    assert_eq!(theta.len(), analytic.len(), "gradient length mismatch");
    let mut report = GradCheckReport {
        checked: 0,
        excluded: 0,
        max_rel_error: 0.0,
        worst_index: None,
        tolerance: tol,
        passed: true,
    };
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + h;
        let plus: Probe = f(theta).into();
        theta[i] = orig - h;
        let minus: Probe = f(theta).into();
        theta[i] = orig;
        if plus.pattern != minus.pattern {
            report.excluded += 1;
            continue;
        }
        let numeric = (plus.value - minus.value) / (2.0 * h);
        let err = relative_error(analytic[i], numeric);
        report.checked += 1;
        if report.worst_index.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = Some(i);
        }
    }
    report.passed = report.max_rel_error < tol;
    report
}
