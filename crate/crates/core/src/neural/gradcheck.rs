//! Central finite differences against analytic gradients.

use super::Parameters;

/// Perturbation used for the central differences.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor of the relative error, so that entries whose true
/// gradient is ~0 are judged by absolute error instead.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub name: String,
    pub count: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupError>,
    pub tolerance: f64,
    /// Whether every analytic and numeric gradient was finite.
    pub finite: bool,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| g.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.finite && self.max_rel_error() < self.tolerance
    }

    pub fn worst(&self) -> Option<&GroupError> {
        self.groups
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(REL_FLOOR)
}

fn set_value<P: Parameters<f64>>(params: &mut P, group: usize, index: usize, value: f64) {
    let mut g = 0;
    params.visit_mut(&mut |_, s| {
        if g == group {
            s[index] = value;
        }
        g += 1;
    });
}

/// Compare the gradients returned by `loss_and_grad` at `params` with
/// central differences of the loss it returns, one scalar at a time.
///
/// The closure must be a deterministic function of its argument (fix any
/// dropout masks or RNG seeds inside it).
pub fn gradient_check<P, L>(params: &P, mut loss_and_grad: L, tolerance: f64) -> GradCheckReport
where
    P: Parameters<f64> + Clone,
    L: FnMut(&P) -> (f64, P),
{
    let (_, analytic) = loss_and_grad(params);
    let mut names = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    params.visit(&mut |n, s| {
        names.push(n.to_string());
        values.push(s.to_vec());
    });
    let mut grads: Vec<Vec<f64>> = Vec::new();
    analytic.visit(&mut |_, s| grads.push(s.to_vec()));

    let mut finite = true;
    let mut groups = Vec::with_capacity(names.len());
    let mut probe = params.clone();
    for (gi, name) in names.into_iter().enumerate() {
        let mut max_abs: f64 = 0.0;
        let mut max_rel: f64 = 0.0;
        for (j, &orig) in values[gi].iter().enumerate() {
            set_value(&mut probe, gi, j, orig + FD_STEP);
            let (plus, _) = loss_and_grad(&probe);
            set_value(&mut probe, gi, j, orig - FD_STEP);
            let (minus, _) = loss_and_grad(&probe);
            set_value(&mut probe, gi, j, orig);
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let a = grads[gi][j];
            if !(numeric.is_finite() && a.is_finite()) {
                finite = false;
                continue;
            }
            max_abs = max_abs.max((a - numeric).abs());
            max_rel = max_rel.max(relative_error(a, numeric));
        }
        groups.push(GroupError {
            name,
            count: values[gi].len(),
            max_abs_error: max_abs,
            max_rel_error: max_rel,
        });
    }
    GradCheckReport {
        groups,
        tolerance,
        finite,
    }
}
