//! Central finite-difference gradient estimates in 64-bit.

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Perturbation size for central differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    /// `h = max(rel * |x_i|, floor)` per element.
    Relative { rel: f64, floor: f64 },
    /// Same step rule with the fourth-order five-point stencil, for functions
    /// whose curvature scale is too small for the three-point rule at a step
    /// large enough to keep round-off down.
    FivePoint { rel: f64, floor: f64 },
}

impl Default for StepSize {
    fn default() -> Self {
        StepSize::Relative {
            rel: 1e-4,
            floor: 1e-6,
        }
    }
}

impl StepSize {
    fn at(&self, x: f64) -> f64 {
        match *self {
            StepSize::Fixed(h) => h,
            StepSize::Relative { rel, floor } | StepSize::FivePoint { rel, floor } => (rel * x.abs()).max(floor),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSize::Fixed(h) => h > 0.0 && h.is_finite(),
            StepSize::Relative { rel, floor } | StepSize::FivePoint { rel, floor } => {
                rel >= 0.0 && floor > 0.0 && rel.is_finite() && floor.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("step size must be positive: {self:?}")))
        }
    }
}

/// Central-difference estimate `(f(x + h e_i) - f(x - h e_i)) / 2h` for every
/// `i`, or `(8 (f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h` for
/// [`StepSize::FivePoint`].
pub fn finite_diff(
    mut f: impl FnMut(&Tensor<f64>) -> f64,
    x: &Tensor<f64>,
    step: StepSize,
) -> Result<Tensor<f64>> {
    step.validate()?;
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.dims());
    for i in 0..x.numel() {
        let x0 = x.data()[i];
        let h = step.at(x0);
        let mut at = |offset: f64| {
            probe.data_mut()[i] = x0 + offset;
            let v = f(&probe);
            probe.data_mut()[i] = x0;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(i))
            }
        };
        let d1 = at(h)? - at(-h)?;
        grad.data_mut()[i] = match step {
            StepSize::FivePoint { .. } => {
                let d2 = at(2.0 * h)? - at(-2.0 * h)?;
                (8.0 * d1 - d2) / (12.0 * h)
            }
            _ => d1 / (2.0 * h),
        };
    }
    Ok(grad)
}

/// Comparison of an analytic gradient with its finite-difference estimate.
///
/// Errors are measured relative to the largest estimated gradient magnitude,
/// `|analytic_i - numeric_i| / max_j |numeric_j|` (absolute when the estimate
/// is identically zero).
#[derive(Clone, Debug)]
pub struct FiniteDiffReport {
    pub max_rel_error: f64,
    pub errors: Tensor<f64>,
    pub step: StepSize,
    pub numeric: Tensor<f64>,
}

impl FiniteDiffReport {
    pub fn compare(analytic: &Tensor<f64>, numeric: Tensor<f64>, step: StepSize) -> Result<Self> {
        analytic.ensure_same_dims(&numeric)?;
        let scale = numeric.max_abs();
        let denom = if scale > 0.0 { scale } else { 1.0 };
        let errors = analytic.zip_map(&numeric, |a, n| (a - n).abs() / denom)?;
        let max_rel_error = errors.data().iter().fold(0.0f64, |m, &e| m.max(e));
        Ok(FiniteDiffReport {
            max_rel_error,
            errors,
            step,
            numeric,
        })
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

impl std::fmt::Display for FiniteDiffReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let worst = self
            .errors
            .data()
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        writeln!(f, "elements        {}", self.errors.numel())?;
        writeln!(f, "dims            {:?}", self.errors.dims())?;
        writeln!(f, "step            {:?}", self.step)?;
        writeln!(f, "max_rel_error   {:.3e}", self.max_rel_error)?;
        write!(f, "worst_element   {}", worst.0)
    }
}

/// Estimate the gradient of `f` at `x` and compare it with `analytic`.
pub fn check_gradient(
    f: impl FnMut(&Tensor<f64>) -> f64,
    x: &Tensor<f64>,
    analytic: &Tensor<f64>,
    step: StepSize,
) -> Result<FiniteDiffReport> {
    let numeric = finite_diff(f, x, step)?;
    FiniteDiffReport::compare(analytic, numeric, step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_point_is_exact_on_quartics() {
        let x = Tensor::from_vec([1, 1, 1, 2], vec![0.5, -1.5]).unwrap();
        let step = StepSize::FivePoint { rel: 0.0, floor: 0.1 };
        let g = finite_diff(|t| t.data().iter().map(|v| v.powi(4) - v.powi(3)).sum(), &x, step).unwrap();
        for (gi, v) in g.data().iter().zip(x.data()) {
            assert!((gi - (4.0 * v.powi(3) - 3.0 * v * v)).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_is_exact() {
        let x = Tensor::from_vec([1, 1, 1, 2], vec![1.0, 2.0]).unwrap();
        let g = finite_diff(|t| t.data().iter().map(|v| v * v).sum(), &x, StepSize::Fixed(1e-5)).unwrap();
        assert!((g.data()[0] - 2.0).abs() < 1e-8);
        assert!((g.data()[1] - 4.0).abs() < 1e-8);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let x = Tensor::from_vec([1, 1, 1, 3], vec![1.0, -2.0, 3.0]).unwrap();
        let g = finite_diff(|_| 4.2, &x, StepSize::default()).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relative_step_has_floor() {
        let s = StepSize::default();
        assert_eq!(s.at(0.0), 1e-6);
        assert_eq!(s.at(100.0), 1e-2);
    }

    #[test]
    fn errors() {
        let x = Tensor::from_vec([1, 1, 1, 1], vec![0.0]).unwrap();
        assert!(matches!(
            finite_diff(|t| 1.0 / t.data()[0].abs().min(0.0), &x, StepSize::Fixed(1e-3)),
            Err(Error::NonFinite(0))
        ));
        assert!(finite_diff(|_| 0.0, &x, StepSize::Fixed(0.0)).is_err());
        assert!(finite_diff(|_| 0.0, &x, StepSize::Fixed(-1.0)).is_err());
    }

    #[test]
    fn report_flags_wrong_gradient() {
        let x = Tensor::from_vec([1, 1, 1, 2], vec![1.0, 2.0]).unwrap();
        let f = |t: &Tensor<f64>| t.data().iter().map(|v| v * v).sum();
        let good = Tensor::from_vec([1, 1, 1, 2], vec![2.0, 4.0]).unwrap();
        let bad = Tensor::from_vec([1, 1, 1, 2], vec![2.0, 4.5]).unwrap();
        assert!(check_gradient(f, &x, &good, StepSize::default()).unwrap().passes(1e-8));
        let r = check_gradient(f, &x, &bad, StepSize::default()).unwrap();
        assert!(!r.passes(1e-2));
        assert!((r.max_rel_error - 0.125).abs() < 1e-6);
    }
}
