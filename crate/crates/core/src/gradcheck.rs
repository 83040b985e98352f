//! Central finite-difference verification of analytic gradients.
//!
//! Every loss in this crate is differentiated by the tape; these helpers
//! re-derive the same gradients numerically (central differences in f64)
//! and report agreement. A coordinate passes when either the absolute gap
//! or the relative gap is within tolerance — small gradients drown in
//! difference-quotient noise, so a pure relative test would misfire.

use alloc::string::String;
use alloc::vec::Vec;

use crate::nn::{ParamId, ParamStore};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub struct CheckOpts {
    /// Central-difference step.
    pub h: f64,
    /// Relative tolerance: |a-n| / max(|a|,|n|).
    pub rel_tol: f64,
    /// Absolute tolerance applied before the relative test.
    pub abs_tol: f64,
}

impl Default for CheckOpts {
    fn default() -> Self {
        CheckOpts {
            h: 1e-5,
            rel_tol: 1e-4,
            abs_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub checked: usize,
    pub passed: usize,
    pub worst_rel: f64,
    /// Up to 16 failing coordinates: (tensor name, flat index, analytic, numeric).
    pub failures: Vec<(String, usize, f64, f64)>,
}

impl CheckReport {
    fn new() -> Self {
        CheckReport {
            checked: 0,
            passed: 0,
            worst_rel: 0.0,
            failures: Vec::new(),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.passed == self.checked
    }

    pub fn pass_fraction(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.passed as f64 / self.checked as f64
        }
    }

    fn record(&mut self, name: &str, idx: usize, analytic: f64, numeric: f64, opts: &CheckOpts) {
        self.checked += 1;
        let gap = (analytic - numeric).abs();
        let scale = analytic.abs().max(numeric.abs());
        let rel = if scale > 0.0 { gap / scale } else { 0.0 };
        if gap <= opts.abs_tol || rel <= opts.rel_tol {
            self.passed += 1;
        } else if self.failures.len() < 16 {
            self.failures
                .push((String::from(name), idx, analytic, numeric));
        }
        if rel > self.worst_rel && gap > opts.abs_tol {
            self.worst_rel = rel;
        }
    }
}

/// Check analytic parameter gradients of `loss_fn` over every coordinate of
/// every tensor in `grads`. The store is perturbed in place and restored.
pub fn check_param_grads<F>(
    store: &mut ParamStore<f64>,
    grads: &[(ParamId, Tensor<f64>)],
    mut loss_fn: F,
    opts: &CheckOpts,
) -> CheckReport
where
    F: FnMut(&ParamStore<f64>) -> f64,
{
    let mut report = CheckReport::new();
    for (id, g) in grads {
        for i in 0..g.len() {
            let orig = store.get(*id).data()[i];
            store.get_mut(*id).data_mut()[i] = orig + opts.h;
            let up = loss_fn(store);
            store.get_mut(*id).data_mut()[i] = orig - opts.h;
            let down = loss_fn(store);
            store.get_mut(*id).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * opts.h);
            let name = String::from(store.name(*id));
            report.record(&name, i, g.data()[i], numeric, opts);
        }
    }
    report
}

/// Check the gradient of `loss_fn` with respect to a free input tensor.
/// `analytic` must match `x0`'s shape.
pub fn check_input_grad<F>(
    x0: &Tensor<f64>,
    analytic: &Tensor<f64>,
    mut loss_fn: F,
    opts: &CheckOpts,
) -> CheckReport
where
    F: FnMut(&Tensor<f64>) -> f64,
{
    assert_eq!(x0.shape(), analytic.shape());
    let mut report = CheckReport::new();
    let mut x = x0.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + opts.h;
        let up = loss_fn(&x);
        x.data_mut()[i] = orig - opts.h;
        let down = loss_fn(&x);
        x.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * opts.h);
        report.record("input", i, analytic.data()[i], numeric, opts);
    }
    report
}
