//! Centralized reference solution of the allocation problem.
//!
//! At the optimum every device has the same marginal utility `λ*`. Each
//! inverse `(U_i′)⁻¹` is strictly decreasing, so `λ ↦ Σ_i (U_i′)⁻¹(λ)` is too,
//! and `λ*` is the unique root of `Σ_i (U_i′)⁻¹(λ) = Σd*`, found by bisection.

use crate::admission::ConfirmedDemands;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scenario::Scenario;
use crate::utility::{capacity_coefficient, NetUtility};

const MAX_BISECTIONS: usize = 200;
const MAX_WIDENINGS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution<T> {
    pub allocations: Vec<T>,
    /// Common marginal utility at the optimum; `None` when there is nothing to allocate.
    pub lambda: Option<T>,
    pub objective: T,
    pub warnings: Vec<String>,
}

fn utilities<T: Real>(scenario: &Scenario<T>) -> Result<Vec<NetUtility<T>>> {
    let c = capacity_coefficient(scenario.globals.snr)?;
    Ok(scenario
        .devices
        .iter()
        .map(|d| NetUtility::new(d.omega, c, scenario.globals.price))
        .collect())
}

/// `Σ_i U_i(x_i)`.
pub fn objective<T: Real>(scenario: &Scenario<T>, x: &[T]) -> Result<T> {
    let us = utilities(scenario)?;
    if x.len() != us.len() {
        return Err(Error::LengthMismatch {
            expected: us.len(),
            got: x.len(),
        });
    }
    us.iter()
        .zip(x)
        .try_fold(T::zero(), |acc, (u, &xi)| Ok(acc + u.evaluate(xi)?))
}

fn total_at<T: Real>(us: &[NetUtility<T>], lambda: T) -> Result<T> {
    us.iter()
        .try_fold(T::zero(), |acc, u| Ok(acc + u.invert_derivative(lambda)?))
}

pub fn solve<T: Real>(
    scenario: &Scenario<T>,
    confirmed: &ConfirmedDemands<T>,
) -> Result<OracleSolution<T>> {
    let us = utilities(scenario)?;
    let n = us.len();
    if confirmed.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: confirmed.len(),
        });
    }
    let target = confirmed.total;
    if target == T::zero() {
        return Ok(OracleSolution {
            allocations: vec![T::zero(); n],
            lambda: None,
            objective: T::zero(),
            warnings: Vec::new(),
        });
    }

    // At `hi` every share is ≤ 0; at `lo` every share is ≥ B·N ≥ Σd*.
    let far = scenario.globals.bandwidth * T::of_usize(n);
    let mut lo = us
        .iter()
        .map(|u| u.derivative(far))
        .try_fold(T::infinity(), |acc, d| d.map(|d| acc.min(d)))?;
    let mut hi = us
        .iter()
        .map(|u| u.omega * u.c.value())
        .fold(T::neg_infinity(), T::max);

    let mut widenings = 0;
    while total_at(&us, lo)? < target || total_at(&us, hi)? > target {
        widenings += 1;
        if widenings > MAX_WIDENINGS || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Bracket(format!(
                "no sign change in [{lo}, {hi}] for target total {target}"
            )));
        }
        let width = (hi - lo).abs().max(T::one());
        lo = lo - width;
        hi = hi + width;
    }

    let rel = T::of(1e-12);
    for _ in 0..MAX_BISECTIONS {
        let mid = lo + (hi - lo) / T::two();
        if hi - lo <= rel * mid.abs().max(T::one()) || mid <= lo || mid >= hi {
            break;
        }
        if total_at(&us, mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = lo + (hi - lo) / T::two();
    let allocations = us
        .iter()
        .map(|u| u.invert_derivative(lambda))
        .collect::<Result<Vec<_>>>()?;

    let warnings = allocations
        .iter()
        .enumerate()
        .filter(|(_, &x)| x < T::zero())
        .map(|(i, x)| format!("optimal share of device {i} is negative ({x})"))
        .collect();
    Ok(OracleSolution {
        objective: objective(scenario, &allocations)?,
        allocations,
        lambda: Some(lambda),
        warnings,
    })
}
