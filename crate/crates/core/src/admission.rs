//! One-shot admission by the edge server: confirm demands when they fit in
//! the available bandwidth, otherwise scale them down proportionally.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfirmedDemands<T> {
    pub values: Vec<T>,
    pub total: T,
    /// Whether the proportional repartition branch was taken.
    pub repartitioned: bool,
}

impl<T: Real> ConfirmedDemands<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn admit<T: Real>(demands: &[T], bandwidth: T) -> Result<ConfirmedDemands<T>> {
    if !bandwidth.is_finite() || bandwidth <= T::zero() {
        return Err(Error::NonPositive {
            name: "bandwidth",
            value: bandwidth.as_f64(),
        });
    }
    if demands.is_empty() {
        return Err(Error::EmptyDemands);
    }
    if let Some((index, d)) = demands
        .iter()
        .enumerate()
        .find(|(_, d)| !d.is_finite() || **d < T::zero())
    {
        return Err(Error::InvalidDemand {
            index,
            value: d.as_f64(),
        });
    }

    let total = demands.iter().fold(T::zero(), |acc, &d| acc + d);
    // A sum that exceeds B only by accumulated rounding counts as fitting,
    // which also makes admission idempotent on its own output.
    let slack = T::of_usize(demands.len() + 1) * T::epsilon();
    if total <= bandwidth * (T::one() + slack) {
        return Ok(ConfirmedDemands {
            values: demands.to_vec(),
            total,
            repartitioned: false,
        });
    }
    let scale = bandwidth / total;
    let values: Vec<T> = demands.iter().map(|&d| d * scale).collect();
    let total = values.iter().fold(T::zero(), |acc, &d| acc + d);
    Ok(ConfirmedDemands {
        values,
        total,
        repartitioned: true,
    })
}
