//! Net utility of a device as a function of its bandwidth share.
//!
//! `U(x) = ω·ln(c·x + 1) − p·x²` with spectral efficiency `c = log₂(1 + snr)`.
//! The derivative is strictly decreasing on `x > −1/c`, so it can be inverted
//! in closed form; the engine works in derivative space and maps back through
//! [`invert_derivative`].

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Spectral efficiency `log₂(1 + snr)`, always positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityCoefficient<T>(T);

impl<T: Real> CapacityCoefficient<T> {
    pub fn value(self) -> T {
        self.0
    }

    /// Left edge of the logarithm domain, `−1/c`.
    pub fn domain_bound(self) -> T {
        -self.0.recip()
    }
}

pub fn capacity_coefficient<T: Real>(snr: T) -> Result<CapacityCoefficient<T>> {
    if !snr.is_finite() || snr <= T::zero() {
        return Err(Error::NonPositive {
            name: "snr",
            value: snr.as_f64(),
        });
    }
    Ok(CapacityCoefficient(snr.ln_1p() / T::two().ln()))
}

fn check_domain<T: Real>(c: CapacityCoefficient<T>, x: T) -> Result<T> {
    let arg = c.value() * x + T::one();
    if arg > T::zero() {
        Ok(arg)
    } else {
        Err(Error::Domain {
            x: x.as_f64(),
            bound: c.domain_bound().as_f64(),
        })
    }
}

pub fn evaluate<T: Real>(omega: T, c: CapacityCoefficient<T>, p: T, x: T) -> Result<T> {
    let arg = check_domain(c, x)?;
    Ok(omega * arg.ln() - p * x * x)
}

pub fn derivative<T: Real>(omega: T, c: CapacityCoefficient<T>, p: T, x: T) -> Result<T> {
    let arg = check_domain(c, x)?;
    Ok(omega * c.value() / arg - T::two() * p * x)
}

/// The unique `x > −1/c` with `derivative(x) = v`.
///
/// This is the larger root of `2pc·x² + (2p + v·c)·x + (v − ω·c) = 0`. The
/// quadratic equals `−ω·c < 0` at `x = −1/c`, so its discriminant is positive
/// and exactly one root sits right of the domain bound.
pub fn invert_derivative<T: Real>(omega: T, c: CapacityCoefficient<T>, p: T, v: T) -> Result<T> {
    if p.is_nan() || p <= T::zero() {
        return Err(Error::NonPositive {
            name: "price",
            value: p.as_f64(),
        });
    }
    let c = c.value();
    let a = T::two() * p * c;
    let b = T::two() * p + v * c;
    let k = v - omega * c;
    let disc = b * b - T::of(4.0) * a * k;
    let root = disc.sqrt();
    // Pick the cancellation-free expression for the larger root.
    let x = if b >= T::zero() {
        -T::two() * k / (b + root)
    } else {
        (root - b) / (T::two() * a)
    };
    Ok(x)
}

/// One device's utility curve with its parameters bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetUtility<T> {
    pub omega: T,
    pub c: CapacityCoefficient<T>,
    pub price: T,
}

impl<T: Real> NetUtility<T> {
    pub fn new(omega: T, c: CapacityCoefficient<T>, price: T) -> Self {
        Self { omega, c, price }
    }

    pub fn evaluate(&self, x: T) -> Result<T> {
        evaluate(self.omega, self.c, self.price, x)
    }

    pub fn derivative(&self, x: T) -> Result<T> {
        derivative(self.omega, self.c, self.price, x)
    }

    pub fn invert_derivative(&self, v: T) -> Result<T> {
        invert_derivative(self.omega, self.c, self.price, v)
    }
}
