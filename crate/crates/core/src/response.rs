//! Material response: dose to response mapping, its derivative and a clamped
//! tabulated inverse.
//!
//! The logistic variant is the generalized (Richards) curve
//! `M(f) = A + (K - A) / (1 + exp(-B (f - M')))^(1/ν)`.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::scalar::Scalar;

/// Number of samples in the inverse lookup table.
pub const INVERSE_TABLE_LEN: usize = 4096;
/// Relative distance of the table ends from the asymptotes.
pub const INVERSE_TABLE_MARGIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResponseVariant {
    Logistic,
    LinearIdentity,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogisticParams {
    pub a: f64,
    pub k: f64,
    pub b: f64,
    pub m_shift: f64,
    pub nu: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self { a: 0.0, k: 1.0, b: 10.0, m_shift: 0.5, nu: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct ResponseModel<T> {
    variant: ResponseVariant,
    params: LogisticParams,
    // Uniform samples in response space: table_lo + i * table_step -> dose.
    table_lo: T,
    table_step: T,
    table: Vec<T>,
}

impl<T: Scalar> ResponseModel<T> {
    pub fn logistic(params: LogisticParams) -> Result<Self> {
        let LogisticParams { a, k, b, m_shift, nu } = params;
        for (name, v) in [("A", a), ("K", k), ("B", b), ("M'", m_shift), ("nu", nu)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("response {name} = {v}")));
            }
        }
        if k <= a {
            return Err(Error::InvalidParameter(format!("response needs K > A, got A={a}, K={k}")));
        }
        if b <= 0.0 {
            return Err(Error::InvalidParameter(format!("response steepness B must be > 0, got {b}")));
        }
        if nu <= 0.0 {
            return Err(Error::InvalidParameter(format!("response asymmetry nu must be > 0, got {nu}")));
        }
        let span = k - a;
        let lo = a + INVERSE_TABLE_MARGIN * span;
        let hi = k - INVERSE_TABLE_MARGIN * span;
        let step = (hi - lo) / (INVERSE_TABLE_LEN - 1) as f64;
        let table = (0..INVERSE_TABLE_LEN)
            .map(|i| {
                let fm = if i == INVERSE_TABLE_LEN - 1 { hi } else { lo + i as f64 * step };
                T::lit(analytic_inverse(&params, fm))
            })
            .collect();
        Ok(Self {
            variant: ResponseVariant::Logistic,
            params,
            table_lo: T::lit(lo),
            table_step: T::lit(step),
            table,
        })
    }

    /// `M(f) = f`.
    pub fn linear_identity() -> Self {
        Self {
            variant: ResponseVariant::LinearIdentity,
            params: LogisticParams::default(),
            table_lo: T::zero(),
            table_step: T::one(),
            table: Vec::new(),
        }
    }

    pub fn variant(&self) -> ResponseVariant {
        self.variant
    }

    /// Curve parameters; meaningless for the linear-identity variant.
    pub fn params(&self) -> &LogisticParams {
        &self.params
    }

    pub fn is_linear(&self) -> bool {
        self.variant == ResponseVariant::LinearIdentity
    }

    /// Open response interval `(A, K)`; unbounded for the identity.
    pub fn range(&self) -> (f64, f64) {
        match self.variant {
            ResponseVariant::Logistic => (self.params.a, self.params.k),
            ResponseVariant::LinearIdentity => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Logistic `s = 1 / (1 + exp(-B (f - M')))`, evaluated without overflow.
    #[inline]
    fn sigmoid(&self, f: T) -> T {
        let z = T::lit(self.params.b) * (f - T::lit(self.params.m_shift));
        if z >= T::zero() {
            T::one() / (T::one() + (-z).exp())
        } else {
            let e = z.exp();
            e / (T::one() + e)
        }
    }

    #[inline]
    pub fn respond(&self, f: T) -> T {
        match self.variant {
            ResponseVariant::LinearIdentity => f,
            ResponseVariant::Logistic => {
                let p = &self.params;
                let s = self.sigmoid(f);
                let s_pow = if p.nu == 1.0 { s } else { s.powf(T::lit(1.0 / p.nu)) };
                T::lit(p.a) + T::lit(p.k - p.a) * s_pow
            }
        }
    }

    #[inline]
    pub fn derivative(&self, f: T) -> T {
        match self.variant {
            ResponseVariant::LinearIdentity => T::one(),
            ResponseVariant::Logistic => {
                let p = &self.params;
                let s = self.sigmoid(f);
                let s_pow = if p.nu == 1.0 { s } else { s.powf(T::lit(1.0 / p.nu)) };
                T::lit((p.k - p.a) * p.b / p.nu) * s_pow * (T::one() - s)
            }
        }
    }

    /// Response and derivative together, sharing the exponential.
    #[inline]
    pub fn respond_with_derivative(&self, f: T) -> (T, T) {
        match self.variant {
            ResponseVariant::LinearIdentity => (f, T::one()),
            ResponseVariant::Logistic => {
                let p = &self.params;
                let s = self.sigmoid(f);
                let s_pow = if p.nu == 1.0 { s } else { s.powf(T::lit(1.0 / p.nu)) };
                let m = T::lit(p.a) + T::lit(p.k - p.a) * s_pow;
                let d = T::lit((p.k - p.a) * p.b / p.nu) * s_pow * (T::one() - s);
                (m, d)
            }
        }
    }

    /// Tabulated inverse with linear interpolation. Responses beyond the
    /// table ends map to the dose at the nearest end.
    pub fn invert(&self, fm: T) -> T {
        if self.is_linear() {
            return fm;
        }
        let last = self.table.len() - 1;
        let pos = (fm - self.table_lo) / self.table_step;
        if !(pos > T::zero()) {
            return self.table[0];
        }
        let last_t = T::from_usize(last).unwrap();
        if pos >= last_t {
            return self.table[last];
        }
        let i = pos.floor().to_usize().unwrap().min(last - 1);
        let t = pos - T::from_usize(i).unwrap();
        self.table[i] + t * (self.table[i + 1] - self.table[i])
    }

    pub fn respond_field(&self, f: &Field<T>) -> Field<T> {
        f.map(|v| self.respond(v)).with_unit("response")
    }

    pub fn invert_field(&self, fm: &Field<T>) -> Field<T> {
        fm.map(|v| self.invert(v)).with_unit("J/cm^3")
    }
}

/// Closed-form inverse of the Richards curve for `A < fm < K`.
pub fn analytic_inverse(p: &LogisticParams, fm: f64) -> f64 {
    let ratio = (p.k - p.a) / (fm - p.a);
    p.m_shift - (ratio.powf(p.nu) - 1.0).ln() / p.b
}
