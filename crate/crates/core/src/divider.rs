//! Divide-by-N rising-edge counter and the TSPC divide-by-2 power table.
//!
//! The flip-flops are ideal toggles. A monolithic divide-by-N behaves exactly like a
//! chain of log2(N) divide-by-2 stages: the output rises on input edges 1, N+1, 2N+1, …
//! and falls halfway between.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DividerError {
    #[error("division ratio {0} must be a power of two >= 2")]
    NotPowerOfTwo(u32),
    #[error("input frequency must be > 0, got {0} Hz")]
    NonPositiveFrequency(f64),
    #[error("power table rows must have strictly increasing frequencies and positive powers")]
    BadTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DividerState {
    /// Input rising edges seen, modulo N.
    pub edge_count: u32,
    /// Output logic level.
    pub level: bool,
}

impl DividerState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Feeds one step to the divider; returns the new state and whether the output rose.
///
/// The output toggles on every input edge that arrives while the count is a multiple
/// of `n/2`, then the count advances.
pub fn div_step(state: DividerState, in_edge: bool, n: u32) -> (DividerState, bool) {
    debug_assert!(n >= 2 && n.is_multiple_of(2));
    if !in_edge {
        return (state, false);
    }
    let toggle = state.edge_count.is_multiple_of(n / 2);
    let level = state.level ^ toggle;
    let next = DividerState {
        edge_count: (state.edge_count + 1) % n,
        level,
    };
    (next, level && !state.level)
}

/// Per-stage power of a divide-by-2 flip-flop versus its input frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTable {
    rows: Vec<(f64, f64)>,
}

impl PowerTable {
    /// `(input frequency [Hz], power [W])` rows.
    pub fn new(rows: Vec<(f64, f64)>) -> Result<Self, DividerError> {
        let ok = !rows.is_empty()
            && rows
                .iter()
                .all(|&(f, p)| f > 0.0 && p > 0.0 && f.is_finite() && p.is_finite())
            && rows.windows(2).all(|w| w[1].0 > w[0].0);
        if ok {
            Ok(Self { rows })
        } else {
            Err(DividerError::BadTable)
        }
    }

    /// Measured TSPC divide-by-2 power, 1 MHz to 3 GHz input.
    pub fn tspc_divide_by_2() -> Self {
        Self::new(vec![
            (1e6, 0.24e-6),
            (10e6, 2.3e-6),
            (100e6, 9.022e-6),
            (1e9, 94.27e-6),
            (2e9, 188.8e-6),
            (3e9, 362.1e-6),
        ])
        .expect("built-in table is well formed")
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }

    /// Log-log interpolation, clamped to the end rows; exact at table rows.
    pub fn stage_power(&self, f_in: f64) -> f64 {
        let rows = &self.rows;
        let (f_first, p_first) = rows[0];
        let (f_last, p_last) = rows[rows.len() - 1];
        if f_in <= f_first {
            return p_first;
        }
        if f_in >= f_last {
            return p_last;
        }
        let hi = rows.partition_point(|&(f, _)| f < f_in);
        let (f1, p1) = rows[hi];
        if f1 == f_in {
            return p1;
        }
        let (f0, p0) = rows[hi - 1];
        let x = (f_in.ln() - f0.ln()) / (f1.ln() - f0.ln());
        (p0.ln() + x * (p1.ln() - p0.ln())).exp()
    }
}

/// Total power of a ripple chain of divide-by-2 stages dividing `f_in` by `n`.
pub fn divider_power_estimate(f_in: f64, n: u32, table: &PowerTable) -> Result<f64, DividerError> {
    if n < 2 || !n.is_power_of_two() {
        return Err(DividerError::NotPowerOfTwo(n));
    }
    if f_in.is_nan() || f_in <= 0.0 {
        return Err(DividerError::NonPositiveFrequency(f_in));
    }
    let mut total = 0.0;
    let mut f = f_in;
    for _ in 0..n.trailing_zeros() {
        total += table.stage_power(f);
        f /= 2.0;
    }
    Ok(total)
}
