//! Pulse representation of signals.
//!
//! Real-valued signals are clamped to a working range and snapped onto a
//! uniform grid anchored at zero; the grid index doubles as a pulse count.
//! Two trains coincide wherever both are active on the shared clock, which
//! is what lets a synapse see `min(|x|, |delta|)` without either neuron
//! knowing the other's value.

use crate::error::{Error, Result};

/// Number of gradations for a signal, or none (continuous passthrough).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gradations {
    Continuous,
    Levels(u32),
}

/// Where the discrete grid sits inside the clamp range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAnchor {
    /// Multiples of the step, so zero is always a grid point. Required for
    /// pulse encoding: a zero signal must emit zero pulses.
    Zero,
    /// N points spanning the range inclusively (step = span / (N - 1)),
    /// like a naive linspace discretization. Zero lands on the grid only
    /// when the range splits evenly; used to mirror the published
    /// simulation's behavior, not for pulse encoding.
    Endpoints,
}

/// Clamp range plus gradation count.
///
/// The zero-anchored grid is `{ k * step : k integer, lo <= k*step <= hi }`
/// with `step = (hi - lo) / levels`. Anchoring at zero (rather than at `lo`)
/// keeps a zero signal at exactly zero pulses even for asymmetric ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationScheme {
    lo: f64,
    hi: f64,
    gradations: Gradations,
    anchor: GridAnchor,
}

// Validation uses negated comparisons so NaN parameters are rejected too.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
impl QuantizationScheme {
    pub fn continuous(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidScheme(format!("lo {lo} must be < hi {hi}")));
        }
        Ok(QuantizationScheme {
            lo,
            hi,
            gradations: Gradations::Continuous,
            anchor: GridAnchor::Zero,
        })
    }

    pub fn discrete(lo: f64, hi: f64, levels: u32) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidScheme(format!("lo {lo} must be < hi {hi}")));
        }
        if levels == 0 {
            return Err(Error::InvalidScheme("levels must be >= 1".to_string()));
        }
        if !(lo <= 0.0 && 0.0 <= hi) {
            return Err(Error::InvalidScheme(format!(
                "range [{lo}, {hi}] must contain zero for a zero-anchored grid"
            )));
        }
        Ok(QuantizationScheme {
            lo,
            hi,
            gradations: Gradations::Levels(levels),
            anchor: GridAnchor::Zero,
        })
    }

    /// Grid of `points` values spanning `[lo, hi]` inclusively.
    pub fn discrete_endpoints(lo: f64, hi: f64, points: u32) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidScheme(format!("lo {lo} must be < hi {hi}")));
        }
        if points < 2 {
            return Err(Error::InvalidScheme(
                "an endpoint grid needs at least 2 points".to_string(),
            ));
        }
        Ok(QuantizationScheme {
            lo,
            hi,
            gradations: Gradations::Levels(points),
            anchor: GridAnchor::Endpoints,
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn gradations(&self) -> Gradations {
        self.gradations
    }

    pub fn anchor(&self) -> GridAnchor {
        self.anchor
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.gradations, Gradations::Levels(_))
    }

    /// Grid spacing; `None` for continuous schemes.
    pub fn step(&self) -> Option<f64> {
        match self.gradations {
            Gradations::Continuous => None,
            Gradations::Levels(n) => Some(match self.anchor {
                GridAnchor::Zero => (self.hi - self.lo) / n as f64,
                GridAnchor::Endpoints => (self.hi - self.lo) / (n as f64 - 1.0),
            }),
        }
    }

    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    /// Largest/smallest grid indices; derived as `levels * bound / (hi - lo)`
    /// so the range endpoints stay on the grid despite inexact `step`.
    fn index_bounds(&self, levels: u32) -> (i64, i64) {
        let span = self.hi - self.lo;
        let kmin = (self.lo * levels as f64 / span).ceil() as i64;
        let kmax = (self.hi * levels as f64 / span).floor() as i64;
        (kmin, kmax)
    }

    /// Signed grid index of `v` on a zero-anchored grid: clamp to the range,
    /// divide by step, round to the nearest integer (ties away from zero),
    /// clamp to the representable index range. Zero always maps to index 0.
    /// The absolute index is the pulse count.
    pub fn quantize_index(&self, v: f64) -> i64 {
        let levels = match self.gradations {
            Gradations::Continuous => panic!("quantize_index on a continuous scheme"),
            Gradations::Levels(n) => n,
        };
        assert!(
            self.anchor == GridAnchor::Zero,
            "pulse indices are defined only for zero-anchored grids"
        );
        let step = (self.hi - self.lo) / levels as f64;
        let (kmin, kmax) = self.index_bounds(levels);
        let k = (self.clamp(v) / step).round() as i64;
        k.clamp(kmin, kmax)
    }

    /// Snap `v` onto the grid. Continuous schemes only clamp.
    pub fn quantize(&self, v: f64) -> f64 {
        match (self.gradations, self.anchor) {
            (Gradations::Continuous, _) => self.clamp(v),
            (Gradations::Levels(n), GridAnchor::Zero) => {
                let step = (self.hi - self.lo) / n as f64;
                self.quantize_index(v) as f64 * step
            }
            (Gradations::Levels(n), GridAnchor::Endpoints) => {
                let step = (self.hi - self.lo) / (n as f64 - 1.0);
                self.lo + ((self.clamp(v) - self.lo) / step).round() * step
            }
        }
    }
}

/// Which half of the learning cycle a train belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Coincidences drive the conductance up.
    Potentiation,
    /// Coincidences drive the conductance down.
    Depression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

/// A burst of same-amplitude pulses, emitted contiguously from slot 0 of a
/// shared clock. Count encodes magnitude; polarity the pulse voltage sign;
/// phase which cycle half carries it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseTrain {
    pub count: u32,
    pub polarity: Polarity,
    pub phase: Phase,
}

impl PulseTrain {
    pub fn new(count: u32, polarity: Polarity, phase: Phase) -> Self {
        PulseTrain {
            count,
            polarity,
            phase,
        }
    }

    /// True in the slots where this train drives its electrode.
    fn slots(&self, len: usize) -> Vec<bool> {
        (0..len).map(|s| (s as u32) < self.count).collect()
    }
}

/// Encode a signal as a pulse train: count = |grid index|, polarity = sign.
///
/// A non-negative signal defaults to the potentiation phase, a negative one
/// to the depression phase; callers driving a device restamp the phase per
/// cycle half.
pub fn encode_pulses(v: f64, scheme: &QuantizationScheme) -> Result<PulseTrain> {
    if !scheme.is_discrete() {
        return Err(Error::ContinuousPulses);
    }
    if scheme.anchor() != GridAnchor::Zero {
        return Err(Error::InvalidScheme(
            "pulse encoding requires a zero-anchored grid".to_string(),
        ));
    }
    let k = scheme.quantize_index(v);
    let (polarity, phase) = if k < 0 {
        (Polarity::Negative, Phase::Depression)
    } else {
        (Polarity::Positive, Phase::Potentiation)
    };
    Ok(PulseTrain::new(k.unsigned_abs() as u32, polarity, phase))
}

/// Number of clock slots in which both trains are active.
///
/// Deliberately simulated slot by slot with boolean activity arrays: this
/// is the ground-truth model of two bursts on a shared clock, and the
/// closed form `min(count_a, count_b)` is checked against it in tests.
pub fn coincidence_count(a: &PulseTrain, b: &PulseTrain) -> Result<u32> {
    if a.phase != b.phase {
        return Err(Error::PhaseMismatch);
    }
    let len = a.count.max(b.count) as usize;
    let sa = a.slots(len);
    let sb = b.slots(len);
    Ok(sa.iter().zip(&sb).filter(|(x, y)| **x && **y).count() as u32)
}
