use serde::{Deserialize, Serialize};

/// Affine map `x ↦ (x − shift) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub shift: f64,
    pub scale: f64,
}

impl Default for Affine {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Affine {
    pub const IDENTITY: Affine = Affine { shift: 0.0, scale: 1.0 };

    /// Maps `[min, max]` onto `[−1, 1]`. A constant signal keeps unit scale
    /// and is only shifted.
    pub fn fit(min: f64, max: f64) -> Self {
        if !(min <= max) {
            return Self::IDENTITY;
        }
        let half = 0.5 * (max - min);
        let shift = 0.5 * (max + min);
        if half > 0.0 && half.is_finite() {
            Affine { shift, scale: half }
        } else {
            Affine { shift: min, scale: 1.0 }
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.shift) / self.scale
    }

    #[inline]
    pub fn invert(&self, z: f64) -> f64 {
        z * self.scale + self.shift
    }
}

/// Per-signal normalization for the two exogenous inputs and the output.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Normalization {
    pub u1: Affine,
    pub u2: Affine,
    pub y: Affine,
}

fn range<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Min/max fit over the given sequences (normally the training split only).
/// Values outside the fitted range are never clipped.
pub fn fit_normalization<'a, I>(sequences: I) -> Normalization
where
    I: IntoIterator<Item = &'a super::Sequence> + Clone,
{
    let u1 = range(sequences.clone().into_iter().flat_map(|s| s.u1.iter()));
    let u2 = range(sequences.clone().into_iter().flat_map(|s| s.u2.iter()));
    let y = range(sequences.into_iter().flat_map(|s| s.y.iter()));
    Normalization { u1: Affine::fit(u1.0, u1.1), u2: Affine::fit(u2.0, u2.1), y: Affine::fit(y.0, y.1) }
}
