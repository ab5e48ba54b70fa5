//! Per-time-step labels: binary failure labels from the load curve, the
//! three-class load-drop and damage-threshold schemes, and the nine location
//! classes built from three cases.

use serde::{Deserialize, Serialize};

use crate::sensing::TimeSeriesMatrix;
use crate::timestepper::SimulationRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadCurve {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub f: Vec<f64>,
}

impl LoadCurve {
    pub fn new(t: Vec<f64>, u: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if t.len() != u.len() || u.len() != f.len() {
            return Err(Error::Data(format!(
                "load curve columns differ in length: t {}, u {}, f {}",
                t.len(),
                u.len(),
                f.len()
            )));
        }
        if t.is_empty() {
            return Err(Error::Data("load curve is empty".into()));
        }
        if u.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Data("applied displacement must be non-decreasing".into()));
        }
        if t.iter().chain(&u).chain(&f).any(|v| !v.is_finite()) {
            return Err(Error::Data("load curve has non-finite entries".into()));
        }
        Ok(Self { t, u, f })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Index of the first maximum of the force.
    pub fn peak_index(&self) -> usize {
        self.f
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > self.f[best] { i } else { best })
    }
}

pub fn compute_load_curve(record: &SimulationRecord) -> Result<LoadCurve> {
    LoadCurve::new(record.times.clone(), record.applied_disp.clone(), record.reaction.clone())
}

/// Load-curve events that mark the failure transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BinaryCriterion {
    /// Maximum force.
    PeakForce,
    /// Steepest descent of the moving-average force against displacement.
    MinSlope { window: usize },
    /// First step after the peak with force at or below `fraction` of it.
    ForceDrop { fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { r1: 1.0, r2: 0.92, r3: 0.85 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelScheme {
    Binary(BinaryCriterion),
    Multi3,
    Multi4(Thresholds),
    Location9,
}

impl LabelScheme {
    /// Parses the command-line names `bin1`, `bin2`, `bin3:85|90|95`,
    /// `multi3`, `multi4` and `location9`.
    pub fn parse(name: &str) -> Result<Self> {
        let s = match name {
            "bin1" => Self::Binary(BinaryCriterion::PeakForce),
            "bin2" => Self::Binary(BinaryCriterion::MinSlope { window: DEFAULT_WINDOW }),
            "multi3" => Self::Multi3,
            "multi4" => Self::Multi4(Thresholds::default()),
            "location9" => Self::Location9,
            other => match other.strip_prefix("bin3:") {
                Some(p @ ("85" | "90" | "95")) => Self::Binary(BinaryCriterion::ForceDrop {
                    fraction: p.parse::<f64>().expect("two digits") / 100.0,
                }),
                _ => return Err(Error::Config(format!("unknown label scheme '{name}'"))),
            },
        };
        Ok(s)
    }

    pub fn class_domain(&self) -> Vec<u8> {
        match self {
            Self::Binary(_) => vec![0, 1],
            Self::Multi3 | Self::Multi4(_) => vec![1, 2, 3],
            Self::Location9 => (1..=9).collect(),
        }
    }
}

/// Moving-average window of the slope criterion.
pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelVector {
    pub scheme: LabelScheme,
    pub labels: Vec<u8>,
    pub class_domain: Vec<u8>,
}

impl LabelVector {
    pub fn new(scheme: LabelScheme, labels: Vec<u8>) -> Result<Self> {
        let class_domain = scheme.class_domain();
        if let Some(bad) = labels.iter().find(|l| !class_domain.contains(l)) {
            return Err(Error::Labeling(format!("label {bad} is outside the class domain {class_domain:?}")));
        }
        Ok(Self { scheme, labels, class_domain })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Index of the first 1 in a binary label vector.
    pub fn transition_index(&self) -> Option<usize> {
        match self.scheme {
            LabelScheme::Binary(_) => self.labels.iter().position(|&l| l == 1),
            _ => None,
        }
    }
}

fn moving_average(x: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Centered-difference slope `df/du` of the smoothed force, one-sided at the
/// ends. Steps without displacement change get an infinite slope so they are
/// never the minimum.
pub fn smoothed_slope(curve: &LoadCurve, window: usize) -> Vec<f64> {
    let f = moving_average(&curve.f, window.max(1));
    let n = f.len();
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let du = curve.u[b] - curve.u[a];
            if du > 0.0 {
                (f[b] - f[a]) / du
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// Step index where a binary criterion switches the label to 1.
pub fn transition_index(curve: &LoadCurve, criterion: BinaryCriterion) -> Result<usize> {
    let peak = curve.peak_index();
    let fmax = curve.f[peak];
    let no_failure = || Error::Labeling("no transition found: the force never drops after its peak".into());
    if fmax <= 0.0 || !curve.f[peak..].iter().any(|&v| v < fmax) {
        return Err(no_failure());
    }
    match criterion {
        BinaryCriterion::PeakForce => Ok(peak),
        BinaryCriterion::MinSlope { window } => {
            let slope = smoothed_slope(curve, window);
            let k = (0..slope.len()).fold(0, |best, i| if slope[i] < slope[best] { i } else { best });
            if slope[k].is_finite() && slope[k] < 0.0 {
                Ok(k)
            } else {
                Err(no_failure())
            }
        }
        BinaryCriterion::ForceDrop { fraction } => {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::Labeling(format!("force fraction must be in (0,1), got {fraction}")));
            }
            (peak..curve.len())
                .find(|&i| curve.f[i] <= fraction * fmax)
                .ok_or_else(|| Error::Labeling(format!("no transition found: force never falls to {fraction} of peak")))
        }
    }
}

pub fn label_binary(curve: &LoadCurve, criterion: BinaryCriterion) -> Result<LabelVector> {
    let k = transition_index(curve, criterion)?;
    let labels = (0..curve.len()).map(|i| u8::from(i >= k)).collect();
    LabelVector::new(LabelScheme::Binary(criterion), labels)
}

/// Class 1 before the 95% load drop, 2 until the 90% drop, 3 after it.
pub fn label_multi3(curve: &LoadCurve) -> Result<LabelVector> {
    let l95 = transition_index(curve, BinaryCriterion::ForceDrop { fraction: 0.95 })?;
    let l90 = transition_index(curve, BinaryCriterion::ForceDrop { fraction: 0.90 })?;
    let labels = (0..curve.len())
        .map(|i| if i < l95 { 1 } else if i < l90 { 2 } else { 3 })
        .collect();
    LabelVector::new(LabelScheme::Multi3, labels)
}

/// Majority vote over sensor damage bins: `a` for `R1 ≥ g > R2` (and any
/// `g > R1`), `b` for `R2 ≥ g > R3`, `c` for `g ≤ R3`. Ties go to the more
/// severe class.
pub fn label_multi4(patterns: &TimeSeriesMatrix, thresholds: Thresholds) -> Result<LabelVector> {
    let Thresholds { r1, r2, r3 } = thresholds;
    if !(r1 >= r2 && r2 >= r3) {
        return Err(Error::Labeling(format!("thresholds must satisfy R1 >= R2 >= R3, got {r1}, {r2}, {r3}")));
    }
    let labels = patterns
        .values
        .rows()
        .into_iter()
        .map(|row| {
            let mut counts = [0usize; 3];
            for &g in row {
                let bin = if g > r2 {
                    0
                } else if g > r3 {
                    1
                } else {
                    2
                };
                counts[bin] += 1;
            }
            let mut best = 2;
            for bin in [1, 0] {
                if counts[bin] > counts[best] {
                    best = bin;
                }
            }
            best as u8 + 1
        })
        .collect();
    LabelVector::new(LabelScheme::Multi4(thresholds), labels)
}

/// Location classes `3 (case − 1) + class` for cases 1 to 3, rows
/// concatenated in the given order.
pub fn label_location9(per_case: &[(u8, LabelVector)]) -> Result<LabelVector> {
    let mut labels = Vec::new();
    for (case, lv) in per_case {
        if !(1..=3).contains(case) {
            return Err(Error::Labeling(format!("location classes are defined for cases 1-3, got case {case}")));
        }
        if !matches!(lv.scheme, LabelScheme::Multi3 | LabelScheme::Multi4(_)) {
            return Err(Error::Labeling("location classes need three-class labels".into()));
        }
        labels.extend(lv.labels.iter().map(|&c| 3 * (case - 1) + c));
    }
    LabelVector::new(LabelScheme::Location9, labels)
}
