use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::constitutive::degradation;
use crate::labeling::{
    compute_load_curve, label_binary, label_location9, label_multi3, label_multi4, LabelScheme, LabelVector, LoadCurve,
};
use crate::mesh::SensorSet;
use crate::sensing::PhiSeries;
use crate::timestepper::SimulationRecord;
use crate::{Error, Result};

/// What the classifier is asked: failure state within one case, or failure
/// state and case together (nine classes over cases 1 to 3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Presence { case_id: u8 },
    Location,
}

impl Task {
    pub fn cases(&self) -> Vec<u8> {
        match *self {
            Task::Presence { case_id } => vec![case_id],
            Task::Location => vec![1, 2, 3],
        }
    }
}

/// Sensor damage histories and load curve of one simulated case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseData {
    pub case_id: u8,
    pub phi: PhiSeries,
    pub curve: LoadCurve,
}

impl CaseData {
    pub fn new(case_id: u8, phi: PhiSeries, curve: LoadCurve) -> Result<Self> {
        if phi.times.len() != curve.len() {
            return Err(Error::Data(format!(
                "case {case_id}: {} sensor rows but {} load-curve rows",
                phi.times.len(),
                curve.len()
            )));
        }
        Ok(Self { case_id, phi, curve })
    }

    pub fn from_record(record: &SimulationRecord, sensors: &SensorSet) -> Result<Self> {
        let case_id = record.case_id.ok_or_else(|| Error::Data("record has no case id".into()))?;
        Self::new(case_id, PhiSeries::from_record(record, sensors)?, compute_load_curve(record)?)
    }

    /// Labels of this case under a per-case scheme.
    pub fn labels(&self, scheme: LabelScheme) -> Result<LabelVector> {
        match scheme {
            LabelScheme::Binary(c) => label_binary(&self.curve, c),
            LabelScheme::Multi3 => label_multi3(&self.curve),
            LabelScheme::Multi4(t) => label_multi4(&self.phi.to_patterns(), t),
            LabelScheme::Location9 => Err(Error::Labeling("location classes span several cases".into())),
        }
    }
}

/// Raw sensor damage rows of a task and their labels. Labels always come
/// from the clean simulation; features can be rebuilt from perturbed damage.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub task: Task,
    pub phi: Array2<f64>,
    pub labels: LabelVector,
}

impl TaskData {
    /// `scheme` labels each case; for [`Task::Location`] it is the
    /// three-class base scheme, with [`LabelScheme::Location9`] meaning the
    /// damage-threshold labels with default thresholds.
    pub fn build(task: Task, scheme: LabelScheme, cases: &[CaseData]) -> Result<Self> {
        let find = |id: u8| {
            cases.iter().find(|c| c.case_id == id).ok_or_else(|| Error::Data(format!("no data for case {id}")))
        };
        let parts = task.cases().into_iter().map(find).collect::<Result<Vec<_>>>()?;
        let width = parts[0].phi.sensor_ids.clone();
        if parts.iter().any(|c| c.phi.sensor_ids != width) {
            return Err(Error::Data("cases use different sensor sets".into()));
        }
        let views: Vec<_> = parts.iter().map(|c| c.phi.phi.view()).collect();
        let phi = concatenate(Axis(0), &views).map_err(|e| Error::Data(e.to_string()))?;
        let labels = match task {
            Task::Presence { .. } => parts[0].labels(scheme)?,
            Task::Location => {
                let base = match scheme {
                    LabelScheme::Location9 => LabelScheme::Multi4(Default::default()),
                    s => s,
                };
                let per_case = parts.iter().map(|c| Ok((c.case_id, c.labels(base)?))).collect::<Result<Vec<_>>>()?;
                label_location9(&per_case)?
            }
        };
        Ok(Self { task, phi, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Clean patterns and labels.
    pub fn dataset(&self) -> Result<Dataset> {
        self.dataset_from(&self.phi)
    }

    /// Patterns `g(φ)`, clipped to `[0, 1]`, from a damage matrix shaped like
    /// [`phi`](Self::phi), with the clean labels.
    pub fn dataset_from(&self, phi: &Array2<f64>) -> Result<Dataset> {
        if phi.dim() != self.phi.dim() {
            return Err(Error::Data(format!("damage matrix {:?}, expected {:?}", phi.dim(), self.phi.dim())));
        }
        Dataset::new(patterns(phi), self.labels.labels.clone(), self.labels.class_domain.clone())
    }
}

/// Degradation patterns of a damage matrix, clipped to `[0, 1]`.
pub fn patterns(phi: &Array2<f64>) -> Array2<f64> {
    phi.mapv(|p| degradation(p).clamp(0.0, 1.0))
}
