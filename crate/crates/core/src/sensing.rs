//! Sensor time series and the degradation pattern matrix fed to the
//! classifiers: one row per time step, one column per sensor, entries
//! `g(φ) = (1 − φ)²`.

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::constitutive::degradation;
use crate::mesh::SensorSet;
use crate::timestepper::SimulationRecord;
use crate::{Error, Result};

/// Raw damage histories at the sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiSeries {
    pub times: Vec<f64>,
    pub sensor_ids: Vec<usize>,
    pub phi: Array2<f64>,
    pub case_id: Option<u8>,
}

impl PhiSeries {
    pub fn new(times: Vec<f64>, sensor_ids: Vec<usize>, phi: Array2<f64>, case_id: Option<u8>) -> Result<Self> {
        check_shape(&times, &sensor_ids, &phi)?;
        Ok(Self { times, sensor_ids, phi, case_id })
    }

    /// Sensor columns of a simulation record, in the order of `sensors`.
    pub fn from_record(record: &SimulationRecord, sensors: &SensorSet) -> Result<Self> {
        let cols = sensors
            .node_ids
            .iter()
            .map(|id| {
                record
                    .sensor_ids
                    .iter()
                    .position(|r| r == id)
                    .ok_or_else(|| Error::Data(format!("record has no column for sensor node {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if record.sensor_phi.len() != record.times.len() {
            return Err(Error::Data("record has a different number of rows and times".into()));
        }
        let mut phi = Array2::zeros((record.times.len(), cols.len()));
        for (i, row) in record.sensor_phi.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                phi[[i, j]] = *row
                    .get(c)
                    .ok_or_else(|| Error::Data(format!("record row {i} is missing sensor column {c}")))?;
            }
        }
        Self::new(record.times.clone(), sensors.node_ids.clone(), phi, record.case_id)
    }

    pub fn to_patterns(&self) -> TimeSeriesMatrix {
        TimeSeriesMatrix {
            values: self.phi.mapv(degradation),
            times: self.times.clone(),
            sensor_ids: self.sensor_ids.clone(),
            case_id: self.case_id,
        }
    }
}

/// Pattern matrix of degradation values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesMatrix {
    pub values: Array2<f64>,
    pub times: Vec<f64>,
    pub sensor_ids: Vec<usize>,
    pub case_id: Option<u8>,
}

impl TimeSeriesMatrix {
    pub fn new(values: Array2<f64>, times: Vec<f64>, sensor_ids: Vec<usize>, case_id: Option<u8>) -> Result<Self> {
        check_shape(&times, &sensor_ids, &values)?;
        Ok(Self { values, times, sensor_ids, case_id })
    }

    pub fn n_steps(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_sensors(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Stacks matrices with identical sensor columns; `case_id` is kept only
    /// when all parts agree.
    pub fn concat(parts: &[&TimeSeriesMatrix]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Data("nothing to concatenate".into()))?;
        if parts.iter().any(|p| p.sensor_ids != first.sensor_ids) {
            return Err(Error::Data("pattern matrices have different sensor columns".into()));
        }
        let views: Vec<_> = parts.iter().map(|p| p.values.view()).collect();
        let values = ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Data(e.to_string()))?;
        let times = parts.iter().flat_map(|p| p.times.iter().copied()).collect();
        let case_id = if parts.iter().all(|p| p.case_id == first.case_id) { first.case_id } else { None };
        Ok(Self { values, times, sensor_ids: first.sensor_ids.clone(), case_id })
    }
}

fn check_shape(times: &[f64], sensor_ids: &[usize], values: &Array2<f64>) -> Result<()> {
    if values.nrows() != times.len() || values.ncols() != sensor_ids.len() {
        return Err(Error::Data(format!(
            "matrix is {}x{} but there are {} times and {} sensors",
            values.nrows(),
            values.ncols(),
            times.len(),
            sensor_ids.len()
        )));
    }
    if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite value {v} at row {i}, column {j}")));
    }
    Ok(())
}

/// Degradation patterns at the sensors of a finished run.
pub fn extract_patterns(record: &SimulationRecord, sensors: &SensorSet) -> Result<TimeSeriesMatrix> {
    Ok(PhiSeries::from_record(record, sensors)?.to_patterns())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::FieldState;
    use crate::timestepper::StopReason;
    use ndarray::array;

    fn record(rows: Vec<Vec<f64>>, ids: Vec<usize>) -> SimulationRecord {
        let m = rows.len();
        SimulationRecord {
            case_id: Some(2),
            dt: 0.1,
            times: (0..m).map(|i| i as f64 * 0.1).collect(),
            sensor_ids: ids,
            sensor_phi: rows,
            reaction: vec![0.0; m],
            applied_disp: vec![0.0; m],
            phi_min: vec![0.0; m],
            phi_max: vec![0.0; m],
            fat_increment_min: vec![0.0; m],
            stop_reason: StopReason::TimeLimit,
            failure_time: None,
            final_state: FieldState::virgin(1),
        }
    }

    fn sensors(ids: Vec<usize>) -> SensorSet {
        SensorSet { node_ids: ids, layout_descriptor: String::new(), landmarks: vec![] }
    }

    #[test]
    fn virgin_run_gives_ones() {
        let rec = record(vec![vec![0.0; 3]; 4], vec![5, 6, 7]);
        let p = extract_patterns(&rec, &sensors(vec![5, 6, 7])).unwrap();
        assert_eq!(p.values.dim(), (4, 3));
        assert!(p.values.iter().all(|&g| g == 1.0));
        assert_eq!(p.case_id, Some(2));
    }

    #[test]
    fn failed_column_and_reordering() {
        let rec = record(vec![vec![0.0, 0.5], vec![1.0, 0.5], vec![1.0, 0.9]], vec![3, 9]);
        let p = extract_patterns(&rec, &sensors(vec![9, 3])).unwrap();
        assert_eq!(p.sensor_ids, vec![9, 3]);
        assert_eq!(p.values, array![[0.25, 1.0], [0.25, 0.0], [degradation(0.9), 0.0]]);
        for (i, row) in rec.sensor_phi.iter().enumerate() {
            assert_eq!(p.row(i)[1], degradation(row[0]));
        }
    }

    #[test]
    fn missing_sensor_is_a_data_error() {
        let rec = record(vec![vec![0.0]], vec![1]);
        assert!(matches!(extract_patterns(&rec, &sensors(vec![2])), Err(Error::Data(_))));
    }

    #[test]
    fn shape_and_concat_checks() {
        assert!(TimeSeriesMatrix::new(Array2::zeros((2, 2)), vec![0.0], vec![0, 1], None).is_err());
        assert!(TimeSeriesMatrix::new(array![[f64::NAN]], vec![0.0], vec![0], None).is_err());
        let a = TimeSeriesMatrix::new(array![[1.0, 0.5]], vec![0.0], vec![0, 1], Some(1)).unwrap();
        let b = TimeSeriesMatrix::new(array![[0.2, 0.1], [0.0, 0.0]], vec![0.0, 0.1], vec![0, 1], Some(2)).unwrap();
        let c = TimeSeriesMatrix::concat(&[&a, &b]).unwrap();
        assert_eq!(c.n_steps(), 3);
        assert_eq!(c.case_id, None);
        let d = TimeSeriesMatrix::new(array![[1.0]], vec![0.0], vec![4], None).unwrap();
        assert!(TimeSeriesMatrix::concat(&[&a, &d]).is_err());
    }
}
