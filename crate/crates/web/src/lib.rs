//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations are exposed: a mesh preview, a coarse damage
//! simulation stepped in chunks so the page stays responsive, and a k-NN
//! noise study on the finished run.

use ndarray::Array2;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use pfl_core::classify::{CaseData, Metric, Task};
use pfl_core::labeling::{LabelScheme, LoadCurve};
use pfl_core::mesh::{build_specimen, select_sensors, GridSpec, Mesh, SensorSet, SpecimenParams};
use pfl_core::sensing::PhiSeries;
use pfl_core::timestepper::{CaseConfig, Simulation};
use pfl_core::uq::{mc_accuracy, Algorithm, UqSpec};

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[derive(Serialize)]
struct MeshView<'a> {
    nodes: &'a [[f64; 2]],
    elements: &'a [[usize; 3]],
    fixed: &'a [usize],
    loaded: &'a [usize],
    sensors: &'a [usize],
    landmarks: &'a [(String, usize)],
}

fn specimen(edge_mm: f64) -> Result<(Mesh, SensorSet), JsValue> {
    let params = SpecimenParams::default();
    let mesh = build_specimen(&params, edge_mm * 1e-3).map_err(js_err)?;
    let sensors = select_sensors(&mesh, &GridSpec::coarse_to_fine(&params)).map_err(js_err)?;
    Ok((mesh, sensors))
}

/// Specimen mesh and sensor layout at the given element size (mm), as JSON.
#[wasm_bindgen]
pub fn mesh_preview(edge_mm: f64) -> Result<String, JsValue> {
    let (mesh, sensors) = specimen(edge_mm)?;
    let view = MeshView {
        nodes: &mesh.nodes,
        elements: &mesh.elements,
        fixed: &mesh.fixed_set,
        loaded: &mesh.loaded_set,
        sensors: &sensors.node_ids,
        landmarks: &sensors.landmarks,
    };
    serde_json::to_string(&view).map_err(js_err)
}

/// One of the six cases running on a coarse mesh.
#[wasm_bindgen]
pub struct DemoRun {
    case_id: u8,
    sim: Simulation,
    sensors: SensorSet,
    t_max: f64,
    times: Vec<f64>,
    disp: Vec<f64>,
    force: Vec<f64>,
    sensor_phi: Vec<Vec<f64>>,
    peak: f64,
    done: bool,
}

#[derive(Serialize)]
struct Progress<'a> {
    done: bool,
    t: f64,
    phi: &'a [f64],
    times: &'a [f64],
    disp: &'a [f64],
    force: &'a [f64],
    /// `g(φ)` at the mid-gauge and fillet sensors.
    mid_gauge: Vec<f64>,
    fillet: Vec<f64>,
}

#[wasm_bindgen]
impl DemoRun {
    #[wasm_bindgen(constructor)]
    pub fn new(case_id: u8, edge_mm: f64, t_max: f64) -> Result<DemoRun, JsValue> {
        let (mesh, sensors) = specimen(edge_mm)?;
        let config = CaseConfig::for_case(case_id).map_err(js_err)?;
        let sim = Simulation::new(&config, &mesh).map_err(js_err)?;
        let first = sensors.node_ids.iter().map(|&i| sim.state().phi[i]).collect();
        Ok(DemoRun {
            case_id,
            sim,
            sensors,
            t_max,
            times: vec![0.0],
            disp: vec![0.0],
            force: vec![0.0],
            sensor_phi: vec![first],
            peak: 0.0,
            done: false,
        })
    }

    /// Takes up to `steps` steps and returns the progress as JSON. The run
    /// ends when the force falls below 5% of its peak or at `t_max`.
    pub fn advance(&mut self, steps: usize) -> Result<String, JsValue> {
        for _ in 0..steps {
            if self.done {
                break;
            }
            let r = self.sim.step().map_err(js_err)?;
            self.times.push(r.t);
            self.disp.push(r.applied_disp);
            self.force.push(r.reaction);
            self.sensor_phi.push(self.sensors.node_ids.iter().map(|&i| self.sim.state().phi[i]).collect());
            self.peak = self.peak.max(r.reaction);
            self.done = (self.peak > 0.0 && r.reaction < 0.05 * self.peak) || r.t >= self.t_max;
        }
        let g_at = |name: &str| -> Vec<f64> {
            match self.sensors.landmark(name) {
                Some(j) => self.sensor_phi.iter().map(|row| (1.0 - row[j]).powi(2)).collect(),
                None => Vec::new(),
            }
        };
        let p = Progress {
            done: self.done,
            t: self.sim.state().t,
            phi: &self.sim.state().phi,
            times: &self.times,
            disp: &self.disp,
            force: &self.force,
            mid_gauge: g_at("mid_gauge"),
            fillet: g_at("fillet"),
        };
        serde_json::to_string(&p).map_err(js_err)
    }

    /// k-NN presence accuracy (three-class load-curve labels) of the run so
    /// far under Gaussian damage noise, `runs` random splits per level.
    /// Returns JSON rows `{noise_std, mean, std}`.
    pub fn noise_study(&self, noise_stds: Vec<f64>, runs: usize, seed: u64) -> Result<String, JsValue> {
        let n = self.times.len();
        let m = self.sensors.len();
        let phi = Array2::from_shape_fn((n, m), |(i, j)| self.sensor_phi[i][j]);
        let series = PhiSeries::new(self.times.clone(), self.sensors.node_ids.clone(), phi, Some(self.case_id))
            .map_err(js_err)?;
        let curve = LoadCurve::new(self.times.clone(), self.disp.clone(), self.force.clone()).map_err(js_err)?;
        let case = CaseData::new(self.case_id, series, curve).map_err(js_err)?;
        let spec = UqSpec {
            runs,
            noise_stds,
            task: Task::Presence { case_id: self.case_id },
            scheme: LabelScheme::Multi3,
            algorithms: vec![Algorithm::Knn],
            base_seed: seed,
            k: 2,
            metric: Metric::Cosine,
            ..UqSpec::default()
        };
        let result = mc_accuracy(&spec, &[case]).map_err(js_err)?;
        let rows: Vec<_> = result
            .trend(Algorithm::Knn)
            .into_iter()
            .map(|c| serde_json::json!({ "noise_std": c.noise_std, "mean": c.mean, "std": c.std }))
            .collect();
        serde_json::to_string(&rows).map_err(js_err)
    }
}
