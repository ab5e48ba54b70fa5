//! Staggered semi-implicit time integration: backward Euler for damage,
//! Newmark for the displacement and the trapezoidal rule for fatigue.
//!
//! One step from `t_n` to `t_{n+1}` runs, in order:
//!
//! 1. damage operators assembled from the state at `t_n`, then the damage solve;
//! 2. degraded stiffness from the new damage, then the Newmark solve;
//! 3. fatigue rate at `t_{n+1}` and the trapezoidal fatigue update.

use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_damage, assemble_fatigue_rate, assemble_motion, DamageMass, DamageOperators, Discretization, FieldState,
    MotionOperators,
};
use crate::cases;
use crate::constitutive::{potential_hf_prime, MaterialParams};
use crate::mesh::{Mesh, SensorSet};
use crate::sparse::{CsrMatrix, LinearSolver, SpdSolver};
use crate::{Error, Result};

/// Newmark parameters and the derived step coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewmarkCoeffs {
    pub gamma_tilde: f64,
    pub beta_tilde: f64,
    pub dt: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub alpha5: f64,
    pub alpha6: f64,
}

impl NewmarkCoeffs {
    pub fn new(gamma_tilde: f64, beta_tilde: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
        }
        if !(beta_tilde > 0.0 && beta_tilde.is_finite()) || !gamma_tilde.is_finite() {
            return Err(Error::Parameter(format!(
                "Newmark parameters must be finite with beta > 0, got gamma={gamma_tilde}, beta={beta_tilde}"
            )));
        }
        let (g, b) = (gamma_tilde, beta_tilde);
        Ok(Self {
            gamma_tilde: g,
            beta_tilde: b,
            dt,
            alpha1: 1.0 / (b * dt * dt),
            alpha2: 1.0 / (b * dt),
            alpha3: (1.0 - 2.0 * b) / (2.0 * b),
            alpha4: g / (b * dt),
            alpha5: 1.0 - g / b,
            alpha6: (1.0 - g / (2.0 * b)) * dt,
        })
    }
}

pub fn newmark_alphas(gamma_tilde: f64, beta_tilde: f64, dt: f64) -> Result<NewmarkCoeffs> {
    NewmarkCoeffs::new(gamma_tilde, beta_tilde, dt)
}

/// Support at the fixed end of the specimen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedEnd {
    /// Both displacement components held at zero.
    #[default]
    Clamped,
    /// Axial displacement held at zero; the transverse one only at the node
    /// nearest the specimen axis, so the end can contract freely.
    Roller,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    /// Damage level counted as fully broken.
    pub phi_broken: f64,
    /// Consecutive steps with a broken node before stopping.
    pub broken_steps: usize,
    /// Stop once the force falls below this fraction of its running peak.
    pub force_drop: f64,
    pub t_max: f64,
    /// Keep going after the damage saturates; the saturation then only fixes
    /// the failure time. Labels need the force decay past that point.
    #[serde(default)]
    pub continue_after_failure: bool,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { phi_broken: 0.999, broken_steps: 10, force_drop: 0.05, t_max: 2.0, continue_after_failure: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    DamageSaturated,
    ForceDrop,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    /// Row of the case table the material must reproduce, if any.
    pub case_id: Option<u8>,
    pub material: MaterialParams,
    pub dt: f64,
    pub pull_rate: f64,
    #[serde(default)]
    pub stop: StopRule,
    #[serde(default = "default_gamma_tilde")]
    pub newmark_gamma: f64,
    #[serde(default = "default_beta_tilde")]
    pub newmark_beta: f64,
    #[serde(default)]
    pub solver: LinearSolver,
    #[serde(default)]
    pub fixed_end: FixedEnd,
    #[serde(default)]
    pub damage_mass: DamageMass,
}

fn default_gamma_tilde() -> f64 {
    0.5
}

fn default_beta_tilde() -> f64 {
    0.25
}

impl CaseConfig {
    /// Configuration of one of the built-in cases with default numerics.
    pub fn for_case(id: u8) -> Result<Self> {
        let t = cases::table();
        Ok(Self {
            case_id: Some(id),
            material: t.material(id)?,
            dt: t.dt,
            pull_rate: t.pull_rate,
            stop: StopRule::default(),
            newmark_gamma: default_gamma_tilde(),
            newmark_beta: default_beta_tilde(),
            solver: LinearSolver::default(),
            fixed_end: FixedEnd::default(),
            damage_mass: DamageMass::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        if let Some(id) = self.case_id {
            cases::check_matches(id, &self.material)?;
        }
        if !(self.pull_rate.is_finite()) {
            return Err(Error::Config(format!("pull rate must be finite, got {}", self.pull_rate)));
        }
        let s = &self.stop;
        if !(s.t_max > 0.0) || s.broken_steps == 0 || !(0.0..1.0).contains(&s.force_drop) {
            return Err(Error::Config("stop rule needs t_max > 0, broken_steps > 0, force_drop in [0,1)".into()));
        }
        self.newmark().map(|_| ())
    }

    pub fn newmark(&self) -> Result<NewmarkCoeffs> {
        NewmarkCoeffs::new(self.newmark_gamma, self.newmark_beta, self.dt)
    }
}

/// Prescribed displacement dofs moving at constant rates, `u = rate · t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prescribed {
    pub dofs: Vec<usize>,
    pub rates: Vec<f64>,
    /// Axial dofs of the loaded end, where the reaction force is summed.
    pub loaded_x: Vec<usize>,
}

impl Prescribed {
    pub fn tensile(mesh: &Mesh, fixed_end: FixedEnd, pull_rate: f64) -> Self {
        let mut dofs = Vec::new();
        let mut rates = Vec::new();
        match fixed_end {
            FixedEnd::Clamped => {
                for &n in &mesh.fixed_set {
                    dofs.extend([2 * n, 2 * n + 1]);
                    rates.extend([0.0, 0.0]);
                }
            }
            FixedEnd::Roller => {
                let [_, ymin, _, ymax] = mesh.bounding_box();
                let mid = 0.5 * (ymin + ymax);
                let anchor = mesh
                    .fixed_set
                    .iter()
                    .copied()
                    .min_by(|&a, &b| {
                        let da = (mesh.nodes[a][1] - mid).abs();
                        let db = (mesh.nodes[b][1] - mid).abs();
                        da.total_cmp(&db).then(a.cmp(&b))
                    })
                    .expect("fixed set is non-empty");
                for &n in &mesh.fixed_set {
                    dofs.push(2 * n);
                    rates.push(0.0);
                }
                dofs.push(2 * anchor + 1);
                rates.push(0.0);
            }
        }
        let loaded_x: Vec<usize> = mesh.loaded_set.iter().map(|&n| 2 * n).collect();
        for &d in &loaded_x {
            dofs.push(d);
            rates.push(pull_rate);
        }
        Self { dofs, rates, loaded_x }
    }

    pub fn values_at(&self, t: f64) -> Vec<f64> {
        self.rates.iter().map(|r| r * t).collect()
    }
}

/// Backward-Euler damage update
/// `[M_φ − Δt (P_φ + K_c)] φ_{n+1} = M_φ φ_n + Δt (w_b + w_c)`.
pub fn step_damage(
    phi_n: &[f64],
    ops: &DamageOperators,
    mass_phi: &CsrMatrix,
    dt: f64,
    solver: &mut SpdSolver,
    t: f64,
) -> Result<Vec<f64>> {
    let mut system = mass_phi.clone();
    system.add_scaled(-dt, &ops.p_phi);
    system.add_scaled(-dt, &ops.k_c);
    let mut rhs = mass_phi.mul_vec(phi_n);
    for (i, r) in rhs.iter_mut().enumerate() {
        *r += dt * (ops.w_b[i] + ops.w_c[i]);
    }
    let phi = solve_checked(solver, &system, &rhs, phi_n, t, "damage")?;
    if ops.fatigue_drive.is_empty() {
        return Ok(phi);
    }
    resolve_fatigue_kink(phi, phi_n, ops, &system, &rhs, dt, solver, t)
}

#[derive(Clone, Copy, PartialEq)]
enum Drive {
    Full,
    Held,
    Off,
}

/// Fatigue potential branch at `φ = 1` for the lumped damage system.
///
/// The explicit load drives nodes with `0 ≤ φ_n ≤ 1`. A node pushed past 1
/// leaves the branch where that load acts, so it is held at `φ = 1` with the
/// partial load that keeps it there. Held nodes whose required load exceeds
/// the available one are released, as are those needing a negative load.
#[allow(clippy::too_many_arguments)]
fn resolve_fatigue_kink(
    mut phi: Vec<f64>,
    phi_n: &[f64],
    ops: &DamageOperators,
    system: &CsrMatrix,
    rhs: &[f64],
    dt: f64,
    solver: &mut SpdSolver,
    t: f64,
) -> Result<Vec<f64>> {
    const MAX_SWEEPS: usize = 50;
    let n = phi.len();
    let load: Vec<f64> = (0..n)
        .map(|i| if potential_hf_prime(phi_n[i]) != 0.0 { dt * ops.fatigue_drive[i] } else { 0.0 })
        .collect();
    let base: Vec<f64> = rhs.iter().zip(&load).map(|(r, l)| r - l).collect();
    let mut drive = vec![Drive::Full; n];
    for _ in 0..MAX_SWEEPS {
        let ax = system.mul_vec(&phi);
        let mut changed = false;
        for i in 0..n {
            if load[i] <= 0.0 {
                continue;
            }
            let next = match drive[i] {
                Drive::Full if phi[i] > 1.0 => Drive::Held,
                Drive::Off if phi[i] < 1.0 => Drive::Held,
                Drive::Held => {
                    let share = (ax[i] - base[i]) / load[i];
                    if share > 1.0 {
                        Drive::Full
                    } else if share < 0.0 {
                        Drive::Off
                    } else {
                        Drive::Held
                    }
                }
                d => d,
            };
            changed |= next != drive[i];
            drive[i] = next;
        }
        if !changed {
            return Ok(phi);
        }
        let mut a = system.clone();
        let mut b: Vec<f64> = (0..n)
            .map(|i| if drive[i] == Drive::Full { base[i] + load[i] } else { base[i] })
            .collect();
        let held: Vec<usize> = (0..n).filter(|&i| drive[i] == Drive::Held).collect();
        a.apply_dirichlet(&mut b, &held, &vec![1.0; held.len()]);
        phi = solve_checked(solver, &a, &b, &phi, t, "damage")?;
    }
    Err(Error::Step { t, reason: format!("fatigue branch did not settle in {MAX_SWEEPS} sweeps") })
}

/// Newmark update of displacement, velocity and acceleration to `t_next`.
/// Prescribed dofs take their ramp value and rate at `t_next`; their
/// accelerations are zero.
#[allow(clippy::too_many_arguments)]
pub fn step_motion(
    state_n: &FieldState,
    ops: &MotionOperators,
    mass: &CsrMatrix,
    k_v: &CsrMatrix,
    coeffs: &NewmarkCoeffs,
    prescribed: &Prescribed,
    t_next: f64,
    solver: &mut SpdSolver,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let c = coeffs;
    let mut system = mass.clone();
    system.scale(c.alpha1);
    system.add_scaled(-1.0, &ops.k_u);
    system.add_scaled(-c.alpha4, k_v);

    let nd = state_n.u.len();
    let mut mass_part = vec![0.0; nd];
    let mut visc_part = vec![0.0; nd];
    for i in 0..nd {
        mass_part[i] = c.alpha3 * state_n.acc[i] + c.alpha2 * state_n.v[i] + c.alpha1 * state_n.u[i];
        visc_part[i] = c.alpha6 * state_n.acc[i] + c.alpha5 * state_n.v[i] - c.alpha4 * state_n.u[i];
    }
    let mut rhs = mass.mul_vec(&mass_part);
    let kv = k_v.mul_vec(&visc_part);
    for i in 0..nd {
        rhs[i] += kv[i] + ops.w_a[i];
    }
    let values = prescribed.values_at(t_next);
    system.apply_dirichlet(&mut rhs, &prescribed.dofs, &values);
    let u = solve_checked(solver, &system, &rhs, &state_n.u, t_next, "motion")?;

    let mut acc = vec![0.0; nd];
    let mut v = vec![0.0; nd];
    for i in 0..nd {
        let du = u[i] - state_n.u[i];
        acc[i] = c.alpha1 * du - c.alpha2 * state_n.v[i] - c.alpha3 * state_n.acc[i];
        v[i] = c.alpha4 * du + c.alpha5 * state_n.v[i] + c.alpha6 * state_n.acc[i];
    }
    for (&d, &rate) in prescribed.dofs.iter().zip(&prescribed.rates) {
        v[d] = rate;
        acc[d] = 0.0;
    }
    Ok((u, v, acc))
}

/// Trapezoidal fatigue update `F_{n+1} = F_n + Δt/2 · M_F⁻¹ (w_d(n+1) + w_d(n))`
/// with a diagonal fatigue mass.
pub fn step_fatigue(fat_n: &[f64], w_d_n: &[f64], w_d_next: &[f64], mass_fat: &[f64], dt: f64) -> Result<Vec<f64>> {
    fat_n
        .iter()
        .zip(w_d_n.iter().zip(w_d_next))
        .zip(mass_fat)
        .map(|((&f, (&a, &b)), &m)| {
            if m > 0.0 {
                Ok(f + 0.5 * dt * (a + b) / m)
            } else {
                Err(Error::Step { t: f64::NAN, reason: "fatigue mass has a non-positive entry".into() })
            }
        })
        .collect()
}

fn solve_checked(
    solver: &mut SpdSolver,
    system: &CsrMatrix,
    rhs: &[f64],
    guess: &[f64],
    t: f64,
    which: &str,
) -> Result<Vec<f64>> {
    let x = solver
        .solve(system, rhs, guess)
        .map_err(|reason| Error::Step { t, reason: format!("{which} solve failed: {reason}") })?;
    let ax = system.mul_vec(&x);
    let scale = rhs.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let res = ax.iter().zip(rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / scale;
    if !(res < 1e-6) {
        return Err(Error::Step { t, reason: format!("{which} solve residual {res:.3e}") });
    }
    Ok(x)
}

/// Axial reaction at the loaded end: the sum of internal forces
/// `−(K_u u + K_v v + w_a)` over its axial dofs.
pub fn reaction_force(ops: &MotionOperators, k_v: &CsrMatrix, state: &FieldState, loaded_x: &[usize]) -> f64 {
    loaded_x
        .iter()
        .map(|&d| {
            let ku: f64 = ops.k_u.row(d).map(|(j, a)| a * state.u[j]).sum();
            let kv: f64 = k_v.row(d).map(|(j, a)| a * state.v[j]).sum();
            -(ku + kv + ops.w_a[d])
        })
        .sum()
}

/// Phases of one step, in the order they ran, with the time and displacement
/// norm the damage operators were assembled from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepTrace {
    pub phases: Vec<&'static str>,
    pub damage_input_t: f64,
    pub damage_input_u_norm: f64,
    pub u_n_norm: f64,
}

/// Per-step scalar diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub t: f64,
    pub applied_disp: f64,
    pub reaction: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub fat_increment_min: f64,
}

/// A running simulation that owns its discretization, solvers and state.
pub struct Simulation {
    disc: Discretization,
    config: CaseConfig,
    coeffs: NewmarkCoeffs,
    prescribed: Prescribed,
    state: FieldState,
    steps_taken: usize,
    w_d: Vec<f64>,
    damage_solver: SpdSolver,
    motion_solver: SpdSolver,
    trace: StepTrace,
}

impl Simulation {
    pub fn new(config: &CaseConfig, mesh: &Mesh) -> Result<Self> {
        config.validate()?;
        let disc = Discretization::new(mesh, &config.material, config.damage_mass)?;
        let state = FieldState::virgin(mesh.n_nodes());
        let w_d = assemble_fatigue_rate(&disc, &state, &config.material);
        let damage_solver = SpdSolver::new(config.solver, disc.scalar_pattern());
        let motion_solver = SpdSolver::new(config.solver, disc.vector_pattern());
        Ok(Self {
            prescribed: Prescribed::tensile(mesh, config.fixed_end, config.pull_rate),
            coeffs: config.newmark()?,
            config: config.clone(),
            disc,
            state,
            steps_taken: 0,
            w_d,
            damage_solver,
            motion_solver,
            trace: StepTrace::default(),
        })
    }

    pub fn state(&self) -> &FieldState {
        &self.state
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn last_trace(&self) -> &StepTrace {
        &self.trace
    }

    pub fn step(&mut self) -> Result<StepReport> {
        let params = &self.config.material;
        let dt = self.coeffs.dt;
        // Times come from the step counter so they stay evenly spaced.
        let t_next = (self.steps_taken + 1) as f64 * dt;
        let mut trace = StepTrace { u_n_norm: norm(&self.state.u), ..Default::default() };

        let damage = assemble_damage(&self.disc, &self.state, params);
        trace.phases.push("assemble_damage");
        trace.damage_input_t = self.state.t;
        trace.damage_input_u_norm = norm(&self.state.u);
        let phi = step_damage(&self.state.phi, &damage, &self.disc.mass_phi, dt, &mut self.damage_solver, t_next)?;
        trace.phases.push("step_damage");

        let motion = assemble_motion(&self.disc, &phi, params);
        trace.phases.push("assemble_motion");
        let (u, v, acc) = step_motion(
            &self.state,
            &motion,
            &self.disc.mass,
            &self.disc.k_v,
            &self.coeffs,
            &self.prescribed,
            t_next,
            &mut self.motion_solver,
        )?;
        trace.phases.push("step_motion");

        let mut next = FieldState { u, v, acc, phi, fat: Vec::new(), t: t_next };
        let w_d_next = assemble_fatigue_rate(&self.disc, &next, params);
        next.fat = step_fatigue(&self.state.fat, &self.w_d, &w_d_next, &self.disc.mass_fat, dt)
            .map_err(|e| match e {
                Error::Step { reason, .. } => Error::Step { t: t_next, reason },
                other => other,
            })?;
        trace.phases.push("step_fatigue");

        let finite = next.u.iter().chain(&next.v).chain(&next.phi).chain(&next.fat).all(|v| v.is_finite());
        if !finite {
            let worst = next.phi.iter().copied().fold(f64::NAN, f64::max);
            return Err(Error::Step { t: t_next, reason: format!("non-finite field values (max phi {worst})") });
        }

        let reaction = reaction_force(&motion, &self.disc.k_v, &next, &self.prescribed.loaded_x);
        let (phi_min, phi_max) = min_max(&next.phi);
        let fat_increment_min = next
            .fat
            .iter()
            .zip(&self.state.fat)
            .map(|(a, b)| a - b)
            .fold(f64::INFINITY, f64::min);
        self.state = next;
        self.steps_taken += 1;
        self.w_d = w_d_next;
        self.trace = trace;
        Ok(StepReport {
            t: t_next,
            applied_disp: self.config.pull_rate * t_next,
            reaction,
            phi_min,
            phi_max,
            fat_increment_min,
        })
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Everything a run leaves behind. Row `i` of every per-step array belongs
/// to `times[i]`; row 0 is the unloaded initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub case_id: Option<u8>,
    pub dt: f64,
    pub times: Vec<f64>,
    /// Mesh indices of the sensor nodes, in column order.
    pub sensor_ids: Vec<usize>,
    /// Raw damage at the sensors, one row per step.
    pub sensor_phi: Vec<Vec<f64>>,
    pub reaction: Vec<f64>,
    pub applied_disp: Vec<f64>,
    pub phi_min: Vec<f64>,
    pub phi_max: Vec<f64>,
    pub fat_increment_min: Vec<f64>,
    pub stop_reason: StopReason,
    /// First step of the first full run of broken steps, or else the step
    /// where the force dropped. `None` when neither happened.
    pub failure_time: Option<f64>,
    pub final_state: FieldState,
}

impl SimulationRecord {
    pub fn n_steps(&self) -> usize {
        self.times.len()
    }

    pub fn peak_force_time(&self) -> f64 {
        let k = self
            .reaction
            .iter()
            .enumerate()
            .fold(0, |best, (i, &f)| if f > self.reaction[best] { i } else { best });
        self.times[k]
    }
}

/// Runs a configuration from the virgin state until the stop rule fires.
pub fn run_case(config: &CaseConfig, mesh: &Mesh, sensors: &SensorSet) -> Result<SimulationRecord> {
    run_case_with(config, mesh, sensors, |_| {})
}

/// [`run_case`] with a callback after every step.
pub fn run_case_with(
    config: &CaseConfig,
    mesh: &Mesh,
    sensors: &SensorSet,
    mut on_step: impl FnMut(&StepReport),
) -> Result<SimulationRecord> {
    if let Some(&bad) = sensors.node_ids.iter().find(|&&id| id >= mesh.n_nodes()) {
        return Err(Error::Config(format!("sensor node {bad} is not in the mesh")));
    }
    let mut sim = Simulation::new(config, mesh)?;
    let sample = |s: &FieldState| sensors.node_ids.iter().map(|&i| s.phi[i]).collect::<Vec<_>>();
    let mut rec = SimulationRecord {
        case_id: config.case_id,
        dt: config.dt,
        times: vec![0.0],
        sensor_ids: sensors.node_ids.clone(),
        sensor_phi: vec![sample(sim.state())],
        reaction: vec![0.0],
        applied_disp: vec![0.0],
        phi_min: vec![0.0],
        phi_max: vec![0.0],
        fat_increment_min: vec![0.0],
        stop_reason: StopReason::TimeLimit,
        failure_time: None,
        final_state: sim.state().clone(),
    };
    let stop = config.stop;
    let mut broken_run = 0;
    let mut first_broken = 0.0;
    let mut peak: f64 = 0.0;
    loop {
        let report = sim.step()?;
        on_step(&report);
        rec.times.push(report.t);
        rec.sensor_phi.push(sample(sim.state()));
        rec.reaction.push(report.reaction);
        rec.applied_disp.push(report.applied_disp);
        rec.phi_min.push(report.phi_min);
        rec.phi_max.push(report.phi_max);
        rec.fat_increment_min.push(report.fat_increment_min);

        if report.phi_max >= stop.phi_broken {
            if broken_run == 0 {
                first_broken = report.t;
            }
            broken_run += 1;
        } else {
            broken_run = 0;
        }
        peak = peak.max(report.reaction);
        if broken_run >= stop.broken_steps && rec.failure_time.is_none() {
            rec.failure_time = Some(first_broken);
        }
        let reason = if broken_run >= stop.broken_steps && !stop.continue_after_failure {
            Some(StopReason::DamageSaturated)
        } else if peak > 0.0 && report.reaction < stop.force_drop * peak {
            Some(StopReason::ForceDrop)
        } else if report.t > stop.t_max {
            Some(StopReason::TimeLimit)
        } else {
            None
        };
        if let Some(r) = reason {
            rec.stop_reason = r;
            if r == StopReason::ForceDrop && rec.failure_time.is_none() {
                rec.failure_time = Some(report.t);
            }
            break;
        }
    }
    rec.final_state = sim.state().clone();
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_specimen, GridSpec, SpecimenParams};

    fn bar() -> (SpecimenParams, Mesh) {
        let p = SpecimenParams { grip_width: 12e-3, fillet_radius: 1e-9, ..SpecimenParams::default() };
        let mesh = build_specimen(&p, 2e-3).unwrap();
        (p, mesh)
    }

    fn elastic_config() -> CaseConfig {
        let mut c = CaseConfig::for_case(1).unwrap();
        c.case_id = None;
        c.material.c = 0.0;
        c.material.a = 0.0;
        c.fixed_end = FixedEnd::Roller;
        c.stop.t_max = 0.05;
        c
    }

    #[test]
    fn newmark_coefficients() {
        let c = newmark_alphas(0.5, 0.25, 5e-4).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
        assert!(close(c.alpha1, 1.6e7));
        assert!(close(c.alpha2, 8000.0));
        assert!(close(c.alpha3, 1.0));
        assert!(close(c.alpha4, 4000.0));
        assert_eq!(c.alpha5, -1.0);
        assert_eq!(c.alpha6, 0.0);
        for dt in [1e-6, 0.3, 7.0] {
            let c = newmark_alphas(0.5, 0.25, dt).unwrap();
            assert_eq!((c.alpha5, c.alpha6), (-1.0, 0.0));
            let d = newmark_alphas(0.6, 0.3, dt).unwrap();
            assert!(close(d.alpha1 * dt, d.alpha2));
        }
        assert!(newmark_alphas(0.5, 0.25, 0.0).is_err());
        assert!(newmark_alphas(0.5, 0.25, -1.0).is_err());
        assert!(newmark_alphas(0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn single_dof_oscillator_conserves_energy() {
        let (m, k): (f64, f64) = (2.0, 50.0);
        let period = 2.0 * std::f64::consts::PI * (m / k).sqrt();
        let coeffs = newmark_alphas(0.5, 0.25, period / 20.0).unwrap();
        let mass = CsrMatrix::from_dense(&[vec![m]]);
        let k_v = CsrMatrix::from_pattern(vec![vec![0]]);
        let ops = MotionOperators { k_u: CsrMatrix::from_dense(&[vec![-k]]), w_a: vec![0.0] };
        let none = Prescribed { dofs: vec![], rates: vec![], loaded_x: vec![] };
        let mut solver = SpdSolver::new(LinearSolver::Direct, &mass);
        let mut s = FieldState { u: vec![0.1], v: vec![0.0], acc: vec![-k * 0.1 / m], phi: vec![], fat: vec![], t: 0.0 };
        let energy = |s: &FieldState| 0.5 * m * s.v[0] * s.v[0] + 0.5 * k * s.u[0] * s.u[0];
        let e0 = energy(&s);
        for _ in 0..20 * 100 {
            let t = s.t + coeffs.dt;
            let (u, v, acc) = step_motion(&s, &ops, &mass, &k_v, &coeffs, &none, t, &mut solver).unwrap();
            s = FieldState { u, v, acc, t, ..s };
            assert!((energy(&s) / e0 - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn prescribed_ramp_has_constant_velocity() {
        let (_, mesh) = bar();
        let mut config = elastic_config();
        config.stop.t_max = 0.005;
        let mut sim = Simulation::new(&config, &mesh).unwrap();
        for _ in 0..5 {
            sim.step().unwrap();
            let s = sim.state();
            for &n in &mesh.loaded_set {
                assert!((s.u[2 * n] - config.pull_rate * s.t).abs() < 1e-15);
                assert_eq!(s.v[2 * n], config.pull_rate);
                assert_eq!(s.acc[2 * n], 0.0);
            }
        }
    }

    #[test]
    fn unloaded_virgin_state_stays_at_rest() {
        let (_, mesh) = bar();
        let mut config = elastic_config();
        config.material = cases::table().material(1).unwrap();
        config.pull_rate = 0.0;
        let mut sim = Simulation::new(&config, &mesh).unwrap();
        for _ in 0..5 {
            let r = sim.step().unwrap();
            assert_eq!(r.reaction, 0.0);
        }
        let s = sim.state();
        assert!(s.u.iter().chain(&s.v).chain(&s.acc).chain(&s.phi).chain(&s.fat).all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_damage_step_matches_scalar_backward_euler() {
        let (_, mesh) = bar();
        let params = cases::table().material(1).unwrap();
        let disc = Discretization::new(&mesh, &params, DamageMass::Lumped).unwrap();
        let eps = 2e-3;
        let mut state = FieldState::virgin(mesh.n_nodes());
        for (i, x) in mesh.nodes.iter().enumerate() {
            state.u[2 * i] = eps * x[0];
        }
        let phi0 = 0.3;
        state.phi = vec![phi0; mesh.n_nodes()];
        let ops = assemble_damage(&disc, &state, &params);
        let mut solver = SpdSolver::new(LinearSolver::Direct, disc.scalar_pattern());
        let dt = 5e-4;
        let phi = step_damage(&state.phi, &ops, &disc.mass_phi, dt, &mut solver, dt).unwrap();

        let c = params.elasticity();
        let psi2 = c[0][0] * eps * eps;
        let mob = crate::constitutive::inverse_lambda(phi0, params.c, params.delta, params.sigma_exp);
        let expected = (phi0 + dt * mob * psi2) / (1.0 + dt * mob * (psi2 + params.gc / params.gamma));
        for p in &phi {
            assert!((p - expected).abs() < 1e-12, "{p} vs {expected}");
        }

        let same = step_damage(&state.phi, &ops, &disc.mass_phi, 0.0, &mut solver, 0.0).unwrap();
        assert!(same.iter().all(|p| (p - phi0).abs() < 1e-14));

        let virgin = FieldState::virgin(mesh.n_nodes());
        let ops = assemble_damage(&disc, &virgin, &params);
        let phi = step_damage(&virgin.phi, &ops, &disc.mass_phi, dt, &mut solver, dt).unwrap();
        assert!(phi.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn fatigue_trapezoid() {
        let m = [2.0, 4.0];
        assert_eq!(step_fatigue(&[1.0, 2.0], &[0.0; 2], &[0.0; 2], &m, 0.1).unwrap(), vec![1.0, 2.0]);
        let f = step_fatigue(&[0.0, 1.0], &[3.0, 8.0], &[3.0, 8.0], &m, 0.5).unwrap();
        assert_eq!(f, vec![0.5 * 3.0 / 2.0, 1.0 + 0.5 * 8.0 / 4.0]);
        let f = step_fatigue(&[1.0], &[1.0], &[3.0], &[2.0], 0.2).unwrap();
        assert!((f[0] - (1.0 + 0.1 * 4.0 / 2.0)).abs() < 1e-15);
        assert!(step_fatigue(&[1.0], &[1.0], &[1.0], &[0.0], 0.1).is_err());
    }

    #[test]
    fn without_damage_rate_the_response_is_elastic() {
        let (spec, mesh) = bar();
        let config = elastic_config();
        let sensors = crate::mesh::select_sensors(&mesh, &GridSpec::coarse_to_fine(&spec)).unwrap();
        let rec = run_case(&config, &mesh, &sensors).unwrap();
        assert_eq!(rec.stop_reason, StopReason::TimeLimit);
        assert!(rec.failure_time.is_none());
        assert!(rec.sensor_phi.iter().flatten().all(|&p| p == 0.0));
        assert_eq!(rec.reaction[0], 0.0);
        // Slope between two late points removes the constant viscous force.
        let n = rec.n_steps();
        let (i, j) = (n / 2, n - 1);
        let slope = (rec.reaction[j] - rec.reaction[i]) / (rec.applied_disp[j] - rec.applied_disp[i]);
        let analytic = config.material.e * spec.gauge_width * spec.thickness / spec.total_length;
        assert!((slope / analytic - 1.0).abs() < 0.01, "{slope} vs {analytic}");
        for w in rec.times.windows(2) {
            assert!((w[1] - w[0] - config.dt).abs() < 1e-12);
        }
    }

    #[test]
    fn damage_is_solved_from_the_previous_kinematics() {
        let (_, mesh) = bar();
        let mut config = CaseConfig::for_case(1).unwrap();
        config.stop.t_max = 0.01;
        let mut sim = Simulation::new(&config, &mesh).unwrap();
        for _ in 0..3 {
            let t_n = sim.state().t;
            sim.step().unwrap();
            let tr = sim.last_trace();
            assert_eq!(tr.phases, ["assemble_damage", "step_damage", "assemble_motion", "step_motion", "step_fatigue"]);
            assert_eq!(tr.damage_input_t, t_n);
            assert_eq!(tr.damage_input_u_norm, tr.u_n_norm);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let (spec, mesh) = bar();
        let mut config = CaseConfig::for_case(2).unwrap();
        config.stop.t_max = 0.02;
        let sensors = crate::mesh::select_sensors(&mesh, &GridSpec::coarse_to_fine(&spec)).unwrap();
        let a = run_case(&config, &mesh, &sensors).unwrap();
        let b = run_case(&config, &mesh, &sensors).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let mut c = CaseConfig::for_case(3).unwrap();
        c.validate().unwrap();
        c.material.gamma *= 2.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        assert!(CaseConfig::for_case(7).is_err());
        let mut c = CaseConfig::for_case(1).unwrap();
        c.dt = 0.0;
        assert!(c.validate().is_err());
        let json = serde_json::to_string(&CaseConfig::for_case(5).unwrap()).unwrap();
        let back: CaseConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, CaseConfig::for_case(5).unwrap());
    }
}
