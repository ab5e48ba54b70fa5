//! Linear-triangle discretization of the coupled displacement, damage and
//! fatigue equations.
//!
//! Sign convention: the semi-discrete system reads
//!
//! ```text
//! M ü     = K_u u + K_v v + w_a
//! M_φ φ̇   = (P_φ + K_c) φ + w_b + w_c
//! M_F Ḟ   = w_d
//! ```
//!
//! so `K_u`, `K_v` and `P_φ` are negative semi-definite. All operators carry
//! the plane-stress thickness. Element-wise constants (degradation, damage
//! mobility, strain energy) use the element mean of the nodal damage.

use serde::{Deserialize, Serialize};

use crate::constitutive::{
    degradation, fatigue_source, inverse_lambda, potential_h, potential_h_prime, potential_hf,
    potential_hf_prime, strain_energy_density2, Elasticity, MaterialParams, Voigt,
};
use crate::mesh::Mesh;
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Nodal fields at one time level. Displacement-like vectors are interleaved
/// `[x0, y0, x1, y1, ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub acc: Vec<f64>,
    pub phi: Vec<f64>,
    pub fat: Vec<f64>,
    pub t: f64,
}

impl FieldState {
    /// Virgin material at rest.
    pub fn virgin(n_nodes: usize) -> Self {
        Self {
            u: vec![0.0; 2 * n_nodes],
            v: vec![0.0; 2 * n_nodes],
            acc: vec![0.0; 2 * n_nodes],
            phi: vec![0.0; n_nodes],
            fat: vec![0.0; n_nodes],
            t: 0.0,
        }
    }

    pub fn check_consistent(&self, n_nodes: usize) -> Result<()> {
        let ok = self.u.len() == 2 * n_nodes
            && self.v.len() == 2 * n_nodes
            && self.acc.len() == 2 * n_nodes
            && self.phi.len() == n_nodes
            && self.fat.len() == n_nodes;
        if ok {
            Ok(())
        } else {
            Err(Error::Data(format!("field state does not match a mesh of {n_nodes} nodes")))
        }
    }
}

/// Per-element geometry of a linear triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    pub dndx: [f64; 3],
    pub dndy: [f64; 3],
}

impl ElementGeometry {
    pub fn new(p: [[f64; 2]; 3]) -> Option<Self> {
        let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        if !(two_a > 0.0) || !two_a.is_finite() {
            return None;
        }
        let mut dndx = [0.0; 3];
        let mut dndy = [0.0; 3];
        for i in 0..3 {
            let j = (i + 1) % 3;
            let k = (i + 2) % 3;
            dndx[i] = (p[j][1] - p[k][1]) / two_a;
            dndy[i] = (p[k][0] - p[j][0]) / two_a;
        }
        Some(Self { area: 0.5 * two_a, dndx, dndy })
    }

    /// Voigt strain `[xx, yy, 2xy]` of the local displacement vector.
    pub fn strain(&self, ue: &[f64; 6]) -> Voigt {
        let mut e = [0.0; 3];
        for i in 0..3 {
            let (ux, uy) = (ue[2 * i], ue[2 * i + 1]);
            e[0] += self.dndx[i] * ux;
            e[1] += self.dndy[i] * uy;
            e[2] += self.dndy[i] * ux + self.dndx[i] * uy;
        }
        e
    }

    pub fn gradient(&self, fe: &[f64; 3]) -> [f64; 2] {
        [
            self.dndx[0] * fe[0] + self.dndx[1] * fe[1] + self.dndx[2] * fe[2],
            self.dndy[0] * fe[0] + self.dndy[1] * fe[1] + self.dndy[2] * fe[2],
        ]
    }

    /// `A Bᵀ D B` for a 3×3 Voigt material matrix `D`, row-major 6×6.
    pub fn btdb(&self, d: &Elasticity) -> [f64; 36] {
        let mut b = [[0.0; 6]; 3];
        for i in 0..3 {
            b[0][2 * i] = self.dndx[i];
            b[1][2 * i + 1] = self.dndy[i];
            b[2][2 * i] = self.dndy[i];
            b[2][2 * i + 1] = self.dndx[i];
        }
        let mut db = [[0.0; 6]; 3];
        for r in 0..3 {
            for c in 0..6 {
                db[r][c] = d[r][0] * b[0][c] + d[r][1] * b[1][c] + d[r][2] * b[2][c];
            }
        }
        let mut k = [0.0; 36];
        for r in 0..6 {
            for c in 0..6 {
                k[6 * r + c] = self.area * (b[0][r] * db[0][c] + b[1][r] * db[1][c] + b[2][r] * db[2][c]);
            }
        }
        k
    }

    /// Consistent scalar mass `∫ N_i N_j`.
    pub fn mass(&self) -> [f64; 9] {
        let m = self.area / 12.0;
        [2.0 * m, m, m, m, 2.0 * m, m, m, m, 2.0 * m]
    }

    /// Stiffness of the scalar Laplacian `∫ ∇N_i · ∇N_j`.
    pub fn laplacian(&self) -> [f64; 9] {
        let mut l = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                l[3 * i + j] = self.area * (self.dndx[i] * self.dndx[j] + self.dndy[i] * self.dndy[j]);
            }
        }
        l
    }
}

/// Mass matrix used for the damage equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DamageMass {
    /// Row-sum lumped; with non-obtuse triangles the damage system is then
    /// an M-matrix and the solve cannot create new extrema.
    #[default]
    Lumped,
    Consistent,
}

/// Mesh-dependent data that does not change during a run: element geometry,
/// sparsity patterns with element scatter maps, and the constant matrices.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub geometry: Vec<ElementGeometry>,
    pub thickness: f64,
    pub damage_mass: DamageMass,
    scalar_pattern: CsrMatrix,
    vector_pattern: CsrMatrix,
    scalar_slots: Vec<[usize; 9]>,
    vector_slots: Vec<[usize; 36]>,
    elastic: Vec<[f64; 36]>,
    cmat: Elasticity,
    /// Consistent displacement mass `ρ h ∫ N N`.
    pub mass: CsrMatrix,
    /// Scalar mass `h ∫ N N` of the damage equation, lumped or consistent.
    pub mass_phi: CsrMatrix,
    /// Row-sum lumped scalar mass used for the fatigue update.
    pub mass_fat: Vec<f64>,
    /// Viscous damping operator `-b h ∫ Bᵀ V B`.
    pub k_v: CsrMatrix,
}

impl Discretization {
    pub fn new(mesh: &Mesh, params: &MaterialParams, damage_mass: DamageMass) -> Result<Self> {
        params.validate()?;
        let n = mesh.n_nodes();
        let mut geometry = Vec::with_capacity(mesh.n_elements());
        for (k, el) in mesh.elements.iter().enumerate() {
            let p = [mesh.nodes[el[0]], mesh.nodes[el[1]], mesh.nodes[el[2]]];
            let g = ElementGeometry::new(p).ok_or_else(|| Error::Assembly {
                element: k,
                reason: "zero or negative area".into(),
            })?;
            geometry.push(g);
        }

        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for el in &mesh.elements {
            for &a in el {
                adj[a].extend_from_slice(el);
            }
        }
        let scalar_pattern = CsrMatrix::from_pattern(adj.clone());
        let vector_rows = (0..2 * n)
            .map(|dof| {
                adj[dof / 2].iter().flat_map(|&b| [2 * b, 2 * b + 1]).collect()
            })
            .collect();
        let vector_pattern = CsrMatrix::from_pattern(vector_rows);

        let scalar_slots = mesh
            .elements
            .iter()
            .map(|el| {
                let mut s = [0; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        s[3 * a + b] = scalar_pattern.position(el[a], el[b]).expect("pattern entry");
                    }
                }
                s
            })
            .collect();
        let vector_slots = mesh
            .elements
            .iter()
            .map(|el| {
                let dofs = local_dofs(el);
                let mut s = [0; 36];
                for r in 0..6 {
                    for c in 0..6 {
                        s[6 * r + c] = vector_pattern.position(dofs[r], dofs[c]).expect("pattern entry");
                    }
                }
                s
            })
            .collect();

        let cmat = params.elasticity();
        let h = params.h;
        let elastic: Vec<[f64; 36]> = geometry.iter().map(|g| scale36(g.btdb(&cmat), h)).collect();
        let visc_d = [[params.b, 0.0, 0.0], [0.0, params.b, 0.0], [0.0, 0.0, 0.5 * params.b]];

        let mut disc = Self {
            mesh: mesh.clone(),
            geometry,
            thickness: h,
            damage_mass,
            mass: vector_pattern.zeros_like(),
            mass_phi: scalar_pattern.zeros_like(),
            mass_fat: vec![0.0; n],
            k_v: vector_pattern.zeros_like(),
            scalar_pattern,
            vector_pattern,
            scalar_slots,
            vector_slots,
            elastic,
            cmat,
        };

        let mut mass_phi = disc.scalar_pattern.zeros_like();
        let mut mass = disc.vector_pattern.zeros_like();
        let mut k_v = disc.vector_pattern.zeros_like();
        for (k, g) in disc.geometry.iter().enumerate() {
            disc.scatter_scalar(&mut mass_phi, k, &disc.damage_element_mass(g), h);
            let m = g.mass();
            let mut mv = [0.0; 36];
            for a in 0..3 {
                for b in 0..3 {
                    mv[6 * (2 * a) + 2 * b] = m[3 * a + b];
                    mv[6 * (2 * a + 1) + 2 * b + 1] = m[3 * a + b];
                }
            }
            disc.scatter_vector(&mut mass, k, &mv, params.rho * h);
            disc.scatter_vector(&mut k_v, k, &g.btdb(&visc_d), -h);
        }
        disc.mass_fat = (0..n).map(|i| mass_phi.row(i).map(|(_, v)| v).sum()).collect();
        disc.mass = mass;
        disc.mass_phi = mass_phi;
        disc.k_v = k_v;
        Ok(disc)
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }

    fn damage_element_mass(&self, g: &ElementGeometry) -> [f64; 9] {
        match self.damage_mass {
            DamageMass::Consistent => g.mass(),
            DamageMass::Lumped => {
                let d = g.area / 3.0;
                [d, 0.0, 0.0, 0.0, d, 0.0, 0.0, 0.0, d]
            }
        }
    }

    pub fn scalar_pattern(&self) -> &CsrMatrix {
        &self.scalar_pattern
    }

    pub fn vector_pattern(&self) -> &CsrMatrix {
        &self.vector_pattern
    }

    pub fn elasticity(&self) -> &Elasticity {
        &self.cmat
    }

    /// Undegraded element stiffness `h A Bᵀ C B`.
    pub fn element_stiffness(&self, k: usize) -> &[f64; 36] {
        &self.elastic[k]
    }

    fn scatter_scalar(&self, m: &mut CsrMatrix, k: usize, local: &[f64; 9], alpha: f64) {
        for (slot, v) in self.scalar_slots[k].iter().zip(local) {
            m.values[*slot] += alpha * v;
        }
    }

    fn scatter_vector(&self, m: &mut CsrMatrix, k: usize, local: &[f64; 36], alpha: f64) {
        for (slot, v) in self.vector_slots[k].iter().zip(local) {
            m.values[*slot] += alpha * v;
        }
    }

    fn local_u(&self, k: usize, u: &[f64]) -> [f64; 6] {
        let el = &self.mesh.elements[k];
        let mut ue = [0.0; 6];
        for a in 0..3 {
            ue[2 * a] = u[2 * el[a]];
            ue[2 * a + 1] = u[2 * el[a] + 1];
        }
        ue
    }

    fn local_scalar(&self, k: usize, f: &[f64]) -> [f64; 3] {
        let el = &self.mesh.elements[k];
        [f[el[0]], f[el[1]], f[el[2]]]
    }

    pub fn element_strain(&self, k: usize, u: &[f64]) -> Voigt {
        self.geometry[k].strain(&self.local_u(k, u))
    }

    pub fn element_mean_phi(&self, k: usize, phi: &[f64]) -> f64 {
        let p = self.local_scalar(k, phi);
        (p[0] + p[1] + p[2]) / 3.0
    }
}

fn local_dofs(el: &[usize; 3]) -> [usize; 6] {
    [2 * el[0], 2 * el[0] + 1, 2 * el[1], 2 * el[1] + 1, 2 * el[2], 2 * el[2] + 1]
}

fn scale36(mut a: [f64; 36], s: f64) -> [f64; 36] {
    a.iter_mut().for_each(|v| *v *= s);
    a
}

/// Operators of the damage equation, assembled from a state at `t_n`.
#[derive(Debug, Clone)]
pub struct DamageOperators {
    pub p_phi: CsrMatrix,
    pub k_c: CsrMatrix,
    pub w_b: Vec<f64>,
    pub w_c: Vec<f64>,
    /// Nodal fatigue load with the fatigue potential fully active. Filled
    /// only for the lumped damage mass, where it is diagonal; empty otherwise.
    pub fatigue_drive: Vec<f64>,
}

/// State-dependent operators of the equation of motion.
#[derive(Debug, Clone)]
pub struct MotionOperators {
    pub k_u: CsrMatrix,
    pub w_a: Vec<f64>,
}

/// Global operators of the semi-discrete system, assembled at time `t`.
/// The constant mass and damping matrices are borrowed from the
/// [`Discretization`]; `mass_fat` is the lumped fatigue mass diagonal.
#[derive(Debug, Clone)]
pub struct GlobalOperators<'a> {
    pub t: f64,
    pub mass: &'a CsrMatrix,
    pub mass_phi: &'a CsrMatrix,
    pub mass_fat: &'a [f64],
    pub k_v: &'a CsrMatrix,
    pub k_u: CsrMatrix,
    pub p_phi: CsrMatrix,
    pub k_c: CsrMatrix,
    pub w_a: Vec<f64>,
    pub w_b: Vec<f64>,
    pub w_c: Vec<f64>,
    pub w_d: Vec<f64>,
}

pub fn assemble<'a>(
    disc: &'a Discretization,
    state: &FieldState,
    params: &MaterialParams,
) -> Result<GlobalOperators<'a>> {
    state.check_consistent(disc.n_nodes())?;
    let damage = assemble_damage(disc, state, params);
    let motion = assemble_motion(disc, &state.phi, params);
    let w_d = assemble_fatigue_rate(disc, state, params);
    Ok(GlobalOperators {
        t: state.t,
        mass: &disc.mass,
        mass_phi: &disc.mass_phi,
        mass_fat: &disc.mass_fat,
        k_v: &disc.k_v,
        k_u: motion.k_u,
        p_phi: damage.p_phi,
        k_c: damage.k_c,
        w_a: motion.w_a,
        w_b: damage.w_b,
        w_c: damage.w_c,
        w_d,
    })
}

/// Damage operators with mobility, strain energy and fatigue taken from
/// `state`.
pub fn assemble_damage(disc: &Discretization, state: &FieldState, params: &MaterialParams) -> DamageOperators {
    let n = disc.n_nodes();
    let mut p_phi = disc.scalar_pattern.zeros_like();
    let mut k_c = disc.scalar_pattern.zeros_like();
    let mut w_b = vec![0.0; n];
    let mut w_c = vec![0.0; n];
    let lumped = disc.damage_mass == DamageMass::Lumped;
    let mut fatigue_drive = if lumped { vec![0.0; n] } else { Vec::new() };
    let h = disc.thickness;
    let (gc, gamma) = (params.gc, params.gamma);
    for (k, g) in disc.geometry.iter().enumerate() {
        let el = &disc.mesh.elements[k];
        let phi_e = disc.local_scalar(k, &state.phi);
        let fat_e = disc.local_scalar(k, &state.fat);
        let mean = (phi_e[0] + phi_e[1] + phi_e[2]) / 3.0;
        let mob = inverse_lambda(mean, params.c, params.delta, params.sigma_exp);
        let psi2 = strain_energy_density2(&disc.cmat, &disc.element_strain(k, &state.u));
        let m = disc.damage_element_mass(g);

        disc.scatter_scalar(&mut p_phi, k, &g.laplacian(), -h * gamma * gc * mob);
        let explicit_h = if (0.0..=1.0).contains(&mean) {
            disc.scatter_scalar(&mut p_phi, k, &m, -h * gc * mob / gamma);
            0.0
        } else {
            potential_h_prime(mean, params.delta)
        };
        disc.scatter_scalar(&mut k_c, k, &m, -h * psi2 * mob);

        let hf_term = [
            fat_e[0] * potential_hf_prime(phi_e[0]),
            fat_e[1] * potential_hf_prime(phi_e[1]),
            fat_e[2] * potential_hf_prime(phi_e[2]),
        ];
        let third = h * g.area / 3.0;
        for a in 0..3 {
            let mut mh = 0.0;
            for b in 0..3 {
                mh += m[3 * a + b] * hf_term[b];
            }
            w_b[el[a]] += psi2 * mob * third;
            w_c[el[a]] += -mob / gamma * (h * mh + gc * explicit_h * third);
            if lumped {
                fatigue_drive[el[a]] += mob / gamma * h * m[4 * a] * fat_e[a];
            }
        }
    }
    DamageOperators { p_phi, k_c, w_b, w_c, fatigue_drive }
}

/// Degraded stiffness and damage-gradient load for a damage field.
pub fn assemble_motion(disc: &Discretization, phi: &[f64], params: &MaterialParams) -> MotionOperators {
    let n = disc.n_nodes();
    let mut k_u = disc.vector_pattern.zeros_like();
    let mut w_a = vec![0.0; 2 * n];
    let h = disc.thickness;
    for (k, g) in disc.geometry.iter().enumerate() {
        let el = &disc.mesh.elements[k];
        let phi_e = disc.local_scalar(k, phi);
        let mean = (phi_e[0] + phi_e[1] + phi_e[2]) / 3.0;
        let deg = degradation(mean);
        if deg != 0.0 {
            disc.scatter_vector(&mut k_u, k, &disc.elastic[k], -deg);
        }
        let grad = g.gradient(&phi_e);
        if grad[0] != 0.0 || grad[1] != 0.0 {
            let scale = h * g.area * params.gamma * params.gc;
            for a in 0..3 {
                let dn_dot = g.dndx[a] * grad[0] + g.dndy[a] * grad[1];
                w_a[2 * el[a]] += scale * dn_dot * grad[0];
                w_a[2 * el[a] + 1] += scale * dn_dot * grad[1];
            }
        }
    }
    MotionOperators { k_u, w_a }
}

/// Right-hand side `w_d` of the fatigue equation; non-negative by construction.
pub fn assemble_fatigue_rate(disc: &Discretization, state: &FieldState, params: &MaterialParams) -> Vec<f64> {
    let n = disc.n_nodes();
    let mut w_d = vec![0.0; n];
    if params.a == 0.0 {
        return w_d;
    }
    let h = disc.thickness;
    for (k, g) in disc.geometry.iter().enumerate() {
        let el = &disc.mesh.elements[k];
        let phi_e = disc.local_scalar(k, &state.phi);
        let mean = (phi_e[0] + phi_e[1] + phi_e[2]) / 3.0;
        let strain = disc.element_strain(k, &state.u);
        let rate = disc.element_strain(k, &state.v);
        let fhat = fatigue_source(&strain, &rate, mean, &disc.cmat, params.a, params.b);
        if fhat == 0.0 {
            continue;
        }
        let drive = [-potential_hf(phi_e[0]), -potential_hf(phi_e[1]), -potential_hf(phi_e[2])];
        let m = g.mass();
        for a in 0..3 {
            let mut s = 0.0;
            for b in 0..3 {
                s += m[3 * a + b] * drive[b];
            }
            w_d[el[a]] += h * fhat / params.gamma * s;
        }
    }
    w_d
}

/// Free energy per unit thickness, integrated over the specimen:
/// `∫ ½ g(φ) Eᵀ C E + ½ g_c γ |∇φ|² + (g_c H(φ) + F H_f(φ)) / γ`.
pub fn free_energy(disc: &Discretization, state: &FieldState, params: &MaterialParams) -> Result<f64> {
    state.check_consistent(disc.n_nodes())?;
    let mut total = 0.0;
    for (k, g) in disc.geometry.iter().enumerate() {
        let phi_e = disc.local_scalar(k, &state.phi);
        let fat_e = disc.local_scalar(k, &state.fat);
        let mean = (phi_e[0] + phi_e[1] + phi_e[2]) / 3.0;
        let psi2 = strain_energy_density2(&disc.cmat, &disc.element_strain(k, &state.u));
        let grad = g.gradient(&phi_e);
        let elastic = 0.5 * degradation(mean) * psi2 * g.area;
        let surface = 0.5 * params.gc * params.gamma * (grad[0] * grad[0] + grad[1] * grad[1]) * g.area;
        let h_mean = phi_e.iter().map(|&p| potential_h(p, params.delta)).sum::<f64>() / 3.0;
        let m = g.mass();
        let mut fh = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                fh += m[3 * a + b] * fat_e[a] * potential_hf(phi_e[b]);
            }
        }
        total += elastic + surface + (params.gc * h_mean * g.area + fh) / params.gamma;
    }
    Ok(total)
}

/// Elastic part of the free energy per unit thickness.
pub fn elastic_energy(disc: &Discretization, state: &FieldState) -> f64 {
    disc.geometry
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let mean = disc.element_mean_phi(k, &state.phi);
            0.5 * degradation(mean) * strain_energy_density2(&disc.cmat, &disc.element_strain(k, &state.u)) * g.area
        })
        .sum()
}
