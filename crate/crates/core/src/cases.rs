//! The six representative damage cases and the shared loading constants.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::constitutive::MaterialParams;
use crate::{Error, Result};

const CASES_JSON: &str = include_str!("../data/cases.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseParams {
    pub id: u8,
    pub gamma: f64,
    pub gc: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct SharedMaterial {
    e: f64,
    nu: f64,
    rho: f64,
    b: f64,
    a: f64,
    sigma_exp: f64,
    delta: f64,
    h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseTable {
    material: SharedMaterial,
    pub dt: f64,
    pub pull_rate: f64,
    pub cases: Vec<CaseParams>,
}

impl CaseTable {
    pub fn case(&self, id: u8) -> Result<&CaseParams> {
        self.cases
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::Config(format!("unknown case id {id}, expected 1-{}", self.cases.len())))
    }

    /// Full material parameters of a case.
    pub fn material(&self, id: u8) -> Result<MaterialParams> {
        let c = self.case(id)?;
        let m = &self.material;
        Ok(MaterialParams {
            e: m.e,
            nu: m.nu,
            rho: m.rho,
            b: m.b,
            a: m.a,
            gamma: c.gamma,
            gc: c.gc,
            c: c.c,
            sigma_exp: m.sigma_exp,
            delta: m.delta,
            h: m.h,
        })
    }

    pub fn ids(&self) -> impl Iterator<Item = u8> + '_ {
        self.cases.iter().map(|c| c.id)
    }
}

/// The built-in case table.
pub fn table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(|| serde_json::from_str(CASES_JSON).expect("embedded case table is valid"))
}

/// Checks that a parameter set reproduces the `(γ, g_c, c)` row of a case.
pub fn check_matches(id: u8, params: &MaterialParams) -> Result<()> {
    let row = table().case(id)?;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
    if close(params.gamma, row.gamma) && close(params.gc, row.gc) && close(params.c, row.c) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "case {id} expects gamma={}, gc={}, c={} but got gamma={}, gc={}, c={}",
            row.gamma, row.gc, row.c, params.gamma, params.gc, params.c
        )))
    }
}
