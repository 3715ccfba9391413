//! The full preconditioner chain, built in three phases: `M_A^{-1}`, then
//! `M_{S_1}^{-1}`, then `M_{A_0}`.

use std::time::Instant;

use serde::Serialize;

use crate::config::ChainOptions;
use crate::decomposition::Decomposition;
use crate::dual::DualPrecond;
use crate::error::Result;
use crate::ns::NsPrecond;
use crate::problem::SaddleSystem;
use crate::schwarz::PrimalPrecond;

/// Wall time of each setup phase, in seconds.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SetupTimings {
    pub decomposition: f64,
    pub primal: f64,
    pub dual: f64,
    pub ma0: f64,
}

#[derive(Debug, Clone)]
pub struct SaddleChain {
    pub dec: Decomposition,
    pub primal: PrimalPrecond,
    pub dual: DualPrecond,
    pub ns: NsPrecond,
    pub opts: ChainOptions,
    pub timings: SetupTimings,
}

impl SaddleChain {
    pub fn build(sys: &SaddleSystem, n_parts: usize, overlap: usize, opts: &ChainOptions) -> Result<Self> {
        let t = Instant::now();
        let dec = Decomposition::build(sys, n_parts, overlap).map_err(|e| e.at_stage("decomposition"))?;
        let secs = t.elapsed().as_secs_f64();
        let mut chain = Self::from_decomposition(sys, dec, opts)?;
        chain.timings.decomposition = secs;
        Ok(chain)
    }

    pub fn from_decomposition(sys: &SaddleSystem, dec: Decomposition, opts: &ChainOptions) -> Result<Self> {
        let mut timings = SetupTimings::default();
        let t = Instant::now();
        let primal = PrimalPrecond::build(sys, &dec, opts).map_err(|e| e.at_stage("setup phase 1: M_A"))?;
        timings.primal = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let dual = DualPrecond::build(sys, &dec, &primal, opts).map_err(|e| e.at_stage("setup phase 2: M_S1"))?;
        timings.dual = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let ns = NsPrecond::build(&dual).map_err(|e| e.at_stage("setup phase 3: M_A0"))?;
        timings.ma0 = t.elapsed().as_secs_f64();
        Ok(Self {
            dec,
            primal,
            dual,
            ns,
            opts: opts.clone(),
            timings,
        })
    }

    /// `N_S^{-1} g`.
    pub fn apply_ns_inv(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.ns.apply_inv(&self.dual, g)
    }
}
