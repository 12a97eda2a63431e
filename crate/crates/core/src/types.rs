//! Domain types shared by the oracle, the learned models and the allocators.
//!
//! All types validate on construction and are immutable afterwards, so they
//! can be shared freely between worker threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper end of the SNR range in dB.
pub const SNR_MAX_DB: f64 = 30.0;
/// Highest MCS index.
pub const MCS_MAX: u8 = 27;

/// Aggregate operating point of one virtual base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawContext")]
pub struct VbsContext {
    d_ul: f64,
    d_dl: f64,
    snr: f64,
    mcs_ul: u8,
    mcs_dl: u8,
}

#[derive(Deserialize)]
struct RawContext {
    d_ul: f64,
    d_dl: f64,
    snr: f64,
    mcs_ul: u8,
    mcs_dl: u8,
}

impl TryFrom<RawContext> for VbsContext {
    type Error = Error;

    fn try_from(r: RawContext) -> Result<Self> {
        VbsContext::new(r.d_ul, r.d_dl, r.snr, r.mcs_ul, r.mcs_dl)
    }
}

impl VbsContext {
    pub fn new(d_ul: f64, d_dl: f64, snr: f64, mcs_ul: u8, mcs_dl: u8) -> Result<Self> {
        if !(0.0..=1.0).contains(&d_ul) || !(0.0..=1.0).contains(&d_dl) {
            return Err(Error::validation(format!(
                "demand out of [0,1]: d_ul={d_ul}, d_dl={d_dl}"
            )));
        }
        if !(0.0..=SNR_MAX_DB).contains(&snr) {
            return Err(Error::validation(format!("snr {snr} dB out of [0,30]")));
        }
        if mcs_ul > MCS_MAX || mcs_dl > MCS_MAX {
            return Err(Error::validation(format!(
                "mcs out of [0,27]: ul={mcs_ul}, dl={mcs_dl}"
            )));
        }
        Ok(VbsContext {
            d_ul,
            d_dl,
            snr,
            mcs_ul,
            mcs_dl,
        })
    }

    /// Context whose MCS indices follow the scheduler's SNR map.
    pub fn from_link(d_ul: f64, d_dl: f64, snr: f64) -> Result<Self> {
        let mcs = mcs_from_snr(snr, MCS_MAX)?;
        VbsContext::new(d_ul, d_dl, snr, mcs, mcs)
    }

    pub fn d_ul(&self) -> f64 {
        self.d_ul
    }

    pub fn d_dl(&self) -> f64 {
        self.d_dl
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn mcs_ul(&self) -> u8 {
        self.mcs_ul
    }

    pub fn mcs_dl(&self) -> u8 {
        self.mcs_dl
    }

    /// Total normalized demand, `d_ul + d_dl`.
    pub fn demand(&self) -> f64 {
        self.d_ul + self.d_dl
    }
}

/// Compute platform shared by the deployed vBS instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformSpec {
    pub m_cores: u32,
    pub n_llc: u32,
    pub n_vbs: u32,
    /// Core count |P_i| of each vBS.
    pub core_sets: Vec<u32>,
    pub idle_power_w: f64,
    pub watts_per_core: f64,
}

impl Default for PlatformSpec {
    /// 12 cores, 12 ways, five vBS pinned to two cores each.
    fn default() -> Self {
        PlatformSpec {
            m_cores: 12,
            n_llc: 12,
            n_vbs: 5,
            core_sets: vec![2; 5],
            idle_power_w: 120.0,
            watts_per_core: 9.0,
        }
    }
}

impl PlatformSpec {
    /// Every violated invariant, in field order. Empty means valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_vbs < 1 {
            out.push("platform.n_vbs must be >= 1".to_string());
        }
        if self.n_llc < self.n_vbs {
            out.push(format!(
                "platform.n_llc ({}) must be >= platform.n_vbs ({})",
                self.n_llc, self.n_vbs
            ));
        }
        if self.core_sets.len() != self.n_vbs as usize {
            out.push(format!(
                "platform.core_sets has {} entries, expected n_vbs = {}",
                self.core_sets.len(),
                self.n_vbs
            ));
        }
        if self.core_sets.iter().any(|&c| c < 1) {
            out.push("platform.core_sets entries must be >= 1".to_string());
        }
        let used: u64 = self.core_sets.iter().map(|&c| u64::from(c)).sum();
        if used > u64::from(self.m_cores) {
            out.push(format!(
                "platform.core_sets use {used} cores, more than m_cores = {}",
                self.m_cores
            ));
        }
        if !(self.idle_power_w > 0.0) {
            out.push("platform.idle_power_w must be > 0".to_string());
        }
        if !(self.watts_per_core > 0.0) {
            out.push("platform.watts_per_core must be > 0".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems.join("; ")))
        }
    }

    /// Same platform with a different number of LLC ways.
    pub fn with_ways(&self, n_llc: u32) -> Self {
        PlatformSpec {
            n_llc,
            ..self.clone()
        }
    }
}

/// A feasible way allocation: every vBS gets at least one way and all
/// `N_LLC` ways are handed out.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LlcAllocation {
    ways: Vec<u32>,
}

impl LlcAllocation {
    pub fn new(ways: Vec<u32>, n_llc: u32) -> Result<Self> {
        if ways.is_empty() {
            return Err(Error::Constraint("allocation has no vBS".into()));
        }
        if let Some(i) = ways.iter().position(|&n| n < 1) {
            return Err(Error::Constraint(format!("vBS {i} receives 0 ways")));
        }
        let total: u64 = ways.iter().map(|&n| u64::from(n)).sum();
        if total != u64::from(n_llc) {
            return Err(Error::Constraint(format!(
                "allocation sums to {total} ways, expected {n_llc}"
            )));
        }
        Ok(LlcAllocation { ways })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_parts_unchecked(ways: Vec<u32>) -> Self {
        LlcAllocation { ways }
    }

    pub fn ways(&self) -> &[u32] {
        &self.ways
    }

    pub fn total(&self) -> u32 {
        self.ways.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.ways.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ways.is_empty()
    }
}

impl std::fmt::Display for LlcAllocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&format_ways(&self.ways))
    }
}

/// `2-3-2-3-2` style rendering used in CSV artifacts.
pub fn format_ways(ways: &[u32]) -> String {
    ways.iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

pub fn parse_ways(s: &str) -> Option<Vec<u32>> {
    s.split('-').map(|p| p.trim().parse().ok()).collect()
}

/// Contexts of all deployed vBS, in index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GlobalContext {
    contexts: Vec<VbsContext>,
}

impl GlobalContext {
    pub fn new(contexts: Vec<VbsContext>) -> Self {
        GlobalContext { contexts }
    }

    pub fn contexts(&self) -> &[VbsContext] {
        &self.contexts
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn check(&self, spec: &PlatformSpec) -> Result<()> {
        if self.contexts.len() != spec.n_vbs as usize {
            return Err(Error::validation(format!(
                "global context has {} vBS, platform has {}",
                self.contexts.len(),
                spec.n_vbs
            )));
        }
        Ok(())
    }
}

/// One digital-twin training record `(x, |P|, n_LLC, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwinSample {
    context: VbsContext,
    cores: u32,
    ways: u32,
    cpu_usage: f64,
}

impl TwinSample {
    pub fn new(
        context: VbsContext,
        cores: u32,
        ways: u32,
        cpu_usage: f64,
        spec: &PlatformSpec,
    ) -> Result<Self> {
        if cores < 1 || cores > spec.m_cores {
            return Err(Error::validation(format!(
                "core count {cores} out of [1, {}]",
                spec.m_cores
            )));
        }
        if ways < 1 || ways > spec.n_llc {
            return Err(Error::validation(format!(
                "way count {ways} out of [1, {}]",
                spec.n_llc
            )));
        }
        if !(cpu_usage > 0.0 && cpu_usage <= f64::from(cores)) {
            return Err(Error::validation(format!(
                "cpu usage {cpu_usage} out of (0, {cores}]"
            )));
        }
        Ok(TwinSample {
            context,
            cores,
            ways,
            cpu_usage,
        })
    }

    pub fn context(&self) -> &VbsContext {
        &self.context
    }

    pub fn cores(&self) -> u32 {
        self.cores
    }

    pub fn ways(&self) -> u32 {
        self.ways
    }

    pub fn cpu_usage(&self) -> f64 {
        self.cpu_usage
    }
}

/// Linear SNR to MCS map used by the synthetic scheduler, rounded half up.
pub fn mcs_from_snr(snr: f64, mcs_max: u8) -> Result<u8> {
    if !(0.0..=SNR_MAX_DB).contains(&snr) {
        return Err(Error::validation(format!("snr {snr} dB out of [0,30]")));
    }
    let raw = (f64::from(mcs_max) * snr / SNR_MAX_DB + 0.5).floor();
    Ok(raw.clamp(0.0, f64::from(mcs_max)) as u8)
}

pub const TWIN_FEATURES: usize = 7;
pub const CLASSIFIER_FEATURES_PER_VBS: usize = 6;

fn context_block(ctx: &VbsContext) -> [f64; 5] {
    [
        ctx.d_ul,
        ctx.d_dl,
        ctx.snr / SNR_MAX_DB,
        f64::from(ctx.mcs_ul) / f64::from(MCS_MAX),
        f64::from(ctx.mcs_dl) / f64::from(MCS_MAX),
    ]
}

/// Normalized twin input for an arbitrary operating point.
pub fn twin_features(
    ctx: &VbsContext,
    cores: u32,
    ways: u32,
    spec: &PlatformSpec,
) -> [f64; TWIN_FEATURES] {
    let [a, b, c, d, e] = context_block(ctx);
    [
        a,
        b,
        c,
        d,
        e,
        f64::from(cores) / f64::from(spec.m_cores),
        f64::from(ways) / f64::from(spec.n_llc),
    ]
}

pub fn encode_twin_features(sample: &TwinSample, spec: &PlatformSpec) -> [f64; TWIN_FEATURES] {
    twin_features(&sample.context, sample.cores, sample.ways, spec)
}

/// Positional concatenation of per-vBS blocks
/// `(d_ul, d_dl, snr/30, mcs_ul/27, mcs_dl/27, |P_i|/M_cores)`.
pub fn encode_classifier_features(gc: &GlobalContext, spec: &PlatformSpec) -> Result<Vec<f64>> {
    gc.check(spec)?;
    let mut out = Vec::with_capacity(CLASSIFIER_FEATURES_PER_VBS * gc.len());
    for (ctx, &cores) in gc.contexts.iter().zip(&spec.core_sets) {
        out.extend_from_slice(&context_block(ctx));
        out.push(f64::from(cores) / f64::from(spec.m_cores));
    }
    Ok(out)
}
