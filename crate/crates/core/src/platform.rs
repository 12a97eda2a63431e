//! Synthetic ground-truth platform: a closed-form per-vBS compute model and
//! the linear compute to power relation.
//!
//! The per-vBS usage is
//!
//! ```text
//! c = min(|P|, base(x) * (1 + kappa * u(x) * mu / ways) * noise)
//! base(x) = c0 + a_ul * d_ul * fec(snr) * w(mcs_ul) + a_dl * d_dl * w(mcs_dl)
//! fec(s)  = 1 + phi / (1 + exp((s - s0) / sigma_s))
//! w(m)    = 1 + eta * m / 27
//! u(x)    = (d_ul + d_dl) / 2
//! ```
//!
//! Low SNR inflates uplink decoding cost, higher MCS costs more per bit, and
//! the cache term shrinks with more ways, more so for busy cells.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::{stream_rng, DOMAIN_NOISE};
use crate::types::{GlobalContext, LlcAllocation, PlatformSpec, VbsContext, MCS_MAX};

/// Shape parameters of the synthetic compute oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    pub c0: f64,
    pub a_ul: f64,
    pub a_dl: f64,
    pub phi: f64,
    pub s0: f64,
    pub sigma_s: f64,
    pub eta: f64,
    pub kappa: f64,
    pub mu: f64,
    pub noise_std: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            c0: 0.3,
            a_ul: 1.2,
            a_dl: 0.8,
            phi: 0.6,
            s0: 12.0,
            sigma_s: 3.0,
            eta: 0.5,
            kappa: 0.35,
            mu: 2.0,
            noise_std: 0.02,
        }
    }
}

impl OracleParams {
    pub fn noiseless(self) -> Self {
        OracleParams {
            noise_std: 0.0,
            ..self
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = [
            ("c0", self.c0),
            ("a_ul", self.a_ul),
            ("a_dl", self.a_dl),
            ("phi", self.phi),
            ("s0", self.s0),
            ("sigma_s", self.sigma_s),
            ("eta", self.eta),
            ("kappa", self.kappa),
            ("mu", self.mu),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("oracle.{name} must be > 0 (got {v})"));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            out.push(format!(
                "oracle.noise_std must be >= 0 (got {})",
                self.noise_std
            ));
        }
        if !(self.kappa * self.mu < 1.5) {
            out.push(format!(
                "oracle.kappa * oracle.mu must be < 1.5 (got {})",
                self.kappa * self.mu
            ));
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

    fn fec(&self, snr: f64) -> f64 {
        1.0 + self.phi / (1.0 + ((snr - self.s0) / self.sigma_s).exp())
    }

    fn mcs_weight(&self, mcs: u8) -> f64 {
        1.0 + self.eta * f64::from(mcs) / f64::from(MCS_MAX)
    }

    /// Cache-independent part of the usage.
    pub fn base_load(&self, ctx: &VbsContext) -> f64 {
        self.c0
            + self.a_ul * ctx.d_ul() * self.fec(ctx.snr()) * self.mcs_weight(ctx.mcs_ul())
            + self.a_dl * ctx.d_dl() * self.mcs_weight(ctx.mcs_dl())
    }

    /// Multiplicative miss penalty for `ways` cache ways.
    pub fn cache_penalty(&self, ctx: &VbsContext, ways: u32) -> f64 {
        let utility = 0.5 * ctx.demand();
        1.0 + self.kappa * utility * self.mu / f64::from(ways)
    }
}

/// Relative measurement jitter `1 + eps`, `eps ~ N(0, std^2)` truncated to
/// `eps > -1`.
fn noise_factor(std: f64, seed: u64) -> f64 {
    if std == 0.0 {
        return 1.0;
    }
    let normal = Normal::new(0.0, std).expect("noise std validated");
    let mut rng = stream_rng(seed, DOMAIN_NOISE, 0);
    loop {
        let eps: f64 = normal.sample(&mut rng);
        if eps > -1.0 {
            return 1.0 + eps;
        }
    }
}

/// Ground-truth CPU usage (cores) of one vBS.
///
/// `noise_seed = None` is the noiseless oracle.
pub fn true_compute(
    ctx: &VbsContext,
    cores: u32,
    ways: u32,
    params: &OracleParams,
    noise_seed: Option<u64>,
) -> Result<f64> {
    if ways == 0 {
        return Err(Error::Constraint("a vBS needs at least one cache way".into()));
    }
    if cores == 0 {
        return Err(Error::Constraint("a vBS needs at least one core".into()));
    }
    let noise = match noise_seed {
        Some(seed) => noise_factor(params.noise_std, seed),
        None => 1.0,
    };
    let raw = params.base_load(ctx) * params.cache_penalty(ctx, ways) * noise;
    if !(raw > 0.0) {
        return Err(Error::Parameterization(format!(
            "oracle produced non-positive usage {raw}"
        )));
    }
    Ok(raw.min(f64::from(cores)))
}

/// Sum of per-vBS usages for an arbitrary per-vBS way vector, which may
/// under-allocate (equal partition).
pub fn total_compute(
    gc: &GlobalContext,
    ways: &[u32],
    spec: &PlatformSpec,
    params: &OracleParams,
    noise_seed: Option<u64>,
) -> Result<f64> {
    gc.check(spec)?;
    if ways.len() != gc.len() {
        return Err(Error::validation(format!(
            "{} way entries for {} vBS",
            ways.len(),
            gc.len()
        )));
    }
    let mut total = 0.0;
    for (i, ((ctx, &n), &cores)) in gc
        .contexts()
        .iter()
        .zip(ways)
        .zip(&spec.core_sets)
        .enumerate()
    {
        let seed = noise_seed.map(|s| stream_rng(s, DOMAIN_NOISE, i as u64 + 1).random());
        total += true_compute(ctx, cores, n, params, seed)?;
    }
    Ok(total)
}

/// Platform usage `C^vRAN = sum_i c_i`.
pub fn aggregate_compute(
    gc: &GlobalContext,
    alloc: &LlcAllocation,
    spec: &PlatformSpec,
    params: &OracleParams,
    noise_seed: Option<u64>,
) -> Result<f64> {
    if alloc.total() != spec.n_llc {
        return Err(Error::Constraint(format!(
            "allocation hands out {} of {} ways",
            alloc.total(),
            spec.n_llc
        )));
    }
    total_compute(gc, alloc.ways(), spec, params, noise_seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub cpu_total: f64,
    pub power_w: f64,
    pub interval_s: f64,
    pub energy_j: f64,
}

/// Linear power model integrated over one decision interval.
pub fn energy(cpu_total: f64, spec: &PlatformSpec, interval_s: f64) -> EnergyReport {
    let power_w = spec.idle_power_w + spec.watts_per_core * cpu_total;
    EnergyReport {
        cpu_total,
        power_w,
        interval_s,
        energy_j: power_w * interval_s,
    }
}

/// Energy saved over one interval by running at `cpu_b` instead of `cpu_a`.
/// Idle power cancels.
pub fn energy_savings(cpu_a: f64, cpu_b: f64, spec: &PlatformSpec, interval_s: f64) -> f64 {
    spec.watts_per_core * (cpu_a - cpu_b) * interval_s
}
