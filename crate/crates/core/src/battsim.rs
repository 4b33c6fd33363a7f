//! Synthetic drive cycles and a lumped single-cell model.
//!
//! SOC labels come from exact Coulomb counting,
//! `SOC(t) = SOC₀ + 100/(3600·Q) · ∫ i dτ`, with charging current positive.
//! Terminal voltage is a linear open-circuit voltage in SOC plus an ohmic
//! drop, and cell temperature relaxes with a first-order lag toward ambient
//! plus Joule heating. Output rows use the dataset CSV schema.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SampleRecord};
use crate::error::{Error, Result};
use crate::rng;

/// SOC (percent) at or below which the cell counts as empty; absorbs
/// rounding in the accumulated charge.
pub const EMPTY_TOLERANCE: f64 = 1e-9;

/// Largest charging (regen) current as a fraction of `peak_discharge`.
pub const REGEN_BOUND_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    /// Nominal capacity in ampere-hours.
    pub capacity: f64,
    pub ocv_full: f64,
    pub ocv_empty: f64,
    pub r_internal: f64,
    /// Thermal time constant, seconds.
    pub thermal_tau: f64,
    pub ambient: f64,
    /// Steady-state temperature rise per watt dissipated, K/W.
    pub heat_coeff: f64,
}

impl Default for CellParams {
    fn default() -> Self {
        CellParams {
            capacity: 2.9,
            ocv_full: 4.2,
            ocv_empty: 3.0,
            r_internal: 0.05,
            thermal_tau: 300.0,
            ambient: 25.0,
            heat_coeff: 40.0,
        }
    }
}

impl CellParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.capacity > 0.0
            && self.ocv_full > self.ocv_empty
            && self.ocv_empty > 0.0
            && self.r_internal >= 0.0
            && self.thermal_tau > 0.0
            && self.heat_coeff >= 0.0
            && self.ambient.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid cell parameters {self:?}")))
        }
    }

    /// Open-circuit voltage at `soc` percent.
    pub fn ocv(&self, soc: f64) -> f64 {
        self.ocv_empty + (self.ocv_full - self.ocv_empty) * soc / 100.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleConfig {
    /// Seconds.
    pub duration: f64,
    /// Seconds per step.
    pub dt: f64,
    /// Largest discharge current magnitude, amperes.
    pub peak_discharge: f64,
    /// Expected fraction of steps spent charging.
    pub regen_fraction: f64,
    pub seed: u64,
}

impl Default for CycleConfig {
    fn default() -> Self {
        CycleConfig {
            duration: 20_000.0,
            dt: 1.0,
            peak_discharge: 1.7,
            regen_fraction: 0.1,
            seed: 0,
        }
    }
}

impl CycleConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt > 0.0
            && self.duration >= self.dt
            && self.peak_discharge > 0.0
            && (0.0..1.0).contains(&self.regen_fraction);
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid drive-cycle config {self:?}")))
        }
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).floor() as usize
    }
}

/// Per-step current in amperes, `floor(duration/dt)` entries in
/// `[-peak_discharge, REGEN_BOUND_FRACTION·peak_discharge]`.
///
/// The profile is a chain of 5–60 s segments: linear ramps between cruise
/// levels, hard acceleration pulses, and, with probability `regen_fraction`,
/// regenerative charging pulses.
pub fn generate_drive_cycle(cfg: &CycleConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = cfg.steps();
    let peak = cfg.peak_discharge;
    let mut rng = rng::seeded(cfg.seed);
    let mut out = Vec::with_capacity(n + 64);
    let mut cruise = -0.2 * peak;
    while out.len() < n {
        let seconds: f64 = rng.random_range(5.0..=60.0);
        let len = ((seconds / cfg.dt).round() as usize).max(1);
        let kind: f64 = rng.random();
        if kind < cfg.regen_fraction {
            let level = rng.random_range(0.05..=REGEN_BOUND_FRACTION) * peak;
            out.extend(std::iter::repeat_n(level, len));
        } else if kind < cfg.regen_fraction + 0.25 * (1.0 - cfg.regen_fraction) {
            let level = -rng.random_range(0.5..=1.0) * peak;
            out.extend(std::iter::repeat_n(level, len));
        } else {
            let target = -rng.random_range(0.02..=0.45) * peak;
            for s in 1..=len {
                let w = s as f64 / len as f64;
                out.push(cruise + (target - cruise) * w);
            }
            cruise = target;
        }
    }
    out.truncate(n);
    Ok(out)
}

/// Stepwise cell state. The Coulomb counter is never clamped; the reported
/// SOC is.
#[derive(Debug, Clone)]
pub struct Cell {
    params: CellParams,
    soc0: f64,
    charge: f64,
    temperature: f64,
    t: f64,
}

impl Cell {
    pub fn new(params: CellParams, soc0: f64) -> Result<Self> {
        params.validate()?;
        if !(soc0 > 0.0 && soc0 <= 100.0) {
            return Err(Error::config(format!("initial SOC {soc0} not in (0, 100]")));
        }
        Ok(Cell {
            params,
            soc0,
            charge: 0.0,
            temperature: params.ambient,
            t: 0.0,
        })
    }

    /// Net charge moved so far, ampere-seconds (charging positive).
    pub fn charge(&self) -> f64 {
        self.charge
    }

    pub fn soc_unclamped(&self) -> f64 {
        self.soc0 + 100.0 * self.charge / (3600.0 * self.params.capacity)
    }

    pub fn soc(&self) -> f64 {
        self.soc_unclamped().clamp(0.0, 100.0)
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Apply `current` for `dt` seconds and return the measurement at the end
    /// of the step.
    pub fn step(&mut self, current: f64, dt: f64) -> SampleRecord {
        let p = &self.params;
        self.charge += current * dt;
        self.t += dt;
        let heat = current * current * p.r_internal;
        let target = p.ambient + p.heat_coeff * heat;
        let alpha = 1.0 - (-dt / p.thermal_tau).exp();
        self.temperature += alpha * (target - self.temperature);
        let soc = self.soc();
        SampleRecord {
            t: self.t,
            voltage: p.ocv(soc) + current * p.r_internal,
            current,
            temperature: self.temperature,
            soc,
        }
    }
}

/// Run `profile` through a fresh cell. Stops early, after emitting a final
/// 0% row, if the cell is fully discharged.
pub fn simulate_cell(profile: &[f64], params: &CellParams, soc0: f64, dt: f64) -> Result<Dataset> {
    if !(dt > 0.0) {
        return Err(Error::config(format!("time step {dt} must be positive")));
    }
    let mut cell = Cell::new(*params, soc0)?;
    let mut records = Vec::with_capacity(profile.len());
    for (k, &i) in profile.iter().enumerate() {
        let mut rec = cell.step(i, dt);
        let empty = cell.soc_unclamped() <= EMPTY_TOLERANCE;
        if empty {
            rec.soc = 0.0;
            rec.voltage = params.ocv(0.0) + i * params.r_internal;
        }
        records.push(rec);
        if empty {
            if k + 1 < profile.len() {
                log::info!(
                    "cell empty after {} of {} steps; truncating",
                    k + 1,
                    profile.len()
                );
            }
            break;
        }
    }
    Ok(Dataset::new("battsim", records))
}

/// Gaussian measurement noise added to the sensor channels. Labels are left exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoise {
    pub voltage_std: f64,
    pub current_std: f64,
    pub temperature_std: f64,
}

impl SensorNoise {
    pub const NONE: SensorNoise = SensorNoise {
        voltage_std: 0.0,
        current_std: 0.0,
        temperature_std: 0.0,
    };
}

impl Default for SensorNoise {
    fn default() -> Self {
        SensorNoise {
            voltage_std: 0.01,
            current_std: 0.02,
            temperature_std: 0.1,
        }
    }
}

pub fn add_sensor_noise(d: &Dataset, noise: &SensorNoise, seed: u64) -> Result<Dataset> {
    let dist = |s: f64| {
        Normal::new(0.0, s).map_err(|_| Error::config(format!("invalid noise level {s}")))
    };
    let (nv, ni, nt) = (
        dist(noise.voltage_std)?,
        dist(noise.current_std)?,
        dist(noise.temperature_std)?,
    );
    let mut rng = rng::seeded(seed);
    let records = d
        .records
        .iter()
        .map(|r| {
            let mut r = *r;
            r.voltage += nv.sample(&mut rng);
            r.current += ni.sample(&mut rng);
            r.temperature += nt.sample(&mut rng);
            r
        })
        .collect();
    Ok(Dataset::new(d.name.clone(), records))
}

/// Full synthetic pipeline used by `gen-data`: drive cycle, cell, sensor noise.
pub fn synthesize(
    cycle: &CycleConfig,
    params: &CellParams,
    soc0: f64,
    noise: &SensorNoise,
) -> Result<Dataset> {
    let profile = generate_drive_cycle(cycle)?;
    let clean = simulate_cell(&profile, params, soc0, cycle.dt)?;
    add_sensor_noise(&clean, noise, rng::derive_seed(cycle.seed, 0x5e4503))
}
