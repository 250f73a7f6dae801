//! Lumped-parameter test-cell simulator.
//!
//! Two thermal states (room air, wall mass) exchange heat with each other and
//! with a constant outdoor temperature; four HVAC actuators (two heaters, two
//! coolers) couple to the room through first-order lag states. Integration is
//! explicit Euler at one step per minute, matching the acquisition rate. For
//! each series a setpoint combination is drawn uniformly from the configured
//! level sets and held for the full four hours; phases may append a final
//! hour of free fall with every actuator disabled.

use crate::dataio::{Phase, SeriesRecord, SERIES_LEN};
use crate::error::{Error, Result};
use crate::seeds::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Integration step, seconds (one minute).
const DT_SECONDS: f64 = 60.0;
/// Abort threshold for any thermal state, degC.
const STATE_LIMIT: f64 = 200.0;
/// Free-fall tail length, minutes.
pub const FREE_FALL_LEN: usize = 60;

/// One phase of the acquisition plan.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhasePlan {
    pub phase: u8,
    pub n_series: u32,
    /// 0 or 60: length of the actuator-off tail.
    pub free_fall_minutes: u32,
}

/// Simulator configuration. Level sets use `None` for a disabled actuator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub phase_plan: Vec<PhasePlan>,
    /// Allowed heater setpoints (degC); `None` = off.
    pub heater_levels: Vec<Option<f64>>,
    /// Allowed cooler setpoints (degC); `None` = off.
    pub cooler_levels: Vec<Option<f64>>,
    /// Room air heat capacity, J/K.
    pub room_capacitance: f64,
    /// Wall mass heat capacity, J/K.
    pub wall_capacitance: f64,
    /// Room-to-wall conductance, W/K.
    pub room_wall_conductance: f64,
    /// Wall-to-outdoor conductance, W/K.
    pub wall_outdoor_conductance: f64,
    /// Actuator-to-room coupling, W/K per actuator.
    pub actuator_gain: f64,
    /// Actuator first-order lag time constant, minutes.
    pub actuator_tau_minutes: f64,
    /// Constant outdoor temperature, degC.
    pub outdoor_temp: f64,
    /// Initial room temperature drawn uniformly from this range, degC.
    pub initial_temp_range: (f64, f64),
    /// Initial wall temperature sits at
    /// `outdoor + wall_initial_weight * (room - outdoor)`: 1 starts the wall
    /// at room temperature, 0 at outdoor.
    pub wall_initial_weight: f64,
    /// Measurement noise standard deviation, degC.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            // sums to 147 series; per-phase 0.2 rounding gives a 116/31 split
            phase_plan: vec![
                PhasePlan { phase: 1, n_series: 83, free_fall_minutes: 0 },
                PhasePlan { phase: 2, n_series: 38, free_fall_minutes: 60 },
                PhasePlan { phase: 3, n_series: 8, free_fall_minutes: 0 },
                PhasePlan { phase: 4, n_series: 18, free_fall_minutes: 0 },
            ],
            heater_levels: vec![None, Some(20.0), Some(40.0), Some(60.0)],
            cooler_levels: vec![None, Some(10.0), Some(15.0)],
            room_capacitance: 5.0e5,
            wall_capacitance: 2.0e6,
            room_wall_conductance: 50.0,
            wall_outdoor_conductance: 25.0,
            actuator_gain: 50.0,
            actuator_tau_minutes: 15.0,
            outdoor_temp: 10.0,
            initial_temp_range: (15.0, 30.0),
            wall_initial_weight: 0.5,
            noise_std: 0.02,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("room_capacitance", self.room_capacitance),
            ("wall_capacitance", self.wall_capacitance),
            ("room_wall_conductance", self.room_wall_conductance),
            ("wall_outdoor_conductance", self.wall_outdoor_conductance),
            ("actuator_gain", self.actuator_gain),
            ("actuator_tau_minutes", self.actuator_tau_minutes),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        if self.noise_std < 0.0 || !self.noise_std.is_finite() {
            return Err(Error::InvalidArgument("noise_std must be >= 0".into()));
        }
        if self.heater_levels.is_empty() || self.cooler_levels.is_empty() {
            return Err(Error::InvalidArgument("empty actuator level set".into()));
        }
        if self.initial_temp_range.0 > self.initial_temp_range.1 {
            return Err(Error::InvalidArgument("initial_temp_range inverted".into()));
        }
        if !(0.0..=1.0).contains(&self.wall_initial_weight) {
            return Err(Error::InvalidArgument(
                "wall_initial_weight outside [0, 1]".into(),
            ));
        }
        for p in &self.phase_plan {
            Phase::from_u8(p.phase)?;
            if p.free_fall_minutes != 0 && p.free_fall_minutes != FREE_FALL_LEN as u32 {
                return Err(Error::InvalidArgument(format!(
                    "free_fall_minutes must be 0 or {FREE_FALL_LEN}, got {}",
                    p.free_fall_minutes
                )));
            }
        }
        // explicit Euler stability guard
        let dt = DT_SECONDS;
        let room_rate =
            dt * (self.room_wall_conductance + 4.0 * self.actuator_gain) / self.room_capacitance;
        let wall_rate = dt * (self.room_wall_conductance + self.wall_outdoor_conductance)
            / self.wall_capacitance;
        if room_rate >= 1.0 || wall_rate >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "Euler step unstable: per-minute rates {room_rate:.3}, {wall_rate:.3} must be < 1"
            )));
        }
        Ok(())
    }
}

/// Drawn actuator command for one series: two heaters then two coolers,
/// matching the setpoint column order.
#[derive(Debug, Clone, Copy)]
pub struct SetpointDraw {
    pub levels: [Option<f64>; 4],
}

impl SetpointDraw {
    /// Setpoint columns as stored in the record; off encodes as 0.
    pub fn as_columns(&self) -> [f64; 4] {
        self.levels.map(|l| l.unwrap_or(0.0))
    }
}

fn draw_setpoints(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> SetpointDraw {
    let mut pick = |levels: &[Option<f64>]| levels[rng.gen_range(0..levels.len())];
    SetpointDraw {
        levels: [
            pick(&cfg.heater_levels),
            pick(&cfg.heater_levels),
            pick(&cfg.cooler_levels),
            pick(&cfg.cooler_levels),
        ],
    }
}

/// Integrate one series. `initial` sets room, wall, and actuator states;
/// `free_fall` disables all actuators for the final [`FREE_FALL_LEN`] minutes.
pub fn integrate_series(
    cfg: &SimConfig,
    setpoints: &SetpointDraw,
    initial: f64,
    free_fall: bool,
    noise_rng: Option<&mut ChaCha8Rng>,
) -> Result<Vec<f64>> {
    let mut room = initial;
    let mut wall = cfg.outdoor_temp + cfg.wall_initial_weight * (initial - cfg.outdoor_temp);
    let mut act = [initial; 4];
    let dt = DT_SECONDS;
    let normal = Normal::new(0.0, cfg.noise_std.max(f64::MIN_POSITIVE)).expect("valid normal");
    let mut rng = noise_rng;

    let mut out = Vec::with_capacity(SERIES_LEN);
    for minute in 0..SERIES_LEN {
        let noise = match rng.as_deref_mut() {
            Some(r) if cfg.noise_std > 0.0 => normal.sample(r),
            _ => 0.0,
        };
        out.push(room + noise);

        let actuators_on = !(free_fall && minute >= SERIES_LEN - FREE_FALL_LEN);
        let mut q_act = 0.0;
        if actuators_on {
            for (state, level) in act.iter_mut().zip(&setpoints.levels) {
                if let Some(sp) = level {
                    q_act += cfg.actuator_gain * (*state - room);
                    *state += (sp - *state) / cfg.actuator_tau_minutes;
                }
            }
        }
        let d_room = dt / cfg.room_capacitance
            * (cfg.room_wall_conductance * (wall - room) + q_act);
        let d_wall = dt / cfg.wall_capacitance
            * (cfg.room_wall_conductance * (room - wall)
                + cfg.wall_outdoor_conductance * (cfg.outdoor_temp - wall));
        room += d_room;
        wall += d_wall;
        if room.abs() > STATE_LIMIT || wall.abs() > STATE_LIMIT {
            return Err(Error::UnstableIntegration {
                phase: 0,
                step: minute as u32,
                value: room.max(wall),
            });
        }
    }
    Ok(out)
}

/// Simulate all series of one phase. Deterministic: each series derives its
/// own RNG from (cfg.seed, phase, index), so phases and series are
/// independent of simulation order.
pub fn simulate_phase(cfg: &SimConfig, phase: u8) -> Result<Vec<SeriesRecord>> {
    cfg.validate()?;
    let plan = cfg
        .phase_plan
        .iter()
        .find(|p| p.phase == phase)
        .ok_or_else(|| Error::InvalidArgument(format!("phase {phase} not in plan")))?;
    let phase_id = Phase::from_u8(phase)?;
    let free_fall = plan.free_fall_minutes > 0;

    let mut records = Vec::with_capacity(plan.n_series as usize);
    for step in 0..plan.n_series {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            cfg.seed,
            "sim-series",
            u64::from(phase),
            u64::from(step),
        ));
        let setpoints = draw_setpoints(cfg, &mut rng);
        let (lo, hi) = cfg.initial_temp_range;
        let initial = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        let values = integrate_series(cfg, &setpoints, initial, free_fall, Some(&mut rng))
            .map_err(|e| match e {
                Error::UnstableIntegration { value, .. } => Error::UnstableIntegration {
                    phase,
                    step,
                    value,
                },
                other => other,
            })?;
        records.push(SeriesRecord::new(
            phase_id,
            step,
            true,
            setpoints.as_columns(),
            values,
            None,
        )?);
    }
    Ok(records)
}

/// Simulate the full phase plan in plan order.
pub fn generate_dataset(cfg: &SimConfig) -> Result<Vec<SeriesRecord>> {
    cfg.validate()?;
    let mut all = Vec::new();
    for plan in &cfg.phase_plan {
        all.extend(simulate_phase(cfg, plan.phase)?);
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(cfg: &mut SimConfig) {
        cfg.noise_std = 0.0;
    }

    #[test]
    fn all_off_at_outdoor_equilibrium_is_constant() {
        let mut cfg = SimConfig::default();
        quiet(&mut cfg);
        let sp = SetpointDraw { levels: [None; 4] };
        let out = integrate_series(&cfg, &sp, cfg.outdoor_temp, false, None).unwrap();
        for v in &out {
            assert_eq!(*v, cfg.outdoor_temp);
        }
    }

    /// Reference integrator written independently of the production loop:
    /// same model, one-minute steps, no actuator abstractions.
    fn reference_single_heater(cfg: &SimConfig, sp: f64, initial: f64) -> Vec<f64> {
        let wall0 = cfg.outdoor_temp + cfg.wall_initial_weight * (initial - cfg.outdoor_temp);
        let (mut room, mut wall, mut heater) = (initial, wall0, initial);
        let mut out = Vec::with_capacity(SERIES_LEN);
        for _ in 0..SERIES_LEN {
            out.push(room);
            let q = cfg.actuator_gain * (heater - room);
            heater += (sp - heater) / cfg.actuator_tau_minutes;
            let new_room = room
                + 60.0 / cfg.room_capacitance
                    * (cfg.room_wall_conductance * (wall - room) + q);
            let new_wall = wall
                + 60.0 / cfg.wall_capacitance
                    * (cfg.room_wall_conductance * (room - wall)
                        + cfg.wall_outdoor_conductance * (cfg.outdoor_temp - wall));
            room = new_room;
            wall = new_wall;
        }
        out
    }

    #[test]
    fn single_heater_rise_is_monotone_and_matches_reference() {
        let mut cfg = SimConfig::default();
        quiet(&mut cfg);
        let sp = SetpointDraw {
            levels: [Some(60.0), None, None, None],
        };
        let initial = 15.0;
        let out = integrate_series(&cfg, &sp, initial, false, None).unwrap();
        let reference = reference_single_heater(&cfg, 60.0, initial);
        for (a, b) in out.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12, "integrators disagree: {a} vs {b}");
        }
        // sign property: room never cools while below the heater state and
        // above outdoor
        let mut heater = initial;
        let mut prev = out[0];
        for v in out.iter().skip(1) {
            if prev < heater && prev >= cfg.outdoor_temp {
                assert!(*v >= prev, "non-monotone rise: {prev} -> {v}");
            }
            heater += (60.0 - heater) / cfg.actuator_tau_minutes;
            prev = *v;
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = SimConfig {
            seed: 1234,
            ..SimConfig::default()
        };
        let a = generate_dataset(&cfg).unwrap();
        let b = generate_dataset(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_plan_yields_147_series() {
        let cfg = SimConfig::default();
        let records = generate_dataset(&cfg).unwrap();
        assert_eq!(records.len(), 147);
        for r in &records {
            assert_eq!(r.values.len(), SERIES_LEN);
            assert!(r.values.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn empty_plan_yields_empty_list() {
        let cfg = SimConfig {
            phase_plan: vec![
                PhasePlan { phase: 1, n_series: 0, free_fall_minutes: 0 },
                PhasePlan { phase: 2, n_series: 0, free_fall_minutes: 60 },
            ],
            ..SimConfig::default()
        };
        assert!(generate_dataset(&cfg).unwrap().is_empty());
    }

    /// Closed form of the discretized free-fall recurrence via 2x2
    /// eigendecomposition; actuators are off so the room/wall pair is an
    /// autonomous linear map in deviations from outdoor.
    fn free_fall_closed_form(cfg: &SimConfig, room0: f64, wall0: f64, steps: usize) -> Vec<f64> {
        let dt = 60.0;
        let a = 1.0 - dt * cfg.room_wall_conductance / cfg.room_capacitance;
        let b = dt * cfg.room_wall_conductance / cfg.room_capacitance;
        let c = dt * cfg.room_wall_conductance / cfg.wall_capacitance;
        let d = 1.0
            - dt * (cfg.room_wall_conductance + cfg.wall_outdoor_conductance)
                / cfg.wall_capacitance;
        // eigenvalues of [[a, b], [c, d]]
        let tr = a + d;
        let det = a * d - b * c;
        let disc = (tr * tr / 4.0 - det).sqrt();
        let l1 = tr / 2.0 + disc;
        let l2 = tr / 2.0 - disc;
        // eigenvectors (b != 0): v_i = (b, l_i - a)
        let (x0, y0) = (room0 - cfg.outdoor_temp, wall0 - cfg.outdoor_temp);
        // solve coefficients alpha, beta with x = alpha*b + beta*b,
        // y = alpha*(l1-a) + beta*(l2-a)
        let beta = (y0 - x0 / b * (l1 - a)) / ((l2 - a) - (l1 - a));
        let alpha = x0 / b - beta;
        (0..steps)
            .map(|k| {
                let room_dev = alpha * l1.powi(k as i32) * b + beta * l2.powi(k as i32) * b;
                cfg.outdoor_temp + room_dev
            })
            .collect()
    }

    #[test]
    fn free_fall_tail_matches_closed_form_and_decays() {
        let mut cfg = SimConfig::default();
        quiet(&mut cfg);
        let sp = SetpointDraw {
            levels: [Some(60.0), Some(40.0), None, None],
        };
        let out = integrate_series(&cfg, &sp, 25.0, true, None).unwrap();
        let tail = &out[SERIES_LEN - FREE_FALL_LEN..];

        // reconstruct the wall state at the moment free fall begins by
        // replaying the constrained interval
        let wall0 = cfg.outdoor_temp + cfg.wall_initial_weight * (25.0 - cfg.outdoor_temp);
        let (mut room, mut wall) = (25.0, wall0);
        let mut act = [25.0_f64; 4];
        for _ in 0..SERIES_LEN - FREE_FALL_LEN {
            let mut q = 0.0;
            for (state, level) in act.iter_mut().zip(&sp.levels) {
                if let Some(s) = level {
                    q += cfg.actuator_gain * (*state - room);
                    *state += (s - *state) / cfg.actuator_tau_minutes;
                }
            }
            let new_room = room
                + 60.0 / cfg.room_capacitance * (cfg.room_wall_conductance * (wall - room) + q);
            let new_wall = wall
                + 60.0 / cfg.wall_capacitance
                    * (cfg.room_wall_conductance * (room - wall)
                        + cfg.wall_outdoor_conductance * (cfg.outdoor_temp - wall));
            room = new_room;
            wall = new_wall;
        }
        let closed = free_fall_closed_form(&cfg, room, wall, FREE_FALL_LEN);
        for (a, b) in tail.iter().zip(&closed) {
            assert!((a - b).abs() < 1e-6, "closed form mismatch: {a} vs {b}");
        }
        // decay toward outdoor while above it
        for w in tail.windows(2) {
            assert!(w[0] > cfg.outdoor_temp);
            assert!(w[1] - cfg.outdoor_temp <= w[0] - cfg.outdoor_temp + 1e-12);
        }
    }

    #[test]
    fn energy_sign_property_all_off() {
        let mut cfg = SimConfig::default();
        quiet(&mut cfg);
        let sp = SetpointDraw { levels: [None; 4] };
        for initial in [2.0, 10.0, 35.0] {
            let out = integrate_series(&cfg, &sp, initial, false, None).unwrap();
            let mut prev = (out[0] - cfg.outdoor_temp).abs();
            for v in out.iter().skip(1) {
                let dev = (v - cfg.outdoor_temp).abs();
                assert!(dev <= prev + 1e-12, "|room - outdoor| grew: {prev} -> {dev}");
                prev = dev;
            }
        }
    }

    #[test]
    fn linearity_in_deviations() {
        let mut cfg = SimConfig::default();
        quiet(&mut cfg);
        let alpha = 0.37;
        let scale = |t: f64| cfg.outdoor_temp + alpha * (t - cfg.outdoor_temp);
        let sp = SetpointDraw {
            levels: [Some(60.0), None, Some(10.0), None],
        };
        let sp_scaled = SetpointDraw {
            levels: sp.levels.map(|l| l.map(scale)),
        };
        let base = integrate_series(&cfg, &sp, 28.0, false, None).unwrap();
        let scaled = integrate_series(&cfg, &sp_scaled, scale(28.0), false, None).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            let expect = scale(*a);
            assert!((b - expect).abs() < 1e-9, "linearity broken: {b} vs {expect}");
        }
    }

    #[test]
    fn unstable_parameters_rejected() {
        let cfg = SimConfig {
            room_capacitance: 100.0, // per-minute rate far above 1
            ..SimConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
