//! Explicit time steppers and single-path simulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::model::{AdditiveDrift, Dynamics, Model};
use crate::params::ModelParams;
use crate::rng::PathNoise;
use crate::transform::phi;

/// Halvings allowed in the transformed scheme before the step is declared stuck.
pub const MAX_HALVINGS: i32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    TamedEulerIto,
    EulerIto,
    HeunStratonovich,
    YEulerAdditive,
    OdeAdaptive,
    /// Tamed Euler near the origin, the transformed additive-noise equation far out.
    HybridTamedY,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::TamedEulerIto => "tamed_euler_ito",
            Scheme::EulerIto => "euler_ito",
            Scheme::HeunStratonovich => "heun_stratonovich",
            Scheme::YEulerAdditive => "y_euler_additive",
            Scheme::OdeAdaptive => "ode_adaptive",
            Scheme::HybridTamedY => "hybrid_tamed_y",
        }
    }
}

/// What a simulated path keeps besides its final state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recording {
    /// Initial state only.
    #[default]
    Endpoints,
    /// Every accepted step.
    Full,
    /// The state at each listed time (steps are shortened to land on them).
    Checkpoints(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub dt0: f64,
    pub t_end: f64,
    #[serde(default = "default_true")]
    pub adaptive: bool,
    pub x_max: f64,
    pub eps_zero: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub watch_radius: Option<f64>,
    #[serde(default)]
    pub record: Recording,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
}

fn default_true() -> bool {
    true
}

fn default_max_steps() -> u64 {
    200_000_000
}

impl SchemeConfig {
    /// Adaptive configuration inheriting `x_max` and `eps_zero` from the model.
    pub fn new(scheme: Scheme, dt0: f64, t_end: f64, params: &ModelParams, seed: u64) -> Self {
        Self {
            scheme,
            dt0,
            t_end,
            adaptive: true,
            x_max: params.x_max,
            eps_zero: params.eps_zero,
            seed,
            watch_radius: None,
            record: Recording::Endpoints,
            max_steps: default_max_steps(),
        }
    }

    pub fn with_watch_radius(mut self, r: f64) -> Self {
        self.watch_radius = Some(r);
        self
    }

    pub fn with_record(mut self, record: Recording) -> Self {
        self.record = record;
        self
    }

    pub fn with_adaptive(mut self, adaptive: bool) -> Self {
        self.adaptive = adaptive;
        self
    }

    pub fn dt_floor(&self) -> f64 {
        self.dt0 * 2f64.powi(-MAX_HALVINGS)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt0 > 0.0 && self.dt0.is_finite()) {
            return Err(Error::InvalidParams(format!("dt0 must be > 0, got {}", self.dt0)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParams(format!("t_end must be > 0, got {}", self.t_end)));
        }
        if !(self.x_max > 0.0) {
            return Err(Error::InvalidParams(format!("x_max must be > 0, got {}", self.x_max)));
        }
        if !(self.eps_zero >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "eps_zero must be >= 0, got {}",
                self.eps_zero
            )));
        }
        if let Recording::Checkpoints(ts) = &self.record {
            let increasing = ts.windows(2).all(|w| w[0] < w[1]);
            let in_range = ts.iter().all(|&t| t > 0.0 && t <= self.t_end);
            if !increasing || !in_range {
                return Err(Error::InvalidParams(format!(
                    "checkpoints must be increasing and in (0, t_end], got {ts:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Why a path stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathStatus {
    Completed { t: f64 },
    Exploded { t: f64 },
    HitZero { t: f64 },
    EnteredBall { t: f64, radius: f64 },
    /// A non-finite state appeared.
    Invalid { t: f64 },
    StepLimit { t: f64 },
}

impl PathStatus {
    pub fn time(&self) -> f64 {
        match *self {
            PathStatus::Completed { t }
            | PathStatus::Exploded { t }
            | PathStatus::HitZero { t }
            | PathStatus::EnteredBall { t, .. }
            | PathStatus::Invalid { t }
            | PathStatus::StepLimit { t } => t,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PathStatus::Completed { .. } => "completed",
            PathStatus::Exploded { .. } => "exploded",
            PathStatus::HitZero { .. } => "hit_zero",
            PathStatus::EnteredBall { .. } => "entered_ball",
            PathStatus::Invalid { .. } => "invalid",
            PathStatus::StepLimit { .. } => "step_limit",
        }
    }

    pub fn is_exploded(&self) -> bool {
        matches!(self, PathStatus::Exploded { .. })
    }

    pub fn is_hit_zero(&self) -> bool {
        matches!(self, PathStatus::HitZero { .. })
    }
}

#[derive(Debug, Clone)]
pub struct SdePath {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub final_state: Vector,
    pub status: PathStatus,
    pub path_id: u64,
    pub seed: u64,
    pub steps: u64,
    /// Steps whose size fell below `dt0·2⁻²⁰`.
    pub floor_steps: u64,
    /// Smallest accepted step.
    pub min_dt: f64,
    /// Smallest norm seen along the path (the initial state included).
    pub min_norm: f64,
}

impl SdePath {
    /// State recorded at time `t`, if any.
    pub fn state_at(&self, t: f64) -> Option<&Vector> {
        self.times.iter().position(|&s| s == t).map(|i| &self.states[i])
    }
}

/// `x + dt·b̃(x) + σ(x)dW`.
pub fn step_euler_ito<D: Dynamics + ?Sized>(dynamics: &D, x: &Vector, dt: f64, dw: &Vector) -> Vector {
    x + dynamics.ito_drift(x) * dt + dynamics.sigma(x) * dw
}

fn tamed(b: Vector, dt: f64) -> Vector {
    let n = b.norm();
    b * (dt / (1.0 + dt * n))
}

/// `x + dt·b̃/(1+dt|b̃|) + σ(x)dW`; the drift increment always has norm below 1.
pub fn step_tamed_euler<D: Dynamics + ?Sized>(dynamics: &D, x: &Vector, dt: f64, dw: &Vector) -> Vector {
    x + tamed(dynamics.ito_drift(x), dt) + dynamics.sigma(x) * dw
}

/// Heun predictor–corrector for the Stratonovich form, taming each drift evaluation.
pub fn step_heun_stratonovich<D: Dynamics + ?Sized>(
    dynamics: &D,
    x: &Vector,
    dt: f64,
    dw: &Vector,
) -> Vector {
    let drift0 = tamed(dynamics.drift(x), dt);
    let noise0 = dynamics.sigma(x) * dw;
    let predictor = x + &drift0 + &noise0;
    let drift1 = tamed(dynamics.drift(&predictor), dt);
    let noise1 = dynamics.sigma(&predictor) * dw;
    x + (drift0 + drift1) * 0.5 + (noise0 + noise1) * 0.5
}

/// `y + dt·g(y) + dW`.
pub fn step_y_euler(g: &Vector, y: &Vector, dt: f64, dw: &Vector) -> Vector {
    y + g * dt + dw
}

/// Outcome of one transformed-scheme step.
#[derive(Debug, Clone, PartialEq)]
pub enum YStep {
    Accepted { y: Vector, dt: f64 },
    /// Drift undefined, or still `|g|·dt > 0.1|y|` at the step floor.
    Stuck,
}

/// Selects the step for the transformed scheme by halving from `dt` until
/// `|g|·dt ≤ 0.1|y|`, then takes the Euler step with increment `√dt·z`.
pub fn step_y_additive<G: AdditiveDrift + ?Sized>(
    ctx: &G,
    y: &Vector,
    dt: f64,
    dt_floor: f64,
    z: &Vector,
) -> YStep {
    let Some(g) = ctx.g(y) else {
        return YStep::Stuck;
    };
    let gn = g.norm();
    let limit = 0.1 * y.norm();
    let mut h = dt;
    while gn * h > limit {
        if h * 0.5 < dt_floor {
            return YStep::Stuck;
        }
        h *= 0.5;
    }
    let dw = z * h.sqrt();
    YStep::Accepted { y: step_y_euler(&g, y, h, &dw), dt: h }
}

/// One classical Runge–Kutta step of `x' = b(x)`.
pub fn step_rk4<D: Dynamics + ?Sized>(dynamics: &D, x: &Vector, dt: f64) -> Vector {
    let k1 = dynamics.drift(x);
    let k2 = dynamics.drift(&(x + &k1 * (0.5 * dt)));
    let k3 = dynamics.drift(&(x + &k2 * (0.5 * dt)));
    let k4 = dynamics.drift(&(x + &k3 * dt));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

struct Recorder {
    mode: Recording,
    next_checkpoint: usize,
    times: Vec<f64>,
    states: Vec<Vector>,
}

impl Recorder {
    fn new(mode: &Recording, x0: &Vector) -> Self {
        let mut r = Self { mode: mode.clone(), next_checkpoint: 0, times: Vec::new(), states: Vec::new() };
        if !matches!(r.mode, Recording::Checkpoints(_)) {
            r.times.push(0.0);
            r.states.push(x0.clone());
        }
        r
    }

    /// Next time the stepper must land on exactly.
    fn target(&self) -> Option<f64> {
        match &self.mode {
            Recording::Checkpoints(ts) => ts.get(self.next_checkpoint).copied(),
            _ => None,
        }
    }

    fn push(&mut self, t: f64, x: &Vector) {
        match &self.mode {
            Recording::Endpoints => {}
            Recording::Full => {
                self.times.push(t);
                self.states.push(x.clone());
            }
            Recording::Checkpoints(ts) => {
                if ts.get(self.next_checkpoint) == Some(&t) {
                    self.times.push(t);
                    self.states.push(x.clone());
                    self.next_checkpoint += 1;
                }
            }
        }
    }
}

struct Clock {
    t: f64,
    t_end: f64,
}

impl Clock {
    fn done(&self) -> bool {
        self.t >= self.t_end || self.t_end - self.t <= 1e-12 * self.t_end
    }

    /// Clips `dt` to the horizon and to `target`; returns the step and the time after it.
    fn clip(&self, dt: f64, target: Option<f64>) -> (f64, f64) {
        let stop = target.map_or(self.t_end, |c| c.min(self.t_end));
        if self.t + dt >= stop || stop - (self.t + dt) <= 1e-12 * stop {
            (stop - self.t, stop)
        } else {
            (dt, self.t + dt)
        }
    }
}

/// Simulates an X-space scheme (`tamed_euler_ito`, `euler_ito`, `heun_stratonovich`,
/// `ode_adaptive`). The adaptive step is `dt0/(1+|b̃(x)|)` for the stochastic schemes and
/// `dt0·max(1,|x|)/(1+|b(x)|)` for the ODE.
pub fn simulate_x<D: Dynamics + ?Sized>(
    dynamics: &D,
    cfg: &SchemeConfig,
    x0: &Vector,
    path_id: u64,
) -> Result<SdePath> {
    cfg.validate()?;
    if matches!(cfg.scheme, Scheme::YEulerAdditive | Scheme::HybridTamedY) {
        return Err(Error::precondition("simulate_x needs an X-space scheme"));
    }
    if x0.len() != dynamics.dim() || !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::precondition("x0 must be finite with the model's dimension"));
    }
    let d = dynamics.dim();
    let floor = cfg.dt_floor();
    let mut noise = PathNoise::new(cfg.seed, path_id);
    let mut rec = Recorder::new(&cfg.record, x0);
    let mut clock = Clock { t: 0.0, t_end: cfg.t_end };
    let mut x = x0.clone();
    let mut dw = Vector::zeros(d);
    let mut steps = 0u64;
    let mut floor_steps = 0u64;
    let mut min_dt = f64::INFINITY;
    let mut min_norm = x.norm();

    let outside_watch = |x: &Vector| cfg.watch_radius.map_or(true, |w| x.norm() >= w);
    let status = 'run: {
        if let Some(w) = cfg.watch_radius {
            if !outside_watch(&x) {
                break 'run PathStatus::EnteredBall { t: 0.0, radius: w };
            }
        }
        if x.norm() >= cfg.x_max {
            break 'run PathStatus::Exploded { t: 0.0 };
        }
        loop {
            if clock.done() {
                break 'run PathStatus::Completed { t: clock.t };
            }
            if steps >= cfg.max_steps {
                break 'run PathStatus::StepLimit { t: clock.t };
            }
            let base = if !cfg.adaptive {
                cfg.dt0
            } else if cfg.scheme == Scheme::OdeAdaptive {
                cfg.dt0 * x.norm().max(1.0) / (1.0 + dynamics.drift(&x).norm())
            } else {
                cfg.dt0 / (1.0 + dynamics.ito_drift(&x).norm())
            };
            let (dt, t_next) = clock.clip(base, rec.target());
            if dt < floor {
                floor_steps += 1;
            }
            min_dt = min_dt.min(dt);
            let next = match cfg.scheme {
                Scheme::OdeAdaptive => step_rk4(dynamics, &x, dt),
                scheme => {
                    noise.increment(steps, dt, &mut dw);
                    match scheme {
                        Scheme::EulerIto => step_euler_ito(dynamics, &x, dt, &dw),
                        Scheme::TamedEulerIto => step_tamed_euler(dynamics, &x, dt, &dw),
                        _ => step_heun_stratonovich(dynamics, &x, dt, &dw),
                    }
                }
            };
            steps += 1;
            clock.t = t_next;
            if !next.iter().all(|v| v.is_finite()) {
                break 'run PathStatus::Invalid { t: clock.t };
            }
            x = next;
            let r = x.norm();
            min_norm = min_norm.min(r);
            rec.push(clock.t, &x);
            if r >= cfg.x_max {
                break 'run PathStatus::Exploded { t: clock.t };
            }
            if let Some(w) = cfg.watch_radius {
                if r < w {
                    break 'run PathStatus::EnteredBall { t: clock.t, radius: w };
                }
            }
        }
    };
    Ok(SdePath {
        times: rec.times,
        states: rec.states,
        final_state: x,
        status,
        path_id,
        seed: cfg.seed,
        steps,
        floor_steps,
        min_dt,
        min_norm,
    })
}

/// Simulates `dY = g(Y)dt + dW` from `y0`. Stops with `hit_zero` once `|y| ≤ eps_zero`,
/// when the step cannot be made small enough, or (in one dimension) when `y` changes sign.
pub fn simulate_y<G: AdditiveDrift + ?Sized>(
    ctx: &G,
    cfg: &SchemeConfig,
    y0: &Vector,
    path_id: u64,
) -> Result<SdePath> {
    cfg.validate()?;
    if y0.len() != ctx.dim() || !y0.iter().all(|v| v.is_finite()) {
        return Err(Error::precondition("y0 must be finite with the model's dimension"));
    }
    if y0.norm() == 0.0 {
        return Err(Error::precondition("the transformed scheme needs y0 != 0"));
    }
    let d = ctx.dim();
    let floor = cfg.dt_floor();
    let mut noise = PathNoise::new(cfg.seed, path_id);
    let mut rec = Recorder::new(&cfg.record, y0);
    let mut clock = Clock { t: 0.0, t_end: cfg.t_end };
    let mut y = y0.clone();
    let mut z = Vector::zeros(d);
    let mut steps = 0u64;
    let mut min_dt = f64::INFINITY;
    let mut min_norm = y.norm();

    let status = 'run: {
        if y.norm() <= cfg.eps_zero {
            break 'run PathStatus::HitZero { t: 0.0 };
        }
        loop {
            if clock.done() {
                break 'run PathStatus::Completed { t: clock.t };
            }
            if steps >= cfg.max_steps {
                break 'run PathStatus::StepLimit { t: clock.t };
            }
            let (dt, _) = clock.clip(cfg.dt0, rec.target());
            noise.fill(steps, z.as_mut_slice());
            let (next, h) = match step_y_additive(ctx, &y, dt, floor.min(dt), &z) {
                YStep::Accepted { y, dt } => (y, dt),
                YStep::Stuck => break 'run PathStatus::HitZero { t: clock.t },
            };
            steps += 1;
            min_dt = min_dt.min(h);
            clock.t = if h == dt { clock.clip(dt, rec.target()).1 } else { clock.t + h };
            if !next.iter().all(|v| v.is_finite()) {
                break 'run PathStatus::Invalid { t: clock.t };
            }
            let crossed = d == 1 && next[0] * y[0] <= 0.0;
            y = next;
            let r = y.norm();
            min_norm = min_norm.min(r);
            rec.push(clock.t, &y);
            if r <= cfg.eps_zero || crossed {
                break 'run PathStatus::HitZero { t: clock.t };
            }
        }
    };
    Ok(SdePath {
        times: rec.times,
        states: rec.states,
        final_state: y,
        status,
        path_id,
        seed: cfg.seed,
        steps,
        floor_steps: 0,
        min_dt,
        min_norm,
    })
}

/// Radii (in units of `R`) where the hybrid scheme leaves and re-enters X-coordinates.
pub const HYBRID_OUT: f64 = 2.0;
pub const HYBRID_IN: f64 = 1.5;

/// Hybrid path: tamed Euler while `|x| < 2R`; once outside, `y = φ(x)` follows
/// `dY = g(Y)dt + dW` (exact for `|x| ≥ R`) until `|x| ≤ 1.5R`. Both phases consume
/// the same increment stream. States are recorded in X-coordinates; `hit_zero` means
/// the transformed step could not be resolved, `exploded` that `|x| ≥ x_max`.
pub fn simulate_hybrid(model: &Model, cfg: &SchemeConfig, x0: &Vector, path_id: u64) -> Result<SdePath> {
    cfg.validate()?;
    let d = model.params.d;
    if x0.len() != d || !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::precondition("x0 must be finite with the model's dimension"));
    }
    let ctx = model.transform_context();
    let eta = model.params.eta;
    let r = model.params.r_switch;
    let floor = cfg.dt_floor();
    let mut noise = PathNoise::new(cfg.seed, path_id);
    let mut rec = Recorder::new(&cfg.record, x0);
    let mut clock = Clock { t: 0.0, t_end: cfg.t_end };
    let mut x = x0.clone();
    let mut y: Option<Vector> = if x.norm() >= HYBRID_OUT * r { Some(phi(eta, &x)?) } else { None };
    let mut z = Vector::zeros(d);
    let mut steps = 0u64;
    let mut floor_steps = 0u64;
    let mut min_dt = f64::INFINITY;
    let mut min_norm = x.norm();

    let status = 'run: {
        loop {
            if clock.done() {
                break 'run PathStatus::Completed { t: clock.t };
            }
            if steps >= cfg.max_steps {
                break 'run PathStatus::StepLimit { t: clock.t };
            }
            noise.fill(steps, z.as_mut_slice());
            if let Some(yv) = &y {
                let (dt, _) = clock.clip(cfg.dt0, rec.target());
                let (next, h) = match step_y_additive(&ctx, yv, dt, floor.min(dt), &z) {
                    YStep::Accepted { y, dt } => (y, dt),
                    YStep::Stuck => break 'run PathStatus::HitZero { t: clock.t },
                };
                steps += 1;
                min_dt = min_dt.min(h);
                clock.t = if h == dt { clock.clip(dt, rec.target()).1 } else { clock.t + h };
                let Ok(xn) = ctx.phi_inv(&next) else {
                    break 'run PathStatus::HitZero { t: clock.t };
                };
                if !xn.iter().all(|v| v.is_finite()) {
                    break 'run PathStatus::Invalid { t: clock.t };
                }
                x = xn;
                y = (x.norm() > HYBRID_IN * r).then_some(next);
            } else {
                let base = if cfg.adaptive { cfg.dt0 / (1.0 + model.ito_drift(&x).norm()) } else { cfg.dt0 };
                let (dt, t_next) = clock.clip(base, rec.target());
                if dt < floor {
                    floor_steps += 1;
                }
                min_dt = min_dt.min(dt);
                let dw = &z * dt.sqrt();
                let next = step_tamed_euler(model, &x, dt, &dw);
                steps += 1;
                clock.t = t_next;
                if !next.iter().all(|v| v.is_finite()) {
                    break 'run PathStatus::Invalid { t: clock.t };
                }
                x = next;
                if x.norm() >= HYBRID_OUT * r {
                    y = Some(phi(eta, &x)?);
                }
            }
            let rn = x.norm();
            min_norm = min_norm.min(rn);
            rec.push(clock.t, &x);
            if rn >= cfg.x_max {
                break 'run PathStatus::Exploded { t: clock.t };
            }
        }
    };
    Ok(SdePath {
        times: rec.times,
        states: rec.states,
        final_state: x,
        status,
        path_id,
        seed: cfg.seed,
        steps,
        floor_steps,
        min_dt,
        min_norm,
    })
}

/// Runs `cfg.scheme` on the model; for `y_euler_additive` the initial state and the
/// recorded states are in transformed coordinates.
pub fn simulate_path(model: &Model, cfg: &SchemeConfig, x0: &Vector, path_id: u64) -> Result<SdePath> {
    match cfg.scheme {
        Scheme::YEulerAdditive => simulate_y(&model.transform_context(), cfg, x0, path_id),
        Scheme::HybridTamedY => simulate_hybrid(model, cfg, x0, path_id),
        _ => simulate_x(model, cfg, x0, path_id),
    }
}

/// Deterministic blow-up of `x' = b(x)`.
#[derive(Debug, Clone, Serialize)]
pub struct OdeBlowup {
    /// First time `|x| ≥ x_max`, if reached before the horizon.
    pub reach_time: Option<f64>,
    /// `|x0|^{1-m}/(κ(m-1))` for the power drift.
    pub analytic_blowup: Option<f64>,
    pub steps: u64,
}

/// Analytic blow-up time of `x' = κ|x|^{m-1}x`.
pub fn power_blowup_time(kappa: f64, m: f64, r0: f64) -> f64 {
    r0.powf(1.0 - m) / (kappa * (m - 1.0))
}

/// Integrates the noise-free equation with RK4 until `|x| ≥ x_max` or `t_end`.
pub fn ode_solve_explosive<D: Dynamics + ?Sized>(
    dynamics: &D,
    params: &ModelParams,
    power: Option<(f64, f64)>,
    x0: &Vector,
    dt0: f64,
    t_end: f64,
) -> Result<(SdePath, OdeBlowup)> {
    let mut cfg = SchemeConfig::new(Scheme::OdeAdaptive, dt0, t_end, params, 0);
    cfg.record = Recording::Full;
    let path = simulate_x(dynamics, &cfg, x0, 0)?;
    let reach_time = path.status.is_exploded().then(|| path.status.time());
    let analytic_blowup = power.map(|(kappa, m)| power_blowup_time(kappa, m, x0.norm()));
    let steps = path.steps;
    Ok((path, OdeBlowup { reach_time, analytic_blowup, steps }))
}

/// Runs the Itô Euler scheme and the Stratonovich Heun scheme on the same increments and
/// the same steps `dt0/(1+max|b̃|)`; returns `sup_t |X^Itô − X^Strat|`. Both paths stop at
/// `t_end` or once either leaves the ball of radius `exit_radius`.
pub fn paired_discrepancy<D: Dynamics + ?Sized>(
    dynamics: &D,
    dt0: f64,
    t_end: f64,
    x0: &Vector,
    seed: u64,
    path_id: u64,
    exit_radius: f64,
) -> PairedRun {
    let d = dynamics.dim();
    let mut noise = PathNoise::new(seed, path_id);
    let mut dw = Vector::zeros(d);
    let mut xi = x0.clone();
    let mut xs = x0.clone();
    let mut clock = Clock { t: 0.0, t_end };
    let mut sup = 0.0f64;
    let mut steps = 0u64;
    let mut exited = false;
    while !clock.done() {
        let bn = dynamics.ito_drift(&xi).norm().max(dynamics.ito_drift(&xs).norm());
        let (dt, t_next) = clock.clip(dt0 / (1.0 + bn), None);
        noise.increment(steps, dt, &mut dw);
        xi = step_tamed_euler(dynamics, &xi, dt, &dw);
        xs = step_heun_stratonovich(dynamics, &xs, dt, &dw);
        steps += 1;
        clock.t = t_next;
        let gap = (&xi - &xs).norm();
        if !gap.is_finite() {
            sup = f64::INFINITY;
            break;
        }
        sup = sup.max(gap);
        if xi.norm() >= exit_radius || xs.norm() >= exit_radius {
            exited = true;
            break;
        }
    }
    PairedRun { sup_error: sup, t_stop: clock.t, steps, exited }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PairedRun {
    pub sup_error: f64,
    pub t_stop: f64,
    pub steps: u64,
    pub exited: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakDrift {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub target: Vec<f64>,
    /// Largest `|mean_i − b̃_i| / se_i`.
    pub max_z: f64,
}

/// Mean one-step Heun increment divided by `dt` from `x`, over `n` antithetic pairs,
/// compared with the Itô drift.
pub fn heun_weak_drift<D: Dynamics + ?Sized>(dynamics: &D, x: &Vector, dt: f64, n: u64, seed: u64) -> WeakDrift {
    let d = x.len();
    let mut noise = PathNoise::new(seed, 0);
    let mut dw = Vector::zeros(d);
    let mut sum = Vector::zeros(d);
    let mut sum_sq = Vector::zeros(d);
    for i in 0..n {
        noise.increment(i, dt, &mut dw);
        // antithetic pairs cancel the O(√dt) noise term exactly in the mean
        let plus = step_heun_stratonovich(dynamics, x, dt, &dw) - x;
        let minus = step_heun_stratonovich(dynamics, x, dt, &(-&dw)) - x;
        let v = (plus + minus) * (0.5 / dt);
        sum += &v;
        sum_sq += v.component_mul(&v);
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean.component_mul(&mean)) * (nf / (nf - 1.0));
    let se = var.map(|v| (v.max(0.0) / nf).sqrt());
    let target = dynamics.ito_drift(x);
    let max_z = (0..d).map(|i| (mean[i] - target[i]).abs() / se[i]).fold(0.0, f64::max);
    WeakDrift { mean: mean.iter().copied().collect(), se: se.iter().copied().collect(), target: target.iter().copied().collect(), max_z }
}
