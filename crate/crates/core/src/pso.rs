//! Particle swarm search over the (layers, neurons, epochs) box.
//!
//! Positions are continuous; a particle is scored at the nearest integer
//! configuration. The fitness function is supplied by the caller as a batch
//! evaluator so the particles of one iteration can be scored concurrently;
//! personal and global bests are always reduced in ascending particle order.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default inertia weight.
pub const DEFAULT_INERTIA: f64 = 0.729;
/// Default absolute tolerance on the change of the global best between two
/// consecutive iterations.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Inclusive integer ranges of the three searched hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBounds {
    pub min_layers: u32,
    pub max_layers: u32,
    pub min_neurons: u32,
    pub max_neurons: u32,
    pub min_epochs: u32,
    pub max_epochs: u32,
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            min_layers: 1,
            max_layers: 5,
            min_neurons: 1,
            max_neurons: 200,
            min_epochs: 1,
            max_epochs: 50,
        }
    }
}

impl SearchBounds {
    pub fn new(layers: (u32, u32), neurons: (u32, u32), epochs: (u32, u32)) -> Result<Self> {
        let bounds = Self {
            min_layers: layers.0,
            max_layers: layers.1,
            min_neurons: neurons.0,
            max_neurons: neurons.1,
            min_epochs: epochs.0,
            max_epochs: epochs.1,
        };
        bounds.validate()?;
        Ok(bounds)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, lo, hi) in [
            ("layers", self.min_layers, self.max_layers),
            ("neurons", self.min_neurons, self.max_neurons),
            ("epochs", self.min_epochs, self.max_epochs),
        ] {
            if lo < 1 {
                return Err(Error::config(format!("min_{name} must be >= 1, got {lo}")));
            }
            if lo > hi {
                return Err(Error::config(format!(
                    "min_{name} ({lo}) exceeds max_{name} ({hi})"
                )));
            }
        }
        Ok(())
    }

    pub fn lower(&self) -> [f64; 3] {
        [
            self.min_layers as f64,
            self.min_neurons as f64,
            self.min_epochs as f64,
        ]
    }

    pub fn upper(&self) -> [f64; 3] {
        [
            self.max_layers as f64,
            self.max_neurons as f64,
            self.max_epochs as f64,
        ]
    }

    pub fn velocity_bounds(&self) -> VelocityBounds {
        let (lo, hi) = (self.lower(), self.upper());
        VelocityBounds {
            max_v: [
                0.1 * (hi[0] - lo[0]),
                0.1 * (hi[1] - lo[1]),
                0.1 * (hi[2] - lo[2]),
            ],
        }
    }

    pub fn contains(&self, cfg: ModelConfig) -> bool {
        (self.min_layers..=self.max_layers).contains(&cfg.layers)
            && (self.min_neurons..=self.max_neurons).contains(&cfg.neurons)
            && (self.min_epochs..=self.max_epochs).contains(&cfg.epochs)
    }

    /// Number of integer configurations inside the box.
    pub fn size(&self) -> usize {
        let span = |lo: u32, hi: u32| (hi - lo + 1) as usize;
        span(self.min_layers, self.max_layers)
            * span(self.min_neurons, self.max_neurons)
            * span(self.min_epochs, self.max_epochs)
    }

    /// All integer configurations, lexicographic in (layers, neurons, epochs).
    pub fn configs(&self) -> impl Iterator<Item = ModelConfig> + '_ {
        (self.min_layers..=self.max_layers).flat_map(move |layers| {
            (self.min_neurons..=self.max_neurons).flat_map(move |neurons| {
                (self.min_epochs..=self.max_epochs).map(move |epochs| ModelConfig {
                    layers,
                    neurons,
                    epochs,
                })
            })
        })
    }
}

/// Symmetric per-dimension velocity limits, always derived from the search box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VelocityBounds {
    max_v: [f64; 3],
}

impl VelocityBounds {
    pub fn max_v(&self) -> [f64; 3] {
        self.max_v
    }

    pub fn min_v(&self) -> [f64; 3] {
        self.max_v.map(|v| -v)
    }

    fn clamp(&self, v: Velocity) -> Velocity {
        let a = v.to_array();
        Velocity::from_array(std::array::from_fn(|d| {
            a[d].clamp(-self.max_v[d], self.max_v[d])
        }))
    }
}

/// Continuous coordinates of a particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub l: f64,
    pub n: f64,
    pub e: f64,
}

impl Position {
    pub fn new(l: f64, n: f64, e: f64) -> Self {
        Self { l, n, e }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.l, self.n, self.e]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity {
    pub vl: f64,
    pub vn: f64,
    pub ve: f64,
}

impl Velocity {
    pub fn new(vl: f64, vn: f64, ve: f64) -> Self {
        Self { vl, vn, ve }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.vl, self.vn, self.ve]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// The integer triple that instantiates one model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: u32,
    pub neurons: u32,
    pub epochs: u32,
}

impl ModelConfig {
    pub fn new(layers: u32, neurons: u32, epochs: u32) -> Self {
        Self {
            layers,
            neurons,
            epochs,
        }
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(L={}, N={}, E={})",
            self.layers, self.neurons, self.epochs
        )
    }
}

/// Nearest-integer configuration for a position.
pub fn round_to_config(pos: Position) -> ModelConfig {
    let r = |x: f64| x.round().max(0.0) as u32;
    ModelConfig::new(r(pos.l), r(pos.n), r(pos.e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    /// The worst possible score under this direction.
    pub fn worst(self) -> f64 {
        match self {
            Direction::Maximize => f64::NEG_INFINITY,
            Direction::Minimize => f64::INFINITY,
        }
    }

    /// True when `candidate` is strictly better than `incumbent`.
    pub fn improves(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Direction::Maximize => candidate > incumbent,
            Direction::Minimize => candidate < incumbent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fitness {
    pub value: f64,
    pub direction: Direction,
}

impl Fitness {
    pub fn new(value: f64, direction: Direction) -> Self {
        Self { value, direction }
    }

    pub fn improves_on(&self, other: &Fitness) -> bool {
        self.direction.improves(self.value, other.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoCoefficients {
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
}

impl PsoCoefficients {
    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.w <= 1.0) {
            return Err(Error::config(format!(
                "w must lie in (0, 1], got {}",
                self.w
            )));
        }
        for (name, c) in [("c1", self.c1), ("c2", self.c2)] {
            if !(0.0..=4.0).contains(&c) {
                return Err(Error::config(format!("{name} must lie in [0, 4], got {c}")));
            }
        }
        Ok(())
    }
}

/// How the acceleration coefficients are chosen for a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum CoefficientMode {
    /// Drawn once per run, uniform in [0, 4], from the run seed.
    Random,
    Fixed {
        c1: f64,
        c2: f64,
    },
}

impl CoefficientMode {
    pub fn resolve(self, w: f64, seed: u64) -> PsoCoefficients {
        match self {
            CoefficientMode::Fixed { c1, c2 } => PsoCoefficients { w, c1, c2 },
            CoefficientMode::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(1);
                let c1 = rng.random_range(0.0..=4.0);
                let c2 = rng.random_range(0.0..=4.0);
                PsoCoefficients { w, c1, c2 }
            }
        }
    }
}

/// Which velocity equation to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateRule {
    /// `c·rand·(best − x)`: attraction toward the best positions.
    #[default]
    Canonical,
    /// `c·rand·(best − v)`: the velocity is subtracted instead of the position.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub position: Position,
    pub velocity: Velocity,
    pub pbest_position: Position,
    pub pbest_fitness: Fitness,
}

/// One scored particle position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    /// 0 for the initial placement, then 1, 2, ... per step.
    pub iteration: usize,
    pub particle: usize,
    pub position: Position,
    pub config: ModelConfig,
    pub fitness: f64,
}

#[derive(Debug, Clone)]
pub struct SwarmState {
    pub particles: Vec<ParticleState>,
    pub gbest_position: Position,
    pub gbest_fitness: Fitness,
    pub iteration: usize,
    pub rng_seed: u64,
    bounds: SearchBounds,
    rng: ChaCha8Rng,
}

/// `v' = w·v + c1·r1·(pbest − a) + c2·r2·(gbest − a)` per dimension, where `a`
/// is the position (canonical) or the velocity (literal), then clamped.
pub fn update_velocity<R: Rng + ?Sized>(
    particle: &ParticleState,
    gbest: Position,
    coef: &PsoCoefficients,
    bounds: &VelocityBounds,
    rule: UpdateRule,
    rng: &mut R,
) -> Velocity {
    let v = particle.velocity.to_array();
    let x = particle.position.to_array();
    let pbest = particle.pbest_position.to_array();
    let gbest = gbest.to_array();
    let mut out = [0.0; 3];
    for d in 0..3 {
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let anchor = match rule {
            UpdateRule::Canonical => x[d],
            UpdateRule::Literal => v[d],
        };
        out[d] =
            coef.w * v[d] + coef.c1 * r1 * (pbest[d] - anchor) + coef.c2 * r2 * (gbest[d] - anchor);
    }
    bounds.clamp(Velocity::from_array(out))
}

/// Moves the particle by its velocity. A coordinate that leaves the box is
/// clamped to the boundary and its velocity component set to zero.
pub fn update_position(particle: &mut ParticleState, bounds: &SearchBounds) -> Position {
    let (lo, hi) = (bounds.lower(), bounds.upper());
    let mut x = particle.position.to_array();
    let mut v = particle.velocity.to_array();
    for d in 0..3 {
        let moved = x[d] + v[d];
        if moved < lo[d] || moved > hi[d] {
            x[d] = moved.clamp(lo[d], hi[d]);
            v[d] = 0.0;
        } else {
            x[d] = moved;
        }
    }
    particle.position = Position::from_array(x);
    particle.velocity = Velocity::from_array(v);
    particle.position
}

/// Adapts a single-configuration fitness function to the batch form used by
/// the swarm, evaluating sequentially.
pub fn sequential<F>(mut f: F) -> impl FnMut(&[ModelConfig]) -> Vec<Result<f64>>
where
    F: FnMut(ModelConfig) -> Result<f64>,
{
    move |configs| configs.iter().map(|&c| f(c)).collect()
}

impl SwarmState {
    /// Places `pop_size` particles uniformly in the box with velocities
    /// uniform in the velocity bounds. Nothing is evaluated yet: personal
    /// bests equal the initial positions with the worst possible fitness.
    pub fn new(
        bounds: SearchBounds,
        pop_size: usize,
        seed: u64,
        direction: Direction,
    ) -> Result<Self> {
        bounds.validate()?;
        if pop_size == 0 {
            return Err(Error::config("pop_size must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (bounds.lower(), bounds.upper());
        let vmax = bounds.velocity_bounds().max_v();
        let worst = Fitness::new(direction.worst(), direction);
        let particles: Vec<ParticleState> = (0..pop_size)
            .map(|_| {
                let x: [f64; 3] = std::array::from_fn(|d| rng.random_range(lo[d]..=hi[d]));
                let v: [f64; 3] = std::array::from_fn(|d| rng.random_range(-vmax[d]..=vmax[d]));
                let position = Position::from_array(x);
                ParticleState {
                    position,
                    velocity: Velocity::from_array(v),
                    pbest_position: position,
                    pbest_fitness: worst,
                }
            })
            .collect();
        Ok(Self {
            gbest_position: particles[0].position,
            gbest_fitness: worst,
            particles,
            iteration: 0,
            rng_seed: seed,
            bounds,
            rng,
        })
    }

    pub fn bounds(&self) -> &SearchBounds {
        &self.bounds
    }

    pub fn direction(&self) -> Direction {
        self.gbest_fitness.direction
    }

    /// Scores the initial placement and sets personal and global bests.
    pub fn evaluate_initial<F>(&mut self, eval: &mut F) -> Result<Vec<Evaluation>>
    where
        F: FnMut(&[ModelConfig]) -> Vec<Result<f64>>,
    {
        self.score_and_reduce(eval)
    }

    /// One iteration: every velocity, then every position, then scoring and
    /// best-tracking in ascending particle order.
    pub fn step<F>(
        &mut self,
        coef: &PsoCoefficients,
        rule: UpdateRule,
        eval: &mut F,
    ) -> Result<Vec<Evaluation>>
    where
        F: FnMut(&[ModelConfig]) -> Vec<Result<f64>>,
    {
        let vbounds = self.bounds.velocity_bounds();
        let gbest = self.gbest_position;
        for i in 0..self.particles.len() {
            let v = update_velocity(
                &self.particles[i],
                gbest,
                coef,
                &vbounds,
                rule,
                &mut self.rng,
            );
            self.particles[i].velocity = v;
        }
        for p in &mut self.particles {
            update_position(p, &self.bounds);
        }
        self.iteration += 1;
        self.score_and_reduce(eval)
    }

    fn score_and_reduce<F>(&mut self, eval: &mut F) -> Result<Vec<Evaluation>>
    where
        F: FnMut(&[ModelConfig]) -> Vec<Result<f64>>,
    {
        let direction = self.direction();
        let configs: Vec<ModelConfig> = self
            .particles
            .iter()
            .map(|p| round_to_config(p.position))
            .collect();
        let results = eval(&configs);
        if results.len() != configs.len() {
            return Err(Error::config(format!(
                "fitness function returned {} values for {} particles",
                results.len(),
                configs.len()
            )));
        }
        let mut values = Vec::with_capacity(results.len());
        for (particle, r) in results.into_iter().enumerate() {
            match r {
                Ok(v) => values.push(v),
                Err(e) => {
                    return Err(Error::Fitness {
                        particle,
                        source: Box::new(e),
                    })
                }
            }
        }

        let mut evaluations = Vec::with_capacity(values.len());
        let mut iteration_best: Option<usize> = None;
        for (i, (&value, p)) in values.iter().zip(self.particles.iter_mut()).enumerate() {
            let fitness = Fitness::new(value, direction);
            if fitness.improves_on(&p.pbest_fitness) {
                p.pbest_fitness = fitness;
                p.pbest_position = p.position;
            }
            if iteration_best.is_none_or(|b| direction.improves(value, values[b])) {
                iteration_best = Some(i);
            }
            evaluations.push(Evaluation {
                iteration: self.iteration,
                particle: i,
                position: p.position,
                config: configs[i],
                fitness: value,
            });
        }
        if let Some(b) = iteration_best {
            let candidate = Fitness::new(values[b], direction);
            if candidate.improves_on(&self.gbest_fitness) {
                self.gbest_fitness = candidate;
                self.gbest_position = self.particles[b].position;
            }
        }
        Ok(evaluations)
    }
}

/// Creates a swarm and scores its initial placement.
pub fn init_swarm<F>(
    bounds: SearchBounds,
    pop_size: usize,
    seed: u64,
    direction: Direction,
    eval: &mut F,
) -> Result<(SwarmState, Vec<Evaluation>)>
where
    F: FnMut(&[ModelConfig]) -> Vec<Result<f64>>,
{
    let mut swarm = SwarmState::new(bounds, pop_size, seed, direction)?;
    let evals = swarm.evaluate_initial(eval)?;
    Ok((swarm, evals))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoParams {
    pub pop_size: usize,
    pub max_it: usize,
    pub w: f64,
    pub coefficients: CoefficientMode,
    pub rule: UpdateRule,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            pop_size: 5,
            max_it: 10,
            w: DEFAULT_INERTIA,
            coefficients: CoefficientMode::Random,
            rule: UpdateRule::Canonical,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
        }
    }
}

impl PsoParams {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size == 0 {
            return Err(Error::config("pop_size must be >= 1"));
        }
        if self.max_it == 0 {
            return Err(Error::config("max_it must be >= 1"));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::config("epsilon must be >= 0"));
        }
        self.coefficients.resolve(self.w, self.seed).validate()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PsoResult {
    pub best_config: ModelConfig,
    pub best_position: Position,
    pub best_fitness: Fitness,
    /// Steps taken after the initial placement.
    pub iterations: usize,
    pub coefficients: PsoCoefficients,
    /// Global best after the initial placement and after every step.
    pub gbest_history: Vec<f64>,
    pub evaluations: Vec<Evaluation>,
}

/// A run stopped by a failing fitness evaluation.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct RunAborted {
    #[source]
    pub error: Error,
    pub partial_trace: Vec<Evaluation>,
}

impl From<RunAborted> for Error {
    fn from(a: RunAborted) -> Self {
        a.error
    }
}

/// Runs the swarm until the global best changes by less than `epsilon`
/// between two consecutive steps, or `max_it` steps have been taken.
pub fn run<F>(
    bounds: SearchBounds,
    params: &PsoParams,
    direction: Direction,
    mut eval: F,
) -> Result<PsoResult, RunAborted>
where
    F: FnMut(&[ModelConfig]) -> Vec<Result<f64>>,
{
    let mut trace = Vec::new();
    let abort = |error: Error, trace: &mut Vec<Evaluation>| RunAborted {
        error,
        partial_trace: std::mem::take(trace),
    };
    if let Err(e) = params.validate() {
        return Err(abort(e, &mut trace));
    }
    let coef = params.coefficients.resolve(params.w, params.seed);

    let mut swarm = match SwarmState::new(bounds, params.pop_size, params.seed, direction) {
        Ok(s) => s,
        Err(e) => return Err(abort(e, &mut trace)),
    };
    match swarm.evaluate_initial(&mut eval) {
        Ok(evals) => trace.extend(evals),
        Err(e) => return Err(abort(e, &mut trace)),
    }
    let mut history = vec![swarm.gbest_fitness.value];

    while swarm.iteration < params.max_it {
        match swarm.step(&coef, params.rule, &mut eval) {
            Ok(evals) => trace.extend(evals),
            Err(e) => return Err(abort(e, &mut trace)),
        }
        history.push(swarm.gbest_fitness.value);
        if swarm.iteration >= 2 {
            let n = history.len();
            let (prev, cur) = (history[n - 2], history[n - 1]);
            if (cur - prev).abs() < params.epsilon || cur == prev {
                break;
            }
        }
    }

    Ok(PsoResult {
        best_config: round_to_config(swarm.gbest_position),
        best_position: swarm.gbest_position,
        best_fitness: swarm.gbest_fitness,
        iterations: swarm.iteration,
        coefficients: coef,
        gbest_history: history,
        evaluations: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn particle(x: Position, v: Velocity) -> ParticleState {
        ParticleState {
            position: x,
            velocity: v,
            pbest_position: x,
            pbest_fitness: Fitness::new(0.0, Direction::Maximize),
        }
    }

    fn coef(w: f64, c1: f64, c2: f64) -> PsoCoefficients {
        PsoCoefficients { w, c1, c2 }
    }

    #[test]
    fn velocity_bounds_follow_the_box() {
        let vb = SearchBounds::default().velocity_bounds();
        assert_eq!(vb.max_v()[0], 0.4);
        assert!((vb.max_v()[1] - 19.9).abs() < 1e-12);
        assert!((vb.max_v()[2] - 4.9).abs() < 1e-12);
        assert_eq!(vb.min_v()[0], -0.4);
    }

    #[test]
    fn invalid_bounds_rejected() {
        assert!(SearchBounds::new((0, 5), (1, 200), (1, 50)).is_err());
        assert!(SearchBounds::new((3, 2), (1, 200), (1, 50)).is_err());
        assert!(SearchBounds::new((1, 1), (1, 1), (1, 1)).is_ok());
    }

    #[test]
    fn init_places_particles_in_bounds() {
        let s = SwarmState::new(SearchBounds::default(), 5, 7, Direction::Maximize).unwrap();
        assert_eq!(s.particles.len(), 5);
        for p in &s.particles {
            assert!((1.0..=5.0).contains(&p.position.l));
            assert!((1.0..=200.0).contains(&p.position.n));
            assert!((1.0..=50.0).contains(&p.position.e));
            assert!(p.velocity.vl.abs() <= 0.4);
        }
        assert!(SwarmState::new(SearchBounds::default(), 0, 7, Direction::Maximize).is_err());
    }

    #[test]
    fn init_is_reproducible() {
        let a = SwarmState::new(SearchBounds::default(), 5, 42, Direction::Minimize).unwrap();
        let b = SwarmState::new(SearchBounds::default(), 5, 42, Direction::Minimize).unwrap();
        for (p, q) in a.particles.iter().zip(&b.particles) {
            assert_eq!(
                p.position.to_array().map(f64::to_bits),
                q.position.to_array().map(f64::to_bits)
            );
            assert_eq!(
                p.velocity.to_array().map(f64::to_bits),
                q.velocity.to_array().map(f64::to_bits)
            );
        }
    }

    #[test]
    fn single_particle_is_gbest() {
        let mut f = sequential(|c: ModelConfig| Ok(c.layers as f64));
        let (s, _) =
            init_swarm(SearchBounds::default(), 1, 3, Direction::Maximize, &mut f).unwrap();
        assert_eq!(s.gbest_position, s.particles[0].position);
    }

    #[test]
    fn velocity_vanishes_at_the_optimum() {
        let x = Position::new(2.0, 50.0, 10.0);
        let p = particle(x, Velocity::default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vb = SearchBounds::default().velocity_bounds();
        let v = update_velocity(
            &p,
            x,
            &coef(0.7, 2.0, 2.0),
            &vb,
            UpdateRule::Canonical,
            &mut rng,
        );
        assert_eq!(v, Velocity::default());
    }

    #[test]
    fn pure_inertia_passes_through() {
        let x = Position::new(2.0, 50.0, 10.0);
        let p = particle(x, Velocity::new(0.2, 3.0, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vb = SearchBounds::default().velocity_bounds();
        let v = update_velocity(
            &p,
            Position::new(5.0, 1.0, 1.0),
            &coef(1.0, 0.0, 0.0),
            &vb,
            UpdateRule::Canonical,
            &mut rng,
        );
        assert_eq!(v, Velocity::new(0.2, 3.0, 1.0));
    }

    #[test]
    fn layer_velocity_clamped_to_range_tenth() {
        let x = Position::new(2.0, 50.0, 10.0);
        let p = particle(x, Velocity::new(1.0, 0.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vb = SearchBounds::default().velocity_bounds();
        let v = update_velocity(
            &p,
            x,
            &coef(1.0, 0.0, 0.0),
            &vb,
            UpdateRule::Canonical,
            &mut rng,
        );
        assert_eq!(v.vl, 0.4);
    }

    #[test]
    fn literal_rule_subtracts_velocity() {
        // with r ~ U[0,1) and c2 = 0 the literal form pulls v toward pbest, not x
        let x = Position::new(1.0, 1.0, 1.0);
        let mut p = particle(x, Velocity::new(0.1, 0.0, 0.0));
        p.pbest_position = Position::new(1.0, 1.0, 1.0);
        let vb = SearchBounds::default().velocity_bounds();
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = r1.clone();
        let canon = update_velocity(
            &p,
            x,
            &coef(1.0, 1.0, 0.0),
            &vb,
            UpdateRule::Canonical,
            &mut r1,
        );
        let lit = update_velocity(
            &p,
            x,
            &coef(1.0, 1.0, 0.0),
            &vb,
            UpdateRule::Literal,
            &mut r2,
        );
        assert_eq!(canon.vl, 0.1);
        assert!(lit.vl > 0.1);
    }

    #[test]
    fn position_moves_by_velocity() {
        let b = SearchBounds::default();
        let mut p = particle(Position::new(2.0, 10.0, 5.0), Velocity::new(0.4, 19.9, 0.0));
        let x = update_position(&mut p, &b);
        assert!((x.l - 2.4).abs() < 1e-12);
        assert!((x.n - 29.9).abs() < 1e-12);
        assert_eq!(p.velocity.vl, 0.4);
    }

    #[test]
    fn position_clamps_and_zeroes_velocity() {
        let b = SearchBounds::default();
        let mut p = particle(Position::new(4.9, 10.0, 5.0), Velocity::new(0.4, 1.0, 0.0));
        let x = update_position(&mut p, &b);
        assert_eq!(x.l, 5.0);
        assert_eq!(p.velocity.vl, 0.0);
        assert_eq!(p.velocity.vn, 1.0);
    }

    #[test]
    fn rounding() {
        assert_eq!(
            round_to_config(Position::new(2.4, 29.9, 12.2)),
            ModelConfig::new(2, 30, 12)
        );
        assert_eq!(
            round_to_config(Position::new(1.0, 1.0, 1.0)),
            ModelConfig::new(1, 1, 1)
        );
        assert_eq!(
            round_to_config(Position::new(5.0, 200.0, 50.0)),
            ModelConfig::new(5, 200, 50)
        );
    }

    #[test]
    fn constant_fitness_keeps_gbest_and_stops_after_two_steps() {
        let params = PsoParams {
            seed: 11,
            ..Default::default()
        };
        let r = run(
            SearchBounds::default(),
            &params,
            Direction::Maximize,
            sequential(|_| Ok(1.0)),
        )
        .unwrap();
        assert_eq!(r.iterations, 2);
        assert_eq!(r.evaluations.len(), 15);
        let initial = r.evaluations[0].position;
        assert_eq!(r.best_position, initial);
    }

    #[test]
    fn strictly_improving_fitness_uses_all_iterations() {
        let mut calls = 0u64;
        let params = PsoParams {
            seed: 5,
            ..Default::default()
        };
        let r = run(
            SearchBounds::default(),
            &params,
            Direction::Maximize,
            |cfgs: &[ModelConfig]| {
                cfgs.iter()
                    .map(|_| {
                        calls += 1;
                        Ok(calls as f64)
                    })
                    .collect()
            },
        )
        .unwrap();
        assert_eq!(r.iterations, 10);
        assert_eq!(r.evaluations.len(), 55);
    }

    #[test]
    fn pbest_replaced_on_improvement_and_gbest_follows() {
        let mut f = sequential(|c: ModelConfig| Ok(-(c.layers as f64 - 3.0).abs()));
        let (mut s, _) =
            init_swarm(SearchBounds::default(), 5, 2, Direction::Maximize, &mut f).unwrap();
        let coef = coef(0.7, 1.5, 1.5);
        for _ in 0..5 {
            let before: Vec<f64> = s.particles.iter().map(|p| p.pbest_fitness.value).collect();
            let evals = s.step(&coef, UpdateRule::Canonical, &mut f).unwrap();
            for (e, (p, b)) in evals.iter().zip(s.particles.iter().zip(before)) {
                if e.fitness > b {
                    assert_eq!(p.pbest_fitness.value, e.fitness);
                    assert_eq!(p.pbest_position, e.position);
                } else {
                    assert_eq!(p.pbest_fitness.value, b);
                }
            }
            let best = s
                .particles
                .iter()
                .map(|p| p.pbest_fitness.value)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(s.gbest_fitness.value, best);
        }
    }

    #[test]
    fn fitness_error_carries_particle_index() {
        let params = PsoParams {
            seed: 1,
            ..Default::default()
        };
        let mut n = 0;
        let err = run(
            SearchBounds::default(),
            &params,
            Direction::Maximize,
            |cfgs: &[ModelConfig]| {
                cfgs.iter()
                    .map(|_| {
                        n += 1;
                        if n == 8 {
                            Err(Error::config("boom"))
                        } else {
                            Ok(n as f64)
                        }
                    })
                    .collect()
            },
        )
        .unwrap_err();
        assert!(matches!(err.error, Error::Fitness { particle: 2, .. }));
        assert_eq!(err.partial_trace.len(), 5);
    }

    #[test]
    fn minimize_direction() {
        let params = PsoParams {
            seed: 3,
            ..Default::default()
        };
        let f =
            |c: ModelConfig| Ok((c.layers as f64 - 2.0).powi(2) + (c.epochs as f64 - 7.0).powi(2));
        let r = run(
            SearchBounds::default(),
            &params,
            Direction::Minimize,
            sequential(f),
        )
        .unwrap();
        let min_seen = r
            .evaluations
            .iter()
            .map(|e| e.fitness)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.best_fitness.value, min_seen);
    }

    #[test]
    fn random_coefficients_in_range_and_seeded() {
        for seed in 0..50 {
            let c = CoefficientMode::Random.resolve(0.729, seed);
            assert!((0.0..=4.0).contains(&c.c1) && (0.0..=4.0).contains(&c.c2));
            assert_eq!(c, CoefficientMode::Random.resolve(0.729, seed));
        }
    }
}
