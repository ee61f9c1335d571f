//! Labeled synthetic streams.
//!
//! Two generators: a 2-D particle-spring system whose connection graph,
//! velocities or positions are perturbed at given times, and piecewise
//! stationary Gaussian streams with a prescribed correlation per segment.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::correlation::SeriesFrame;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    X,
    Y,
    Vx,
    Vy,
}

impl Feature {
    pub const ALL: [Feature; 4] = [Feature::X, Feature::Y, Feature::Vx, Feature::Vy];

    fn name(self) -> &'static str {
        match self {
            Feature::X => "x",
            Feature::Y => "y",
            Feature::Vx => "vx",
            Feature::Vy => "vy",
        }
    }
}

/// How particle states are laid out as observation columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationLayout {
    /// `x, y, vx, vy` of particle 0, then particle 1, ...
    PerParticle,
    /// `x` of every particle, then `y`, `vx`, `vy`.
    PerCoordinate,
    /// One series per particle carrying a single feature.
    Feature(Feature),
}

/// Parameters of the particle-spring generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpringConfig {
    pub n_particles: usize,
    pub spring_constant: f64,
    pub dt: f64,
    pub box_half_width: f64,
    pub noise_std: f64,
    /// Standard deviation of the initial velocity components.
    pub initial_speed: f64,
    /// Probability that a pair is connected when the graph is (re)sampled.
    pub connect_prob: f64,
    pub layout: ObservationLayout,
}

impl Default for SpringConfig {
    fn default() -> Self {
        Self {
            n_particles: 5,
            spring_constant: 1.0,
            dt: 0.01,
            box_half_width: 1.0,
            noise_std: 0.01,
            initial_speed: 0.5,
            connect_prob: 0.5,
            layout: ObservationLayout::PerParticle,
        }
    }
}

impl SpringConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("invalid spring config: {what}")));
        if self.n_particles < 2 {
            return bad("need at least 2 particles");
        }
        if !(self.spring_constant >= 0.0) || !self.spring_constant.is_finite() {
            return bad("spring constant must be non-negative");
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt must be positive");
        }
        if !(self.box_half_width > 0.0) || !self.box_half_width.is_finite() {
            return bad("box half-width must be positive");
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return bad("noise std must be non-negative");
        }
        if !(self.initial_speed >= 0.0) || !self.initial_speed.is_finite() {
            return bad("initial speed must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.connect_prob) {
            return bad("connection probability must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn column_names(&self) -> Vec<String> {
        let n = self.n_particles;
        match self.layout {
            ObservationLayout::PerParticle => (0..n)
                .flat_map(|p| Feature::ALL.iter().map(move |f| format!("p{p}_{}", f.name())))
                .collect(),
            ObservationLayout::PerCoordinate => Feature::ALL
                .iter()
                .flat_map(|f| (0..n).map(move |p| format!("p{p}_{}", f.name())))
                .collect(),
            ObservationLayout::Feature(f) => (0..n).map(|p| format!("p{p}_{}", f.name())).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Connection,
    Speed,
    Location,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeSpec {
    pub kind: ChangeKind,
    /// First observation index generated under the new regime.
    pub at: usize,
    /// Perturbation std for speed/location changes; ignored for connection.
    pub magnitude: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub generator: String,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledStream {
    pub frame: SeriesFrame,
    pub columns: Vec<String>,
    pub true_cps: Vec<usize>,
    pub meta: StreamMeta,
}

/// State of a particle-spring system (unit masses).
#[derive(Clone, Debug, PartialEq)]
pub struct SpringSystem {
    pub config: SpringConfig,
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    pub adjacency: Vec<Vec<bool>>,
}

impl SpringSystem {
    /// Random initial state: positions uniform in the central half of the
    /// box, Gaussian velocities, random connection graph.
    pub fn random(config: SpringConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let n = config.n_particles;
        let half = 0.5 * config.box_half_width;
        let speed = Normal::new(0.0, config.initial_speed).map_err(|e| Error::Config(e.to_string()))?;
        let positions = (0..n)
            .map(|_| [rng.random_range(-half..=half), rng.random_range(-half..=half)])
            .collect();
        let velocities = (0..n).map(|_| [speed.sample(rng), speed.sample(rng)]).collect();
        let adjacency = sample_adjacency(n, config.connect_prob, rng);
        Ok(Self {
            config,
            positions,
            velocities,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    /// Hooke forces `F_i = −k Σ_j a_ij (x_i − x_j)`.
    pub fn forces(&self) -> Vec<[f64; 2]> {
        let n = self.n();
        let k = self.config.spring_constant;
        let mut f = vec![[0.0; 2]; n];
        for (i, fi) in f.iter_mut().enumerate() {
            let xi = self.positions[i];
            for (xj, _) in self.positions.iter().zip(&self.adjacency[i]).filter(|(_, a)| **a) {
                fi[0] -= k * (xi[0] - xj[0]);
                fi[1] -= k * (xi[1] - xj[1]);
            }
        }
        f
    }

    /// One semi-implicit Euler step followed by wall reflection.
    pub fn step(&mut self) {
        let dt = self.config.dt;
        let f = self.forces();
        for (v, a) in self.velocities.iter_mut().zip(&f) {
            v[0] += a[0] * dt;
            v[1] += a[1] * dt;
        }
        for (x, v) in self.positions.iter_mut().zip(&self.velocities) {
            x[0] += v[0] * dt;
            x[1] += v[1] * dt;
        }
        self.reflect();
    }

    fn reflect(&mut self) {
        let b = self.config.box_half_width;
        for (x, v) in self.positions.iter_mut().zip(self.velocities.iter_mut()) {
            for c in 0..2 {
                let mut flips = 0;
                // fold back until inside; an odd number of bounces reverses the velocity
                while x[c] > b || x[c] < -b {
                    x[c] = if x[c] > b { 2.0 * b - x[c] } else { -2.0 * b - x[c] };
                    flips += 1;
                    if flips > 64 {
                        x[c] = x[c].clamp(-b, b);
                        break;
                    }
                }
                if flips % 2 == 1 {
                    v[c] = -v[c];
                }
            }
        }
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.velocities.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>()
    }

    pub fn potential_energy(&self) -> f64 {
        let n = self.n();
        let mut e = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.adjacency[i][j] {
                    let dx = self.positions[i][0] - self.positions[j][0];
                    let dy = self.positions[i][1] - self.positions[j][1];
                    e += 0.5 * self.config.spring_constant * (dx * dx + dy * dy);
                }
            }
        }
        e
    }

    pub fn apply_change(&mut self, change: &ChangeSpec, rng: &mut impl Rng) -> Result<()> {
        match change.kind {
            ChangeKind::Connection => {
                let old = self.adjacency.clone();
                if self.n() < 2 || (self.config.connect_prob == 0.0 && old.iter().flatten().all(|a| !a)) {
                    return Err(Error::Config("connection graph cannot change".into()));
                }
                loop {
                    let next = sample_adjacency(self.n(), self.config.connect_prob, rng);
                    if next != old {
                        self.adjacency = next;
                        break;
                    }
                }
            }
            ChangeKind::Speed | ChangeKind::Location => {
                let noise = Normal::new(0.0, change.magnitude)
                    .map_err(|e| Error::Config(format!("invalid change magnitude: {e}")))?;
                let target = if change.kind == ChangeKind::Speed {
                    &mut self.velocities
                } else {
                    &mut self.positions
                };
                for p in target.iter_mut() {
                    p[0] += noise.sample(rng);
                    p[1] += noise.sample(rng);
                }
                self.reflect();
            }
        }
        Ok(())
    }

    fn observe(&self, out: &mut Vec<f64>) {
        let feature = |p: usize, f: Feature| match f {
            Feature::X => self.positions[p][0],
            Feature::Y => self.positions[p][1],
            Feature::Vx => self.velocities[p][0],
            Feature::Vy => self.velocities[p][1],
        };
        let n = self.n();
        match self.config.layout {
            ObservationLayout::PerParticle => {
                for p in 0..n {
                    out.extend(Feature::ALL.iter().map(|f| feature(p, *f)));
                }
            }
            ObservationLayout::PerCoordinate => {
                for f in Feature::ALL {
                    out.extend((0..n).map(|p| feature(p, f)));
                }
            }
            ObservationLayout::Feature(f) => out.extend((0..n).map(|p| feature(p, f))),
        }
    }
}

#[allow(clippy::needless_range_loop)]
fn sample_adjacency(n: usize, p: f64, rng: &mut impl Rng) -> Vec<Vec<bool>> {
    let mut a = vec![vec![false; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let connected = rng.random::<f64>() < p;
            a[i][j] = connected;
            a[j][i] = connected;
        }
    }
    a
}

fn check_change_points(length: usize, ats: &mut Vec<usize>) -> Result<()> {
    ats.sort_unstable();
    ats.dedup();
    if let Some(bad) = ats.iter().find(|&&at| at == 0 || at >= length) {
        return Err(Error::Config(format!(
            "change index {bad} must lie strictly inside (0, {length})"
        )));
    }
    Ok(())
}

/// Simulates the spring system for `length` steps, applying each change
/// right before the observation at its index.
pub fn simulate_springs(
    config: &SpringConfig,
    length: usize,
    changes: &[ChangeSpec],
    seed: u64,
) -> Result<LabeledStream> {
    if length < 2 {
        return Err(Error::Config("length must be at least 2".into()));
    }
    let mut true_cps: Vec<usize> = changes.iter().map(|c| c.at).collect();
    check_change_points(length, &mut true_cps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sys = SpringSystem::random(config.clone(), &mut rng)?;
    let noise = Normal::new(0.0, config.noise_std).map_err(|e| Error::Config(e.to_string()))?;

    let columns = config.column_names();
    let mut values = Vec::with_capacity(length * columns.len());
    let mut obs = Vec::with_capacity(columns.len());
    for t in 0..length {
        for change in changes.iter().filter(|c| c.at == t) {
            sys.apply_change(change, &mut rng)?;
        }
        obs.clear();
        sys.observe(&mut obs);
        if config.noise_std > 0.0 {
            for v in obs.iter_mut() {
                *v += noise.sample(&mut rng);
            }
        }
        values.extend_from_slice(&obs);
        sys.step();
    }

    let mut params = BTreeMap::new();
    params.insert("n_particles".into(), config.n_particles as f64);
    params.insert("spring_constant".into(), config.spring_constant);
    params.insert("dt".into(), config.dt);
    params.insert("box_half_width".into(), config.box_half_width);
    params.insert("noise_std".into(), config.noise_std);
    params.insert("initial_speed".into(), config.initial_speed);
    for (i, c) in changes.iter().enumerate() {
        params.insert(format!("change{i}_magnitude"), c.magnitude);
    }
    Ok(LabeledStream {
        frame: SeriesFrame::new(columns.len(), values)?,
        columns,
        true_cps,
        meta: StreamMeta {
            generator: "springs".into(),
            seed,
            params,
        },
    })
}

/// Default perturbation scale per change kind.
pub fn default_magnitude(kind: ChangeKind) -> f64 {
    match kind {
        ChangeKind::Connection => 0.0,
        ChangeKind::Speed => 1.0,
        ChangeKind::Location => 0.5,
    }
}

/// One change of the given kind at `at`, default generator settings.
pub fn spring_scenario(kind: ChangeKind, length: usize, at: usize, seed: u64) -> Result<LabeledStream> {
    simulate_springs(
        &SpringConfig::default(),
        length,
        &[ChangeSpec {
            kind,
            at,
            magnitude: default_magnitude(kind),
        }],
        seed,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSegment {
    pub length: usize,
    pub correlation: DMatrix<f64>,
}

/// Concatenated segments of i.i.d. Gaussian vectors, each segment with its
/// own correlation matrix (unit variances). `mean` defaults to zero.
pub fn gaussian_regimes(segments: &[GaussianSegment], mean: Option<&[f64]>, seed: u64) -> Result<LabeledStream> {
    let first = segments
        .first()
        .ok_or_else(|| Error::Contract("at least one segment is required".into()))?;
    let m = first.correlation.nrows();
    if m < 2 {
        return Err(Error::Contract("need at least 2 series".into()));
    }
    let mu = match mean {
        Some(mu) if mu.len() != m => {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: mu.len(),
            })
        }
        Some(mu) => DVector::from_column_slice(mu),
        None => DVector::zeros(m),
    };
    let mut factors = Vec::with_capacity(segments.len());
    for (s, seg) in segments.iter().enumerate() {
        let c = &seg.correlation;
        if c.nrows() != m || c.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: c.nrows(),
            });
        }
        if seg.length == 0 {
            return Err(Error::Contract(format!("segment {s} is empty")));
        }
        let valid = (0..m).all(|i| (c[(i, i)] - 1.0).abs() <= 1e-12)
            && (0..m).all(|i| (0..m).all(|j| (c[(i, j)] - c[(j, i)]).abs() <= 1e-12));
        if !valid {
            return Err(Error::Contract(format!("segment {s} is not a correlation matrix")));
        }
        let l = c
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Contract(format!("segment {s} correlation is not positive definite")))?
            .unpack();
        factors.push(l);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: usize = segments.iter().map(|s| s.length).sum();
    let mut values = Vec::with_capacity(total * m);
    let mut true_cps = Vec::new();
    let mut offset = 0;
    for (seg, l) in segments.iter().zip(&factors) {
        if offset > 0 {
            true_cps.push(offset);
        }
        for _ in 0..seg.length {
            let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = l * z + &mu;
            values.extend(x.iter());
        }
        offset += seg.length;
    }

    let mut params = BTreeMap::new();
    params.insert("segments".into(), segments.len() as f64);
    params.insert("dims".into(), m as f64);
    Ok(LabeledStream {
        frame: SeriesFrame::new(m, values)?,
        columns: (0..m).map(|i| format!("s{i}")).collect(),
        true_cps,
        meta: StreamMeta {
            generator: "gaussian".into(),
            seed,
            params,
        },
    })
}

/// Correlation matrix with every off-diagonal entry equal to `rho`.
pub fn equicorrelation(m: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { rho })
}

/// Negates the first series: correlations involving it change sign, the rest
/// are kept. For two series this maps `+rho` to `−rho`.
pub fn flip_first_series(c: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = c.clone();
    for j in 1..c.nrows() {
        out[(0, j)] = -out[(0, j)];
        out[(j, 0)] = -out[(j, 0)];
    }
    out
}

/// Equicorrelated segment (`+rho`) followed at `change_at` by the same
/// structure with the first series negated.
pub fn two_regime_stream(m: usize, rho: f64, change_at: usize, length: usize, seed: u64) -> Result<LabeledStream> {
    if change_at == 0 || change_at >= length {
        return Err(Error::Config(format!("change index {change_at} outside (0, {length})")));
    }
    let before = equicorrelation(m, rho);
    let after = flip_first_series(&before);
    gaussian_regimes(
        &[
            GaussianSegment {
                length: change_at,
                correlation: before,
            },
            GaussianSegment {
                length: length - change_at,
                correlation: after,
            },
        ],
        None,
        seed,
    )
}

/// The null counterpart of [`two_regime_stream`]: one equicorrelated regime.
pub fn null_stream(m: usize, rho: f64, length: usize, seed: u64) -> Result<LabeledStream> {
    gaussian_regimes(
        &[GaussianSegment {
            length,
            correlation: equicorrelation(m, rho),
        }],
        None,
        seed,
    )
}
