//! Synthetic training-graph generators: hyperbolic random graphs and
//! preferential-attachment scale-free graphs, plus data-driven parameter
//! sampling.
//!
//! The hyperbolic model places nodes in a disk of radius `R` in the
//! hyperbolic plane (curvature fixed at `zeta = 1`; only the ratio
//! `alpha/zeta` affects the degree exponent, so the extra degree of freedom
//! is redundant). Radii follow the density
//! `rho(r) = alpha sinh(alpha r) / (cosh(alpha R) - 1)` and angles are
//! uniform. At temperature 0 two nodes connect iff their hyperbolic distance
//! is below `R`; at `T > 0` they connect independently with the Fermi-Dirac
//! probability `1 / (1 + exp((d - R) / (2T)))`, which recovers the threshold
//! rule as `T -> 0`. The degree exponent is `gamma = 2 alpha / zeta + 1`.
//!
//! Edge generation is O(n^2) pair evaluation, accepted at desk scale. Pair
//! randomness is counter-based (derived from the seed and the pair index),
//! so the generated graph is identical regardless of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::graph::Graph;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Parameters of one hyperbolic random graph.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicConfig {
    pub n: usize,
    /// Target power-law exponent, must exceed 2.
    pub gamma: f64,
    /// Target mean degree.
    pub avg_degree: f64,
    /// Clustering temperature in `[0, 1)`.
    pub temperature: f64,
    pub seed: u64,
}

impl HyperbolicConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma <= 2.0 {
            return Err(Error::Config(format!("gamma must be > 2, got {}", self.gamma)));
        }
        if !self.avg_degree.is_finite() || self.avg_degree <= 0.0 {
            return Err(Error::Config(format!(
                "avg_degree must be positive, got {}",
                self.avg_degree
            )));
        }
        if !(0.0..1.0).contains(&self.temperature) {
            return Err(Error::Config(format!(
                "temperature must lie in [0, 1), got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Radial concentration parameter `alpha = (gamma - 1) / 2` (zeta = 1).
    pub fn alpha(&self) -> f64 {
        (self.gamma - 1.0) / 2.0
    }
}

/// Empirical (mean degree, exponent) pairs measured on a reference set of
/// 15 real networks spanning road, social and web graphs. Sampling keeps the
/// pair together so observed couplings are preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalParamTable {
    rows: Vec<(f64, f64)>,
}

const BUILTIN_ROWS: [(f64, f64); 15] = [
    (2.4140, 6.9798),
    (2.5677, 2.9640),
    (7.1955, 2.5423),
    (2.7852, 6.8398),
    (2.0980, 7.9782),
    (4.8159, 7.0192),
    (10.0202, 2.3982),
    (15.3317, 2.5023),
    (12.1298, 2.2056),
    (32.4296, 2.4494),
    (80.8684, 2.1334),
    (6.6221, 3.5380),
    (6.6933, 2.4715),
    (19.4080, 2.6299),
    (76.2814, 2.2849),
];

impl EmpiricalParamTable {
    pub fn builtin() -> Self {
        EmpiricalParamTable {
            rows: BUILTIN_ROWS.to_vec(),
        }
    }

    pub fn new(rows: Vec<(f64, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Config("empirical table must not be empty".into()));
        }
        for &(k, gamma) in &rows {
            if !gamma.is_finite() || gamma <= 2.0 || !k.is_finite() || k <= 0.0 {
                return Err(Error::Config(format!(
                    "invalid table row (avg_degree={k}, gamma={gamma})"
                )));
            }
        }
        Ok(EmpiricalParamTable { rows })
    }

    /// Load rows from a CSV file with header `avg_degree,gamma`.
    pub fn from_csv_path<P: AsRef<std::path::Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "avg_degree,gamma" => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: "expected header `avg_degree,gamma`".into(),
                })
            }
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, gamma) = line.split_once(',').ok_or(Error::Parse {
                line: idx + 1,
                msg: "expected two comma-separated values".into(),
            })?;
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    msg: format!("non-numeric value `{s}`"),
                })
            };
            rows.push((parse(k)?, parse(gamma)?));
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }
}

/// Inverse-CDF sample of the radial density: `r = acosh(1 + u (cosh(alpha R) - 1)) / alpha`.
/// Maps `u = 0` to the disk center and `u -> 1` to the rim.
pub fn sample_radial(alpha: f64, big_r: f64, u: f64) -> f64 {
    debug_assert!(alpha > 0.0 && big_r > 0.0 && (0.0..1.0).contains(&u));
    (1.0 + u * ((alpha * big_r).cosh() - 1.0)).acosh() / alpha
}

/// Hyperbolic distance between polar points at curvature `-zeta^2`, with the
/// angle difference wrapped to `[0, pi]` and the acosh argument clamped to
/// absorb rounding.
pub fn hyperbolic_distance(p: (f64, f64), q: (f64, f64), zeta: f64) -> f64 {
    let (r_u, theta_u) = p;
    let (r_v, theta_v) = q;
    let delta = std::f64::consts::PI - (std::f64::consts::PI - (theta_u - theta_v).abs()).abs();
    let argument = (zeta * r_u).cosh() * (zeta * r_v).cosh()
        - (zeta * r_u).sinh() * (zeta * r_v).sinh() * delta.cos();
    argument.max(1.0).acosh() / zeta
}

/// Node positions in quantile form: angles plus radial CDF quantiles.
///
/// Quantiles, not radii, are stored so that changing the disk radius during
/// calibration re-scales every node radially in proportion (the realized
/// radius for a candidate `R` is [`sample_radial`] at the stored quantile;
/// the provisional radius `2 ln n` never needs to be materialized).
#[derive(Debug, Clone)]
pub struct PositionSample {
    pub alpha: f64,
    pub angles: Vec<f64>,
    pub radial_quantiles: Vec<f64>,
}

impl PositionSample {
    pub fn draw(n: usize, alpha: f64, rng: &mut ChaCha8Rng) -> Self {
        let angles = (0..n).map(|_| rng.gen::<f64>() * TAU).collect();
        let radial_quantiles = (0..n).map(|_| rng.gen::<f64>()).collect();
        PositionSample {
            alpha,
            angles,
            radial_quantiles,
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    fn radii(&self, big_r: f64) -> Vec<f64> {
        self.radial_quantiles
            .iter()
            .map(|&u| sample_radial(self.alpha, big_r, u))
            .collect()
    }
}

const CALIBRATION_SUBSAMPLE: usize = 2_000;
const CALIBRATION_TOLERANCE: f64 = 0.05;

/// Fermi-Dirac connection probability; degenerates to the sharp threshold at
/// `temperature == 0`.
fn connection_probability(distance: f64, big_r: f64, temperature: f64) -> f64 {
    if temperature == 0.0 {
        if distance < big_r {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 / (1.0 + ((distance - big_r) / (2.0 * temperature)).exp())
    }
}

/// Expected mean degree at disk radius `big_r`, from exact pairwise
/// evaluation on a subsample of at most 2,000 positions.
///
/// The subsample is stratified by radial rank (sort by quantile, stride over
/// ranks) rather than drawn uniformly: degree mass is heavy-tailed and the
/// few near-center hubs carry a large share of it, so a plain uniform
/// subsample gives the estimate ~20% noise while the stratified one pins the
/// radius distribution exactly and stays within a few percent.
pub fn expected_mean_degree(
    positions: &PositionSample,
    total_nodes: usize,
    big_r: f64,
    temperature: f64,
) -> f64 {
    let n = positions.len();
    if n < 2 || total_nodes < 2 {
        return 0.0;
    }
    let stride = n.div_ceil(CALIBRATION_SUBSAMPLE);
    let mut by_rank: Vec<usize> = (0..n).collect();
    by_rank.sort_by(|&a, &b| {
        positions.radial_quantiles[a]
            .partial_cmp(&positions.radial_quantiles[b])
            .unwrap()
    });
    // Midpoint of each rank stratum; taking the stratum edge would
    // over-weight the hubbiest node and skew the calibration sparse.
    let indices: Vec<usize> = (0..n.div_ceil(stride))
        .map(|k| (k * stride + stride / 2).min(n - 1))
        .map(|rank| by_rank[rank])
        .collect();
    let radii: Vec<f64> = indices
        .iter()
        .map(|&i| sample_radial(positions.alpha, big_r, positions.radial_quantiles[i]))
        .collect();
    let cosh_r: Vec<f64> = radii.iter().map(|&r| r.cosh()).collect();
    let sinh_r: Vec<f64> = radii.iter().map(|&r| r.sinh()).collect();
    let angles: Vec<f64> = indices.iter().map(|&i| positions.angles[i]).collect();
    let m = indices.len();

    let pair_prob_sum = |i: usize| -> f64 {
        let mut acc = 0.0;
        for j in (i + 1)..m {
            let delta = std::f64::consts::PI
                - (std::f64::consts::PI - (angles[i] - angles[j]).abs()).abs();
            let argument = cosh_r[i] * cosh_r[j] - sinh_r[i] * sinh_r[j] * delta.cos();
            let distance = argument.max(1.0).acosh();
            acc += connection_probability(distance, big_r, temperature);
        }
        acc
    };

    #[cfg(feature = "parallel")]
    let total: f64 = (0..m).into_par_iter().map(pair_prob_sum).sum();
    #[cfg(not(feature = "parallel"))]
    let total: f64 = (0..m).map(pair_prob_sum).sum();

    let pairs = (m * (m - 1) / 2) as f64;
    (total_nodes as f64 - 1.0) * total / pairs
}

/// Bisect the disk radius until the expected mean degree is within +-5% of
/// the target. The expected degree is monotone decreasing in `R` (a larger
/// disk spreads nodes apart faster than the connection threshold grows), so
/// the bracket is `[1, 4 ln n]` with the dense end at small `R`. Errors if
/// the target lies outside what the bracket can achieve.
pub fn calibrate_radius(
    positions: &PositionSample,
    total_nodes: usize,
    target_avg_degree: f64,
    temperature: f64,
) -> Result<f64> {
    if positions.len() < 2 {
        return Err(Error::Config(
            "radius calibration needs at least 2 positions".into(),
        ));
    }
    let mut lo = 1.0f64;
    let mut hi = 4.0 * (total_nodes.max(2) as f64).ln();
    let degree_at = |r: f64| expected_mean_degree(positions, total_nodes, r, temperature);
    let degree_lo = degree_at(lo); // densest achievable
    let degree_hi = degree_at(hi); // sparsest achievable
    let within = |d: f64| (d - target_avg_degree).abs() <= CALIBRATION_TOLERANCE * target_avg_degree;
    if within(degree_lo) {
        return Ok(lo);
    }
    if within(degree_hi) {
        return Ok(hi);
    }
    if target_avg_degree > degree_lo || target_avg_degree < degree_hi {
        return Err(Error::Calibration {
            target: target_avg_degree,
            lo_r: lo,
            hi_r: hi,
            lo_degree: degree_hi,
            hi_degree: degree_lo,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let degree_mid = degree_at(mid);
        if within(degree_mid) {
            return Ok(mid);
        }
        if degree_mid > target_avg_degree {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let achieved = degree_at(0.5 * (lo + hi));
    Err(Error::Calibration {
        target: target_avg_degree,
        lo_r: lo,
        hi_r: hi,
        lo_degree: achieved,
        hi_degree: achieved,
    })
}

/// Counter-based uniform draw for one node pair; independent of iteration
/// order and thread count. SplitMix64 finalizer over (seed, pair index).
fn pair_uniform(seed: u64, pair_index: u64) -> f64 {
    let mut z = seed ^ pair_index.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^= z >> 31;
    (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

struct HyperbolicPlan {
    n: usize,
    temperature: f64,
    seed: u64,
    big_r: f64,
    angles: Vec<f64>,
    cosh_r: Vec<f64>,
    sinh_r: Vec<f64>,
    cosh_big_r: f64,
}

impl HyperbolicPlan {
    fn prepare(cfg: &HyperbolicConfig) -> Result<Option<Self>> {
        cfg.validate()?;
        if cfg.n < 2 {
            return Ok(None);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let positions = PositionSample::draw(cfg.n, cfg.alpha(), &mut rng);
        let big_r = calibrate_radius(&positions, cfg.n, cfg.avg_degree, cfg.temperature)?;
        let radii = positions.radii(big_r);
        Ok(Some(HyperbolicPlan {
            n: cfg.n,
            temperature: cfg.temperature,
            seed: cfg.seed,
            big_r,
            cosh_r: radii.iter().map(|&r| r.cosh()).collect(),
            sinh_r: radii.iter().map(|&r| r.sinh()).collect(),
            angles: positions.angles,
            cosh_big_r: big_r.cosh(),
        }))
    }

    /// Arcs (u < v) adjacent to row `i`.
    fn row_edges(&self, i: usize) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        let n = self.n;
        for j in (i + 1)..n {
            let delta = std::f64::consts::PI
                - (std::f64::consts::PI - (self.angles[i] - self.angles[j]).abs()).abs();
            let argument =
                self.cosh_r[i] * self.cosh_r[j] - self.sinh_r[i] * self.sinh_r[j] * delta.cos();
            let connected = if self.temperature == 0.0 {
                // d < R iff cosh d < cosh R; skips the acosh.
                argument.max(1.0) < self.cosh_big_r
            } else {
                let distance = argument.max(1.0).acosh();
                let p = connection_probability(distance, self.big_r, self.temperature);
                pair_uniform(self.seed, (i * n + j) as u64) < p
            };
            if connected {
                out.push((i as u32, j as u32));
            }
        }
        out
    }

    fn edges_seq(&self) -> Vec<(u32, u32)> {
        (0..self.n).flat_map(|i| self.row_edges(i)).collect()
    }

    #[cfg(feature = "parallel")]
    fn edges_par(&self) -> Vec<(u32, u32)> {
        (0..self.n)
            .into_par_iter()
            .map(|i| self.row_edges(i))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    }
}

/// Generate an undirected hyperbolic random graph. Deterministic given the
/// config seed, independent of thread count.
pub fn generate_hyperbolic(cfg: &HyperbolicConfig) -> Result<Graph> {
    match HyperbolicPlan::prepare(cfg)? {
        None => Ok(Graph::from_edges_with_n(cfg.n, false, &[])),
        Some(plan) => {
            #[cfg(feature = "parallel")]
            let arcs = plan.edges_par();
            #[cfg(not(feature = "parallel"))]
            let arcs = plan.edges_seq();
            Ok(Graph::from_edges_with_n(cfg.n, false, &arcs))
        }
    }
}

/// Sequential pair evaluation; used when the `parallel` feature is off and
/// kept public for benchmarks. Produces exactly the same graph as
/// [`generate_hyperbolic`].
pub fn generate_hyperbolic_seq(cfg: &HyperbolicConfig) -> Result<Graph> {
    match HyperbolicPlan::prepare(cfg)? {
        None => Ok(Graph::from_edges_with_n(cfg.n, false, &[])),
        Some(plan) => {
            let arcs = plan.edges_seq();
            Ok(Graph::from_edges_with_n(cfg.n, false, &arcs))
        }
    }
}

/// Undirected preferential attachment: start from a star on `attach_m + 1`
/// nodes, then attach each new node to `attach_m` distinct existing nodes
/// chosen proportionally to current degree.
pub fn generate_scale_free(n: usize, attach_m: usize, seed: u64) -> Result<Graph> {
    if attach_m < 1 || n <= attach_m {
        return Err(Error::Config(format!(
            "scale-free generator needs n > attach_m >= 1, got n={n}, attach_m={attach_m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(attach_m * n);
    // Degree-proportional sampling pool: one entry per arc endpoint.
    let mut endpoints: Vec<u32> = Vec::with_capacity(2 * attach_m * n);
    for leaf in 1..=attach_m as u32 {
        edges.push((0, leaf));
        endpoints.push(0);
        endpoints.push(leaf);
    }
    let mut batch: Vec<u32> = Vec::with_capacity(attach_m);
    for new_node in (attach_m + 1)..n {
        batch.clear();
        while batch.len() < attach_m {
            let target = endpoints[rng.gen_range(0..endpoints.len())];
            if !batch.contains(&target) {
                batch.push(target);
            }
        }
        for &target in &batch {
            edges.push((new_node as u32, target));
            endpoints.push(new_node as u32);
            endpoints.push(target);
        }
    }
    Ok(Graph::from_edges_with_n(n, false, &edges))
}

/// Draw one training-graph configuration: temperature uniform on (0, 0.5)
/// and a (mean degree, exponent) row sampled jointly from the table.
pub fn sample_training_config(
    table: &EmpiricalParamTable,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> HyperbolicConfig {
    let temperature = loop {
        let t = rng.gen::<f64>() * 0.5;
        if t > 0.0 {
            break t;
        }
    };
    let (avg_degree, gamma) = table.rows()[rng.gen_range(0..table.rows().len())];
    HyperbolicConfig {
        n,
        gamma,
        avg_degree,
        temperature,
        seed: rng.gen(),
    }
}
