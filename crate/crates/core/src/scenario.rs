//! Problem instances: global constants, per-device parameters, topology and
//! solver options, with JSON I/O and a seeded random generator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Globals<T> {
    pub bandwidth: T,
    pub snr: T,
    pub price: T,
    pub mu: T,
    pub eta: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams<T> {
    pub omega: T,
    pub demand: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// `x(0) = d*`
    #[default]
    Demand,
    /// `x(0) = B/N`
    Uniform,
    /// `x(0)` uniform in `[0, B]`, drawn from the scenario seed.
    #[serde(alias = "random")]
    SeededRandom,
}

impl std::str::FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "demand" => Ok(InitMode::Demand),
            "uniform" => Ok(InitMode::Uniform),
            "random" | "seeded-random" => Ok(InitMode::SeededRandom),
            other => Err(Error::field(
                "init_mode",
                format!("expected demand, uniform or random, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct SolverOptions<T> {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol_consensus: T,
    #[serde(default = "default_tol")]
    pub tol_constraint: T,
    #[serde(default)]
    pub init_mode: InitMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_max_iters() -> usize {
    10_000
}

fn default_tol<T: Real>() -> T {
    T::of(1e-6)
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            max_iters: default_max_iters(),
            tol_consensus: default_tol(),
            tol_constraint: default_tol(),
            init_mode: InitMode::Demand,
            seed: None,
        }
    }
}

/// A validated problem instance. Construct through [`Scenario::new`],
/// [`parse_scenario`] or [`generate_random_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub globals: Globals<T>,
    pub devices: Vec<DeviceParams<T>>,
    pub edges: Vec<(usize, usize)>,
    pub options: SolverOptions<T>,
}

/// Wire layout of the scenario file.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
struct Document<T> {
    bandwidth: T,
    snr: T,
    price: T,
    mu: T,
    eta: T,
    devices: Vec<DeviceParams<T>>,
    edges: Vec<[usize; 2]>,
    #[serde(default)]
    options: Option<SolverOptions<T>>,
}

fn positive<T: Real>(field: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::field(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

impl<T: Real> Scenario<T> {
    pub fn new(
        globals: Globals<T>,
        devices: Vec<DeviceParams<T>>,
        edges: Vec<(usize, usize)>,
        options: SolverOptions<T>,
    ) -> Result<Self> {
        let s = Self {
            globals,
            devices,
            edges,
            options,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn demands(&self) -> Vec<T> {
        self.devices.iter().map(|d| d.demand).collect()
    }

    pub fn topology(&self) -> Result<Topology> {
        Topology::build(self.devices.len(), &self.edges)
    }

    /// Checks every invariant; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let g = &self.globals;
        positive("bandwidth", g.bandwidth)?;
        positive("snr", g.snr)?;
        positive("price", g.price)?;
        positive("mu", g.mu)?;
        positive("eta", g.eta)?;
        if self.devices.is_empty() {
            return Err(Error::field("devices", "at least one device is required"));
        }
        for (i, d) in self.devices.iter().enumerate() {
            if !d.omega.is_finite() || d.omega <= T::zero() {
                return Err(Error::field(
                    "omega",
                    format!("device {i}: must be positive, got {}", d.omega),
                ));
            }
            if !d.demand.is_finite() || d.demand < T::zero() {
                return Err(Error::field(
                    "demand",
                    format!("device {i}: must be nonnegative, got {}", d.demand),
                ));
            }
        }
        let n = self.devices.len();
        let mut seen = std::collections::HashSet::new();
        for (k, &(a, b)) in self.edges.iter().enumerate() {
            if a >= n || b >= n {
                return Err(Error::field(
                    "edges",
                    format!("edge {k} ({a}, {b}) outside [0, {n})"),
                ));
            }
            if a == b {
                return Err(Error::field(
                    "edges",
                    format!("edge {k} ({a}, {b}) is a self-loop"),
                ));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::field(
                    "edges",
                    format!("edge {k} ({a}, {b}) is a duplicate"),
                ));
            }
        }
        let o = &self.options;
        if o.max_iters == 0 {
            return Err(Error::field("max_iters", "must be at least 1"));
        }
        positive("tol_consensus", o.tol_consensus)?;
        positive("tol_constraint", o.tol_constraint)?;
        if let Some(isolated) = self.topology()?.first_unreachable() {
            return Err(Error::Disconnected { isolated });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let doc = Document {
            bandwidth: self.globals.bandwidth,
            snr: self.globals.snr,
            price: self.globals.price,
            mu: self.globals.mu,
            eta: self.globals.eta,
            devices: self.devices.clone(),
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            options: Some(self.options),
        };
        serde_json::to_string_pretty(&doc).expect("scenario serializes")
    }
}

pub fn parse_scenario<T: Real>(text: &str) -> Result<Scenario<T>> {
    let doc: Document<T> = serde_json::from_str(text)?;
    Scenario::new(
        Globals {
            bandwidth: doc.bandwidth,
            snr: doc.snr,
            price: doc.price,
            mu: doc.mu,
            eta: doc.eta,
        },
        doc.devices,
        doc.edges.into_iter().map(|[a, b]| (a, b)).collect(),
        doc.options.unwrap_or_default(),
    )
}

pub fn load_scenario<T: Real>(path: &std::path::Path) -> Result<Scenario<T>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

/// Deterministic random instance for testing.
///
/// `ω ∈ [0.5, 5]`, `d ∈ [0.5, 3]`, and `B` is chosen so that `Σd/B ∈ [0.5, 2]`,
/// which exercises both admission branches across seeds. The graph is a random
/// spanning tree plus up to `n/2` extra links. `η` is capped at `0.5/deg_max`
/// to keep the consensus map stable on denser graphs.
pub fn generate_random_scenario<T: Real>(n: usize, seed: u64) -> Result<Scenario<T>> {
    if n == 0 {
        return Err(Error::NoDevices);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let devices: Vec<DeviceParams<T>> = (0..n)
        .map(|_| DeviceParams {
            omega: T::of(rng.gen_range(0.5..=5.0)),
            demand: T::of(rng.gen_range(0.5..=3.0)),
        })
        .collect();
    let total: f64 = devices.iter().map(|d| d.demand.as_f64()).sum();
    let ratio: f64 = rng.gen_range(0.5..=2.0);
    let bandwidth = total / ratio;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut edges = Vec::with_capacity(n + n / 2);
    let mut present = std::collections::HashSet::new();
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        let e = (parent.min(order[k]), parent.max(order[k]));
        present.insert(e);
        edges.push(e);
    }
    if n > 2 {
        for _ in 0..n / 2 {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            let e = (a.min(b), a.max(b));
            if a != b && present.insert(e) {
                edges.push(e);
            }
        }
    }
    let max_degree = Topology::build(n, &edges)?.max_degree().max(1);
    let eta = 0.2f64.min(0.5 / max_degree as f64);

    Scenario::new(
        Globals {
            bandwidth: T::of(bandwidth),
            snr: T::of(100.0),
            price: T::of(0.01),
            mu: T::of(0.2),
            eta: T::of(eta),
        },
        devices,
        edges,
        SolverOptions {
            seed: Some(seed),
            ..SolverOptions::default()
        },
    )
}
