//! Fully distributed allocation: synchronous rounds in which every device
//! exchanges its marginal utility with its neighbours, integrates the
//! disagreement into a correction variable, and maps the updated marginal
//! utility back to a bandwidth share.
//!
//! Per round, from round-`k` values only:
//!
//! ```text
//! q_i  = η · Σ_{j ∈ N(i)} (y_j − y_i)
//! y_i ← y_i + q_i − ζ_i + μ · (x_i − d_i*)
//! ζ_i ← ζ_i − μ · q_i
//! x_i ← (U_i′)⁻¹(y_i)
//! ```
//!
//! `y_i` is `U_i′(x_i)`. Because `U_i′` is decreasing, the demand-tracking
//! term enters with a positive sign: a device above its target raises its
//! marginal utility and so lowers its share. With `ζ(0) = 0` on an undirected
//! graph the `q_i` sum to zero each round, hence `Σζ_i` stays zero and every
//! fixed point satisfies `Σx_i = Σd_i*` with equal marginal utilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::admission::{admit, ConfirmedDemands};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scenario::{Globals, InitMode, Scenario, SolverOptions};
use crate::topology::Topology;
use crate::utility::{capacity_coefficient, NetUtility};

/// Consecutive growing-residual rounds tolerated before a run is declared divergent.
pub const DIVERGENCE_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceState<T> {
    pub x: T,
    /// Marginal utility `U′(x)`.
    pub y: T,
    pub zeta: T,
    /// Consensus innovation of the last round (zero before the first).
    pub q: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineState<T> {
    pub devices: Vec<DeviceState<T>>,
    pub iteration: usize,
    pub confirmed: ConfirmedDemands<T>,
}

impl<T: Real> EngineState<T> {
    pub fn allocations(&self) -> Vec<T> {
        self.devices.iter().map(|d| d.x).collect()
    }

    pub fn zeta_sum(&self) -> T {
        self.devices.iter().fold(T::zero(), |acc, d| acc + d.zeta)
    }

    pub fn constraint_residual(&self) -> T {
        let total = self.devices.iter().fold(T::zero(), |acc, d| acc + d.x);
        (total - self.confirmed.total).abs()
    }
}

/// Spread `max y − min y` of the marginal utilities.
pub fn consensus_residual<T: Real>(state: &EngineState<T>) -> T {
    let (lo, hi) = state
        .devices
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), d| {
            (lo.min(d.y), hi.max(d.y))
        });
    if state.devices.is_empty() {
        T::zero()
    } else {
        hi - lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow<T> {
    pub iter: usize,
    pub device: usize,
    pub x: T,
    pub u_prime: T,
    pub zeta: T,
    pub q: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult<T> {
    pub confirmed: ConfirmedDemands<T>,
    pub allocations: Vec<T>,
    pub consensus_value: T,
    pub iterations_used: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow<T>>,
    pub consensus_residual: T,
    pub constraint_residual: T,
    pub warnings: Vec<String>,
}

/// Scenario compiled into the per-device data each round needs.
#[derive(Debug, Clone)]
pub struct Engine<T> {
    globals: Globals<T>,
    options: SolverOptions<T>,
    demands: Vec<T>,
    topology: Topology,
    utilities: Vec<NetUtility<T>>,
}

impl<T: Real> Engine<T> {
    pub fn new(scenario: &Scenario<T>) -> Result<Self> {
        scenario.validate()?;
        let g = scenario.globals;
        let c = capacity_coefficient(g.snr)?;
        Ok(Self {
            globals: g,
            options: scenario.options,
            demands: scenario.demands(),
            topology: scenario.topology()?,
            utilities: scenario
                .devices
                .iter()
                .map(|d| NetUtility::new(d.omega, c, g.price))
                .collect(),
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn utilities(&self) -> &[NetUtility<T>] {
        &self.utilities
    }

    pub fn admit(&self) -> Result<ConfirmedDemands<T>> {
        admit(&self.demands, self.globals.bandwidth)
    }

    fn check_len(&self, got: usize) -> Result<()> {
        let expected = self.utilities.len();
        if got == expected {
            Ok(())
        } else {
            Err(Error::LengthMismatch { expected, got })
        }
    }

    pub fn init(&self, confirmed: &ConfirmedDemands<T>) -> Result<EngineState<T>> {
        self.check_len(confirmed.len())?;
        let n = self.utilities.len();
        let b = self.globals.bandwidth;
        let x0: Vec<T> = match self.options.init_mode {
            InitMode::Demand => confirmed.values.clone(),
            InitMode::Uniform => vec![b / T::of_usize(n); n],
            InitMode::SeededRandom => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.options.seed.unwrap_or(0));
                (0..n)
                    .map(|_| b * T::of(rng.gen_range(0.0..=1.0)))
                    .collect()
            }
        };
        let devices = self
            .utilities
            .iter()
            .zip(x0)
            .map(|(u, x)| {
                Ok(DeviceState {
                    x,
                    y: u.derivative(x)?,
                    zeta: T::zero(),
                    q: T::zero(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(EngineState {
            devices,
            iteration: 0,
            confirmed: confirmed.clone(),
        })
    }

    /// State with the given marginal utilities and corrections; allocations
    /// are recovered through the inverse so that `x` and `y` are consistent.
    pub fn state_from_derivatives(
        &self,
        y: &[T],
        zeta: &[T],
        confirmed: &ConfirmedDemands<T>,
    ) -> Result<EngineState<T>> {
        self.check_len(y.len())?;
        self.check_len(zeta.len())?;
        self.check_len(confirmed.len())?;
        let devices = self
            .utilities
            .iter()
            .zip(y.iter().zip(zeta))
            .map(|(u, (&y, &zeta))| {
                Ok(DeviceState {
                    x: u.invert_derivative(y)?,
                    y,
                    zeta,
                    q: T::zero(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(EngineState {
            devices,
            iteration: 0,
            confirmed: confirmed.clone(),
        })
    }

    /// The stationary state at common marginal utility `lambda`:
    /// `ζ_i = μ·(x_i − d_i*)`. Its `Σζ` vanishes only at the optimal multiplier.
    pub fn stationary_state(
        &self,
        lambda: T,
        confirmed: &ConfirmedDemands<T>,
    ) -> Result<EngineState<T>> {
        let n = self.utilities.len();
        let mut state =
            self.state_from_derivatives(&vec![lambda; n], &vec![T::zero(); n], confirmed)?;
        for (dev, &target) in state.devices.iter_mut().zip(&confirmed.values) {
            dev.zeta = self.globals.mu * (dev.x - target);
        }
        Ok(state)
    }

    /// One synchronous round. All reads see round-`k` values; no device
    /// observes another's round-`k+1` update.
    pub fn step(&self, state: &EngineState<T>) -> Result<EngineState<T>> {
        self.check_len(state.devices.len())?;
        let Globals { mu, eta, .. } = self.globals;
        let devs = &state.devices;

        let innovations: Vec<T> = (0..devs.len())
            .map(|i| {
                let yi = devs[i].y;
                let disagreement = self
                    .topology
                    .neighbors(i)?
                    .iter()
                    .fold(T::zero(), |acc, &j| acc + (devs[j].y - yi));
                Ok(eta * disagreement)
            })
            .collect::<Result<_>>()?;

        let iteration = state.iteration + 1;
        let devices = devs
            .iter()
            .zip(&innovations)
            .zip(&state.confirmed.values)
            .zip(&self.utilities)
            .enumerate()
            .map(|(device, (((d, &q), &target), u))| {
                let gap = d.x - target;
                let y = d.y + q + (mu * gap - d.zeta);
                let zeta = d.zeta - mu * q;
                let x = u.invert_derivative(y)?;
                if !(x.is_finite() && y.is_finite() && zeta.is_finite()) {
                    return Err(Error::NonFinite { iteration, device });
                }
                Ok(DeviceState { x, y, zeta, q })
            })
            .collect::<Result<_>>()?;

        Ok(EngineState {
            devices,
            iteration,
            confirmed: state.confirmed.clone(),
        })
    }

    fn converged(&self, state: &EngineState<T>) -> bool {
        consensus_residual(state) <= self.options.tol_consensus
            && state.constraint_residual() <= self.options.tol_constraint
    }

    /// Admission, initialization, then rounds until both residuals are within
    /// tolerance or the iteration cap is hit. Every `stride`-th round is traced,
    /// plus the initial and final states.
    pub fn run(&self, stride: usize) -> Result<RunResult<T>> {
        let stride = stride.max(1);
        let confirmed = self.admit()?;
        let n = self.utilities.len();
        let mut trace = Vec::new();

        if confirmed.total == T::zero() {
            // Nothing to share: the only feasible allocation is zero.
            let state = self.state_zero(&confirmed)?;
            record(&mut trace, &state);
            return Ok(self.finish(state, true, trace));
        }

        let mut state = self.init(&confirmed)?;
        record(&mut trace, &state);
        let mut previous = T::infinity();
        let mut growing = 0usize;
        let converged = loop {
            if self.converged(&state) {
                break true;
            }
            if state.iteration >= self.options.max_iters {
                break false;
            }
            let combined = consensus_residual(&state) + state.constraint_residual();
            growing = if combined > previous { growing + 1 } else { 0 };
            if growing >= DIVERGENCE_WINDOW {
                return Err(Error::Diverged {
                    iteration: state.iteration,
                    window: DIVERGENCE_WINDOW,
                });
            }
            previous = combined;
            state = self.step(&state)?;
            if state.iteration % stride == 0 {
                record(&mut trace, &state);
            }
        };
        if state.iteration % stride != 0 {
            record(&mut trace, &state);
        }
        debug_assert_eq!(trace.len() % n, 0);
        Ok(self.finish(state, converged, trace))
    }

    fn state_zero(&self, confirmed: &ConfirmedDemands<T>) -> Result<EngineState<T>> {
        let devices = self
            .utilities
            .iter()
            .map(|u| {
                Ok(DeviceState {
                    x: T::zero(),
                    y: u.derivative(T::zero())?,
                    zeta: T::zero(),
                    q: T::zero(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(EngineState {
            devices,
            iteration: 0,
            confirmed: confirmed.clone(),
        })
    }

    fn finish(
        &self,
        state: EngineState<T>,
        converged: bool,
        trace: Vec<TraceRow<T>>,
    ) -> RunResult<T> {
        let n = T::of_usize(state.devices.len());
        let mean = state.devices.iter().fold(T::zero(), |acc, d| acc + d.y) / n;
        let warnings = state
            .devices
            .iter()
            .enumerate()
            .filter(|(_, d)| d.x < T::zero())
            .map(|(i, d)| format!("device {i} ends with negative allocation {}", d.x))
            .collect();
        RunResult {
            allocations: state.allocations(),
            consensus_value: mean,
            iterations_used: state.iteration,
            converged,
            consensus_residual: consensus_residual(&state),
            constraint_residual: state.constraint_residual(),
            confirmed: state.confirmed,
            trace,
            warnings,
        }
    }
}

fn record<T: Real>(trace: &mut Vec<TraceRow<T>>, state: &EngineState<T>) {
    trace.extend(
        state
            .devices
            .iter()
            .enumerate()
            .map(|(device, d)| TraceRow {
                iter: state.iteration,
                device,
                x: d.x,
                u_prime: d.y,
                zeta: d.zeta,
                q: d.q,
            }),
    );
}

/// Runs a scenario with every round traced.
pub fn run<T: Real>(scenario: &Scenario<T>) -> Result<RunResult<T>> {
    Engine::new(scenario)?.run(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{parse_scenario, DeviceParams};

    const PAPER: &str = include_str!("../scenarios/paper_s5.json");

    fn paper() -> Scenario<f64> {
        parse_scenario(PAPER).unwrap()
    }

    fn with_init(mode: InitMode, seed: Option<u64>) -> Scenario<f64> {
        let mut s = paper();
        s.options.init_mode = mode;
        s.options.seed = seed;
        s
    }

    #[test]
    fn init_modes() {
        let s = paper();
        let e = Engine::new(&s).unwrap();
        let conf = e.admit().unwrap();
        let st = e.init(&conf).unwrap();
        assert_eq!(st.allocations(), vec![1.0, 2.0, 2.0]);
        assert!(st.devices.iter().all(|d| d.zeta == 0.0 && d.q == 0.0));
        for (d, u) in st.devices.iter().zip(e.utilities()) {
            assert_eq!(d.y, u.derivative(d.x).unwrap());
        }

        let e = Engine::new(&with_init(InitMode::Uniform, None)).unwrap();
        let st = e.init(&conf).unwrap();
        assert!(st
            .allocations()
            .iter()
            .all(|&x| (x - 5.0 / 3.0).abs() < 1e-15));

        let e = Engine::new(&with_init(InitMode::SeededRandom, Some(9))).unwrap();
        let a = e.init(&conf).unwrap();
        let b = e.init(&conf).unwrap();
        assert_eq!(a, b);
        assert!(a.allocations().iter().all(|&x| (0.0..=5.0).contains(&x)));
    }

    #[test]
    fn init_length_mismatch() {
        let e = Engine::new(&paper()).unwrap();
        let short = admit(&[1.0, 2.0], 5.0).unwrap();
        assert!(matches!(
            e.init(&short),
            Err(Error::LengthMismatch {
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn innovation_and_correction_by_hand() {
        // Line graph, y = (1, 2, 3), η = μ = 0.2:
        // q = 0.2·(2−1, (1−2)+(3−2), 2−3) = (0.2, 0, −0.2); ζ(1) = −μq.
        let e = Engine::new(&paper()).unwrap();
        let conf = e.admit().unwrap();
        let st = e
            .state_from_derivatives(&[1.0, 2.0, 3.0], &[0.0; 3], &conf)
            .unwrap();
        let next = e.step(&st).unwrap();
        let q: Vec<f64> = next.devices.iter().map(|d| d.q).collect();
        let zeta: Vec<f64> = next.devices.iter().map(|d| d.zeta).collect();
        for (got, want) in q.iter().zip([0.2, 0.0, -0.2]) {
            assert!((got - want).abs() < 1e-15);
        }
        for (got, want) in zeta.iter().zip([-0.04, 0.0, 0.04]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(next.zeta_sum().abs() < 1e-15);
        assert_eq!(next.iteration, 1);
    }

    #[test]
    fn y_update_matches_hand_evaluation() {
        let e = Engine::new(&paper()).unwrap();
        let conf = e.admit().unwrap();
        let st = e
            .state_from_derivatives(&[1.0, 2.0, 3.0], &[0.1, -0.3, 0.2], &conf)
            .unwrap();
        let next = e.step(&st).unwrap();
        for i in 0..3 {
            let d = st.devices[i];
            let want = d.y + next.devices[i].q - d.zeta + 0.2 * (d.x - conf.values[i]);
            assert!((next.devices[i].y - want).abs() < 1e-14);
            let u = e.utilities()[i];
            assert!((u.derivative(next.devices[i].x).unwrap() - next.devices[i].y).abs() < 1e-10);
        }
    }

    #[test]
    fn matches_read_all_then_write_all_reference() {
        let s: Scenario<f64> = crate::scenario::generate_random_scenario(9, 21).unwrap();
        let e = Engine::new(&s).unwrap();
        let conf = e.admit().unwrap();
        let mut state = e.init(&conf).unwrap();
        let (mu, eta) = (s.globals.mu, s.globals.eta);
        for _ in 0..50 {
            let snapshot = state.devices.clone();
            let mut expected = snapshot.clone();
            for (i, out) in expected.iter_mut().enumerate() {
                let me = snapshot[i];
                let q = eta
                    * e.topology()
                        .neighbors(i)
                        .unwrap()
                        .iter()
                        .fold(0.0, |a, &j| a + (snapshot[j].y - me.y));
                out.y = me.y + q + (mu * (me.x - conf.values[i]) - me.zeta);
                out.zeta = me.zeta - mu * q;
                out.q = q;
                out.x = e.utilities()[i].invert_derivative(out.y).unwrap();
            }
            state = e.step(&state).unwrap();
            assert_eq!(state.devices, expected);
        }
    }

    #[test]
    fn consensus_residual_examples() {
        let e = Engine::new(&paper()).unwrap();
        let conf = e.admit().unwrap();
        let equal = e
            .state_from_derivatives(&[1.5; 3], &[0.0; 3], &conf)
            .unwrap();
        assert_eq!(consensus_residual(&equal), 0.0);
        let spread = e
            .state_from_derivatives(&[1.0, 2.0, 3.0], &[0.0; 3], &conf)
            .unwrap();
        assert_eq!(consensus_residual(&spread), 2.0);
    }

    #[test]
    fn stationary_state_is_exact_fixed_point() {
        let e = Engine::new(&paper()).unwrap();
        let conf = e.admit().unwrap();
        for lambda in [0.5, 1.0617, 2.0] {
            let st = e.stationary_state(lambda, &conf).unwrap();
            let next = e.step(&st).unwrap();
            assert_eq!(next.devices, st.devices);
        }
    }

    #[test]
    fn non_stationary_states_move() {
        let e = Engine::new(&paper()).unwrap();
        let conf = e.admit().unwrap();
        // unequal marginal utilities
        let st = e
            .state_from_derivatives(&[1.0, 1.1, 1.0], &[0.0; 3], &conf)
            .unwrap();
        assert_ne!(e.step(&st).unwrap().devices[0].y, st.devices[0].y);
        // equal marginal utilities but wrong corrections
        let mut st = e.stationary_state(1.0617, &conf).unwrap();
        st.devices[2].zeta += 1e-3;
        assert_ne!(e.step(&st).unwrap().devices[2].y, st.devices[2].y);
    }

    #[test]
    fn paper_scenario_converges() {
        let r = run(&paper()).unwrap();
        assert!(r.converged);
        for (x, want) in r.allocations.iter().zip([0.78, 1.67, 2.55]) {
            assert!((x - want).abs() <= 0.01, "{:?}", r.allocations);
        }
        assert!((r.allocations.iter().sum::<f64>() - 5.0).abs() <= 1e-6);
        assert!(r.consensus_residual <= 1e-6);
        assert!(r.warnings.is_empty());
        assert_eq!(r.trace.len(), 3 * (r.iterations_used + 1));
    }

    #[test]
    fn insensitive_to_initialization() {
        for (mode, seed) in [(InitMode::Uniform, None), (InitMode::SeededRandom, Some(4))] {
            let r = run(&with_init(mode, seed)).unwrap();
            assert!(r.converged);
            for (x, want) in r.allocations.iter().zip([0.77806, 1.67588, 2.54606]) {
                assert!((x - want).abs() < 1e-4);
            }
        }
    }

    fn scenario(
        devices: Vec<(f64, f64)>,
        edges: Vec<(usize, usize)>,
        bandwidth: f64,
    ) -> Scenario<f64> {
        let mut s = paper();
        s.globals.bandwidth = bandwidth;
        s.devices = devices
            .into_iter()
            .map(|(omega, demand)| DeviceParams { omega, demand })
            .collect();
        s.edges = edges;
        s.validate().unwrap();
        s
    }

    #[test]
    fn single_device_contracts_to_demand() {
        let mut s = scenario(vec![(2.0, 3.0)], vec![], 5.0);
        s.options.init_mode = InitMode::Uniform;
        let r = run(&s).unwrap();
        assert!(r.converged);
        assert!((r.allocations[0] - 3.0).abs() <= 1e-6);
        assert!(r.trace.iter().all(|row| row.q == 0.0 && row.zeta == 0.0));
    }

    #[test]
    fn symmetric_devices_split_evenly() {
        let edges: Vec<_> = (0..4)
            .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
            .collect();
        let mut s = scenario(vec![(2.0, 1.25); 4], edges, 5.0);
        s.globals.eta = 0.1;
        let r = run(&s).unwrap();
        assert!(r.converged);
        assert!(r.allocations.iter().all(|&x| (x - 1.25).abs() < 1e-12));
    }

    #[test]
    fn zero_demand_short_circuits() {
        let s = scenario(vec![(1.0, 0.0), (2.0, 0.0)], vec![(0, 1)], 5.0);
        let r = run(&s).unwrap();
        assert!(r.converged);
        assert_eq!(r.allocations, vec![0.0, 0.0]);
        assert_eq!(r.iterations_used, 0);
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let mut s = paper();
        s.options.max_iters = 1;
        let r = run(&s).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations_used, 1);
    }

    #[test]
    fn unstable_gain_aborts() {
        let mut s = paper();
        s.globals.eta = 50.0;
        let err = run(&s).unwrap_err();
        assert!(err.is_numerical(), "{err}");
    }

    #[test]
    fn stride_keeps_first_and_last() {
        let r = Engine::new(&paper()).unwrap().run(50).unwrap();
        let iters: Vec<usize> = r.trace.iter().step_by(3).map(|row| row.iter).collect();
        assert_eq!(iters.first(), Some(&0));
        assert_eq!(iters.last(), Some(&r.iterations_used));
        assert!(iters.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn deterministic_traces() {
        assert_eq!(run(&paper()).unwrap(), run(&paper()).unwrap());
    }

    #[test]
    fn single_precision_run() {
        let mut s: Scenario<f32> = parse_scenario(PAPER).unwrap();
        s.options.tol_consensus = 1e-4;
        s.options.tol_constraint = 1e-4;
        let r = run(&s).unwrap();
        assert!(r.converged);
        for (x, want) in r.allocations.iter().zip([0.78f32, 1.67, 2.55]) {
            assert!((x - want).abs() <= 0.01);
        }
    }
}
