use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{add_noise, NoiseSpec, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::numkernel::DenseMatrix;

/// J/(mol·K)
pub const GAS_CONSTANT: f64 = 8.314;

const NOMINAL_COOLANT: f64 = 300.0;
const STEP_AMPLITUDE: f64 = 15.0;
const STEP_HOLD: usize = 10;
const WARM_UP: usize = 50;
const SUBSTEPS: usize = 10;
/// Largest `h·ρ(J)` allowed at the default substep count.
const STIFFNESS_BUDGET: f64 = 0.005;
const TEST_PROFILE: [f64; 8] = [300.0, 292.0, 306.0, 297.0, 310.0, 288.0, 303.0, 295.0];
const TEST_HOLD: usize = 40;

/// Physical constants of the exothermic first-order CSTR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CstrParams {
    /// Feed flow rate, L/min.
    pub q: f64,
    /// Reactor volume, L.
    pub volume: f64,
    /// Pre-exponential rate constant, 1/min.
    pub k0: f64,
    /// Activation temperature E/R, K.
    pub e_over_r: f64,
    /// Feed concentration, mol/L.
    pub caf: f64,
    /// Feed temperature, K.
    pub tf: f64,
    /// −ΔH/(ρ·Cp), K·L/mol.
    pub neg_dh_over_rho_cp: f64,
    /// UA/(V·ρ·Cp), 1/min.
    pub ua_over_v_rho_cp: f64,
    /// Sampling interval, min.
    pub dt: f64,
}

impl Default for CstrParams {
    fn default() -> Self {
        CstrParams {
            q: 100.0,
            volume: 100.0,
            k0: 7.2e10,
            e_over_r: 8750.0,
            caf: 1.0,
            tf: 350.0,
            neg_dh_over_rho_cp: 5e4 / (1000.0 * 0.239),
            ua_over_v_rho_cp: 5e4 / (100.0 * 1000.0 * 0.239),
            dt: 0.1,
        }
    }
}

impl CstrParams {
    /// Sets E/R from an activation energy in J/mol.
    pub fn with_activation_energy(self, e_j_per_mol: f64) -> Self {
        CstrParams {
            e_over_r: e_j_per_mol / GAS_CONSTANT,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("q", self.q),
            ("volume", self.volume),
            ("k0", self.k0),
            ("e_over_r", self.e_over_r),
            ("caf", self.caf),
            ("tf", self.tf),
            ("neg_dh_over_rho_cp", self.neg_dh_over_rho_cp),
            ("ua_over_v_rho_cp", self.ua_over_v_rho_cp),
            ("dt", self.dt),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!(
                    "CSTR parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn rate(&self, temperature: f64) -> f64 {
        self.k0 * (-self.e_over_r / temperature).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CstrState {
    /// Concentration C_A, mol/L.
    pub ca: f64,
    /// Reactor temperature, K.
    pub temperature: f64,
}

/// Right-hand side of the mass and energy balances.
pub fn cstr_derivative(p: &CstrParams, s: CstrState, coolant: f64) -> (f64, f64) {
    let flow = p.q / p.volume;
    let reaction = p.rate(s.temperature) * s.ca;
    let dca = flow * (p.caf - s.ca) - reaction;
    let dt = flow * (p.tf - s.temperature)
        + p.neg_dh_over_rho_cp * reaction
        + p.ua_over_v_rho_cp * (coolant - s.temperature);
    (dca, dt)
}

fn rk4(p: &CstrParams, s: CstrState, coolant: f64, h: f64) -> CstrState {
    let shift = |s: CstrState, k: (f64, f64), f: f64| CstrState {
        ca: s.ca + f * k.0,
        temperature: s.temperature + f * k.1,
    };
    let k1 = cstr_derivative(p, s, coolant);
    let k2 = cstr_derivative(p, shift(s, k1, h / 2.0), coolant);
    let k3 = cstr_derivative(p, shift(s, k2, h / 2.0), coolant);
    let k4 = cstr_derivative(p, shift(s, k3, h), coolant);
    CstrState {
        ca: s.ca + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        temperature: s.temperature + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    }
}

fn physical(p: &CstrParams, s: CstrState) -> bool {
    (0.0..=1.5 * p.caf).contains(&s.ca) && (200.0..=600.0).contains(&s.temperature)
}

/// Integrates the reactor with classical RK4, holding each coolant
/// temperature for one sampling interval. Returns the sampled states,
/// starting with `x0`.
///
/// The nominal step is `dt/10`. Near ignition the reaction rate grows by
/// orders of magnitude, so each step is further capped by a bound on the
/// Jacobian spectral radius.
pub fn simulate_cstr(p: &CstrParams, coolant: &[f64], x0: CstrState) -> Result<Vec<CstrState>> {
    simulate_cstr_substeps(p, coolant, x0, SUBSTEPS)
}

/// As [`simulate_cstr`] with `substeps` nominal steps per sample. Doubling
/// `substeps` halves every step, including the stiffness-limited ones.
pub fn simulate_cstr_substeps(
    p: &CstrParams,
    coolant: &[f64],
    x0: CstrState,
    substeps: usize,
) -> Result<Vec<CstrState>> {
    p.validate()?;
    if substeps == 0 {
        return Err(Error::Domain("substeps must be at least 1".into()));
    }
    if !physical(p, x0) {
        return Err(Error::Instability {
            step: 0,
            reason: format!("initial state {x0:?} outside physical bounds"),
        });
    }
    let h_nominal = p.dt / substeps as f64;
    let stiffness_budget = STIFFNESS_BUDGET * SUBSTEPS as f64 / substeps as f64;
    let mut states = Vec::with_capacity(coolant.len() + 1);
    states.push(x0);
    let mut s = x0;
    for (step, &tc) in coolant.iter().enumerate() {
        let mut t = 0.0;
        while t < p.dt {
            let h = h_nominal
                .min(stiffness_budget / jacobian_bound(p, s))
                .min(p.dt - t);
            s = rk4(p, s, tc, h);
            t += h;
            if !physical(p, s) {
                return Err(Error::Instability {
                    step: step + 1,
                    reason: format!(
                        "C_A = {}, T = {} K outside physical bounds",
                        s.ca, s.temperature
                    ),
                });
            }
            if p.dt - t < 1e-12 * p.dt {
                break;
            }
        }
        states.push(s);
    }
    Ok(states)
}

/// Spectral radius of the Jacobian of [`cstr_derivative`].
fn jacobian_bound(p: &CstrParams, s: CstrState) -> f64 {
    let flow = p.q / p.volume;
    let k = p.rate(s.temperature);
    let dk = k * p.e_over_r / (s.temperature * s.temperature) * s.ca;
    let j11 = -flow - k;
    let j12 = -dk;
    let j21 = p.neg_dh_over_rho_cp * k;
    let j22 = -flow - p.ua_over_v_rho_cp + p.neg_dh_over_rho_cp * dk;
    let half_tr = 0.5 * (j11 + j22);
    let det = j11 * j22 - j12 * j21;
    let disc = half_tr * half_tr - det;
    if disc >= 0.0 {
        half_tr.abs() + disc.sqrt()
    } else {
        det.sqrt()
    }
}

/// Lowest-temperature equilibrium for a constant coolant temperature.
///
/// Eliminating C_A from the mass balance leaves a scalar equation in T; it is
/// scanned upward from 250 K for the first sign change and refined by
/// bisection.
pub fn steady_state(p: &CstrParams, coolant: f64) -> Result<CstrState> {
    p.validate()?;
    let flow = p.q / p.volume;
    let ca_of = |t: f64| flow * p.caf / (flow + p.rate(t));
    let g = |t: f64| {
        cstr_derivative(
            p,
            CstrState {
                ca: ca_of(t),
                temperature: t,
            },
            coolant,
        )
        .1
    };

    let (mut lo, mut hi) = (250.0, 250.0);
    let mut found = false;
    let mut t = 250.0;
    while t < 600.0 {
        let next = t + 0.05;
        if g(t) > 0.0 && g(next) <= 0.0 {
            lo = t;
            hi = next;
            found = true;
            break;
        }
        t = next;
    }
    if !found {
        return Err(Error::Degenerate(format!(
            "no equilibrium in [250, 600] K for coolant {coolant} K"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok(CstrState {
        ca: ca_of(t),
        temperature: t,
    })
}

/// Piecewise-constant random steps around the nominal coolant temperature.
fn random_steps(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let level = NOMINAL_COOLANT + rng.gen_range(-STEP_AMPLITUDE..=STEP_AMPLITUDE);
        for _ in 0..STEP_HOLD.min(len - out.len()) {
            out.push(level);
        }
    }
    out
}

fn test_profile(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| TEST_PROFILE[(i / TEST_HOLD) % TEST_PROFILE.len()])
        .collect()
}

fn cstr_rows(states: &[CstrState], coolant: &[f64], skip: usize) -> (DenseMatrix, DenseMatrix) {
    let rows = coolant.len() - skip;
    let x = DenseMatrix::from_fn(rows, 3, |i, j| {
        let n = skip + i;
        match j {
            0 => states[n].ca,
            1 => states[n].temperature,
            _ => coolant[n],
        }
    });
    let y = DenseMatrix::from_fn(rows, 1, |i, _| states[skip + i + 1].ca);
    (x, y)
}

/// CSTR benchmark: regressors `[C_A(n−1), T(n−1), Tc(n−1)]`, target `C_A(n)`.
///
/// Both splits start at the equilibrium for a 300 K coolant and drop a
/// 50-sample warm-up. Training excitation holds random levels in
/// `300 ± 15 K` for 10 samples each; the test excitation is a fixed staircase.
pub fn gen_cstr_dataset(
    p: &CstrParams,
    n_train: usize,
    n_test: usize,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<TimeSeriesDataset> {
    if n_train < 10 || n_test < 10 {
        return Err(Error::Domain(format!(
            "need at least 10 train and test samples, got {n_train}/{n_test}"
        )));
    }
    noise.validate()?;
    let x0 = steady_state(p, NOMINAL_COOLANT)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tc_train = random_steps(&mut rng, WARM_UP + n_train);
    let mut train_states = simulate_cstr(p, &tc_train, x0)?;

    let mut outlier_rows = Vec::new();
    if noise.corrupt_regressors {
        let ca: Vec<f64> = train_states.iter().map(|s| s.ca).collect();
        let measured = add_noise(&DenseMatrix::column_vector(&ca)?, noise)?;
        for (s, v) in train_states.iter_mut().zip(measured.values.as_slice()) {
            s.ca = *v;
        }
        outlier_rows = measured
            .outlier_rows
            .into_iter()
            .filter(|&n| n > WARM_UP)
            .map(|n| n - WARM_UP - 1)
            .filter(|&r| r < n_train)
            .collect();
    }
    let (x_train, mut y_train) = cstr_rows(&train_states, &tc_train, WARM_UP);
    if !noise.corrupt_regressors {
        let noisy = add_noise(&y_train, noise)?;
        y_train = noisy.values;
        outlier_rows = noisy.outlier_rows;
    }

    let tc_test = test_profile(WARM_UP + n_test);
    let test_states = simulate_cstr(p, &tc_test, x0)?;
    let (x_test, y_test) = cstr_rows(&test_states, &tc_test, WARM_UP);

    Ok(TimeSeriesDataset {
        x_train,
        y_train,
        x_test,
        y_test,
        regressor_names: vec!["ca_lag1".into(), "temp_lag1".into(), "coolant_lag1".into()],
        target_names: vec!["target_ca".into()],
        noise: *noise,
        outlier_rows,
    })
}
