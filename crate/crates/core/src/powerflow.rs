//! Polar Newton-Raphson AC power flow and the Volt/Var objective terms.
//!
//! Every non-slack bus is a PQ bus: inverter active and reactive output are
//! both specified, so the only unknowns are the non-slack voltage magnitudes
//! and angles. The slack bus is held at 1∠0 p.u.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::grid::NetworkModel;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PowerFlowError {
    #[error("solution did not converge")]
    NotConverged,
    #[error("injection vector has {found} entries, network has {expected} buses")]
    Dimension { expected: usize, found: usize },
}

/// Net injections per bus in per unit (generation minus load). Slack entries
/// are ignored by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct Injections {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl Injections {
    pub fn zeros(n: usize) -> Self {
        Self {
            p: vec![0.0; n],
            q: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub mismatch: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Dense bus admittance matrix split into conductance and susceptance parts.
#[derive(Debug, Clone)]
pub struct Admittance {
    n: usize,
    g: Vec<f64>,
    b: Vec<f64>,
}

impl Admittance {
    pub fn build(network: &NetworkModel) -> Self {
        let n = network.n_buses();
        let mut g = vec![0.0; n * n];
        let mut b = vec![0.0; n * n];
        for br in &network.branches {
            let (i, j) = (br.from - 1, br.to - 1);
            let (gs, bs) = (br.g(), br.b());
            g[i * n + i] += gs;
            g[j * n + j] += gs;
            g[i * n + j] -= gs;
            g[j * n + i] -= gs;
            b[i * n + i] += bs;
            b[j * n + j] += bs;
            b[i * n + j] -= bs;
            b[j * n + i] -= bs;
        }
        Self { n, g, b }
    }

    /// Calculated injections P_i, Q_i for the given voltage profile.
    pub fn injections(&self, v: &[f64], theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for i in 0..n {
            let (mut pi, mut qi) = (0.0, 0.0);
            for j in 0..n {
                let (gij, bij) = (self.g[i * n + j], self.b[i * n + j]);
                if gij == 0.0 && bij == 0.0 {
                    continue;
                }
                let (s, c) = (theta[i] - theta[j]).sin_cos();
                pi += v[j] * (gij * c + bij * s);
                qi += v[j] * (gij * s - bij * c);
            }
            p[i] = v[i] * pi;
            q[i] = v[i] * qi;
        }
        (p, q)
    }
}

/// Solves the power-flow equations. `start` warm-starts from a prior
/// solution; otherwise a flat start (v = 1, θ = 0) is used. Failure to
/// converge is reported through `converged = false`, never a panic.
pub fn solve_power_flow(
    network: &NetworkModel,
    injections: &Injections,
    start: Option<&PowerFlowSolution>,
    options: &SolverOptions,
) -> Result<PowerFlowSolution, PowerFlowError> {
    let n = network.n_buses();
    if injections.p.len() != n || injections.q.len() != n {
        return Err(PowerFlowError::Dimension {
            expected: n,
            found: injections.p.len().min(injections.q.len()),
        });
    }
    let ybus = Admittance::build(network);
    let slack = network.slack_index();
    let pq: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let m = pq.len();

    let (mut v, mut theta) = match start {
        Some(s) if s.v.len() == n => (s.v.clone(), s.theta.clone()),
        _ => (vec![1.0; n], vec![0.0; n]),
    };
    v[slack] = 1.0;
    theta[slack] = 0.0;

    let mut iterations = 0;
    loop {
        let (p_calc, q_calc) = ybus.injections(&v, &theta);
        let mut residual = DVector::zeros(2 * m);
        for (k, &i) in pq.iter().enumerate() {
            residual[k] = injections.p[i] - p_calc[i];
            residual[m + k] = injections.q[i] - q_calc[i];
        }
        let mismatch = residual.amax();
        if !mismatch.is_finite() {
            return Ok(PowerFlowSolution {
                v,
                theta,
                converged: false,
                iterations,
                mismatch,
                diagnostic: Some("non-finite mismatch".into()),
            });
        }
        if mismatch <= options.tolerance {
            return Ok(PowerFlowSolution {
                v,
                theta,
                converged: true,
                iterations,
                mismatch,
                diagnostic: None,
            });
        }
        if iterations >= options.max_iterations {
            return Ok(PowerFlowSolution {
                v,
                theta,
                converged: false,
                iterations,
                mismatch,
                diagnostic: Some(format!("no convergence after {iterations} iterations")),
            });
        }

        let jac = jacobian(&ybus, &pq, &v, &theta, &p_calc, &q_calc);
        let Some(dx) = jac.lu().solve(&residual) else {
            return Ok(PowerFlowSolution {
                v,
                theta,
                converged: false,
                iterations,
                mismatch,
                diagnostic: Some("singular Jacobian".into()),
            });
        };
        for (k, &i) in pq.iter().enumerate() {
            theta[i] += dx[k];
            v[i] += dx[m + k];
        }
        iterations += 1;
    }
}

fn jacobian(
    ybus: &Admittance,
    pq: &[usize],
    v: &[f64],
    theta: &[f64],
    p_calc: &[f64],
    q_calc: &[f64],
) -> DMatrix<f64> {
    let n = ybus.n;
    let m = pq.len();
    let mut jac = DMatrix::zeros(2 * m, 2 * m);
    for (r, &i) in pq.iter().enumerate() {
        for (c, &k) in pq.iter().enumerate() {
            let (g, b) = (ybus.g[i * n + k], ybus.b[i * n + k]);
            if i == k {
                jac[(r, c)] = -q_calc[i] - b * v[i] * v[i];
                jac[(r, m + c)] = p_calc[i] / v[i] + g * v[i];
                jac[(m + r, c)] = p_calc[i] - g * v[i] * v[i];
                jac[(m + r, m + c)] = q_calc[i] / v[i] - b * v[i];
            } else if g != 0.0 || b != 0.0 {
                let (s, co) = (theta[i] - theta[k]).sin_cos();
                jac[(r, c)] = v[i] * v[k] * (g * s - b * co);
                jac[(r, m + c)] = v[i] * (g * co + b * s);
                jac[(m + r, c)] = -v[i] * v[k] * (g * co + b * s);
                jac[(m + r, m + c)] = v[i] * (g * s - b * co);
            }
        }
    }
    jac
}

/// Real power dissipated on branch `k`, in MW: |V_i − V_j|²·r / (r² + x²).
pub fn branch_loss(
    solution: &PowerFlowSolution,
    network: &NetworkModel,
    k: usize,
) -> Result<f64, PowerFlowError> {
    if !solution.converged {
        return Err(PowerFlowError::NotConverged);
    }
    Ok(branch_loss_pu(solution, network, k) * network.base_mva)
}

fn branch_loss_pu(solution: &PowerFlowSolution, network: &NetworkModel, k: usize) -> f64 {
    let br = &network.branches[k];
    let (i, j) = (br.from - 1, br.to - 1);
    let (si, ci) = solution.theta[i].sin_cos();
    let (sj, cj) = solution.theta[j].sin_cos();
    let dre = solution.v[i] * ci - solution.v[j] * cj;
    let dim = solution.v[i] * si - solution.v[j] * sj;
    (dre * dre + dim * dim) * br.g()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveComponents {
    /// Σ_i |v_i − v_ref| over all buses, p.u.
    pub deviation_sum: f64,
    pub loss_mw: f64,
    /// max_i |v_i − v_ref|, p.u.
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub voltage_deviation_sum: f64,
    pub network_loss: f64,
    pub weighted: f64,
    pub max_bus_deviation: f64,
}

pub fn objective_components(
    solution: &PowerFlowSolution,
    network: &NetworkModel,
    v_ref: f64,
) -> Result<ObjectiveComponents, PowerFlowError> {
    if !solution.converged {
        return Err(PowerFlowError::NotConverged);
    }
    let (mut deviation_sum, mut max_deviation) = (0.0f64, 0.0f64);
    for &v in &solution.v {
        let d = (v - v_ref).abs();
        deviation_sum += d;
        max_deviation = max_deviation.max(d);
    }
    let loss_pu: f64 = (0..network.branches.len())
        .map(|k| branch_loss_pu(solution, network, k))
        .sum();
    Ok(ObjectiveComponents {
        deviation_sum,
        loss_mw: loss_pu * network.base_mva,
        max_deviation,
    })
}

/// λ1·deviation + λ2·loss, loss in MW.
pub fn weighted_objective(
    components: &ObjectiveComponents,
    lambda1: f64,
    lambda2: f64,
) -> ObjectiveValue {
    ObjectiveValue {
        voltage_deviation_sum: components.deviation_sum,
        network_loss: components.loss_mw,
        weighted: lambda1 * components.deviation_sum + lambda2 * components.loss_mw,
        max_bus_deviation: components.max_deviation,
    }
}

/// CSV dump `bus,v_pu,theta_rad`.
pub fn solution_csv(solution: &PowerFlowSolution) -> String {
    let mut out = String::from("bus,v_pu,theta_rad\n");
    for (i, (v, t)) in solution.v.iter().zip(&solution.theta).enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, v, t));
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub converged: bool,
    pub iterations: usize,
    pub loss_mw: Option<f64>,
    pub deviation_sum: Option<f64>,
}

pub fn solution_summary(solution: &PowerFlowSolution, network: &NetworkModel) -> SolutionSummary {
    let comps = objective_components(solution, network, network.v_ref).ok();
    SolutionSummary {
        converged: solution.converged,
        iterations: solution.iterations,
        loss_mw: comps.map(|c| c.loss_mw),
        deviation_sum: comps.map(|c| c.deviation_sum),
    }
}

/// Net injections in per unit from per-bus PV output, load and inverter
/// reactive dispatch (all MW / MVAr).
pub fn injections_from(
    network: &NetworkModel,
    pv_p: &[f64],
    load_p: &[f64],
    load_q: &[f64],
    pv_q: &[f64],
) -> Injections {
    let n = network.n_buses();
    let mut inj = Injections::zeros(n);
    for i in 0..n {
        inj.p[i] = network.to_pu(pv_p[i] - load_p[i]);
        inj.q[i] = network.to_pu(pv_q[i] - load_q[i]);
    }
    inj
}
