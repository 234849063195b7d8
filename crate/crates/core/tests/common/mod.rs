//! Oracles shared by the integration suites. Written against the raw case
//! data only; nothing here calls into the solver under test.
#![allow(dead_code)]

use num_complex::Complex64;
use vvc_core::grid::NetworkModel;

/// Backward/forward sweep on a radial feeder. `load` holds per-bus complex
/// demand in per unit (positive = consumption); the slack is fixed at 1∠0.
/// Returns complex bus voltages and branch currents (indexed like the
/// branch list, flowing away from the slack).
pub struct Sweep {
    pub v: Vec<Complex64>,
    pub i_branch: Vec<Complex64>,
}

pub fn sweep(net: &NetworkModel, load: &[Complex64]) -> Sweep {
    let n = net.buses.len();
    let slack = net.buses.iter().position(|b| b.slack).unwrap();
    // orient the tree from the slack with a plain BFS
    let mut adj = vec![Vec::new(); n];
    for (k, br) in net.branches.iter().enumerate() {
        adj[br.from - 1].push((br.to - 1, k));
        adj[br.to - 1].push((br.from - 1, k));
    }
    let mut order = vec![slack];
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[slack] = true;
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        for &(w, k) in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some((u, k));
                order.push(w);
            }
        }
    }
    let mut v = vec![Complex64::new(1.0, 0.0); n];
    let mut i_branch = vec![Complex64::new(0.0, 0.0); net.branches.len()];
    for _ in 0..10_000 {
        let mut i_bus: Vec<Complex64> = (0..n).map(|i| (load[i] / v[i]).conj()).collect();
        for &u in order.iter().rev() {
            if let Some((p, k)) = parent[u] {
                i_branch[k] = i_bus[u];
                let carried = i_bus[u];
                i_bus[p] += carried;
            }
        }
        let mut next = v.clone();
        for &u in &order {
            if let Some((p, k)) = parent[u] {
                let br = &net.branches[k];
                next[u] = next[p] - Complex64::new(br.r, br.x) * i_branch[k];
            }
        }
        let change = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        v = next;
        if change < 1e-15 {
            break;
        }
    }
    Sweep { v, i_branch }
}

/// Per-unit complex demand at nominal load, no PV.
pub fn nominal_load(net: &NetworkModel) -> Vec<Complex64> {
    net.buses
        .iter()
        .map(|b| Complex64::new(b.pd_mw, b.qd_mvar) / net.base_mva)
        .collect()
}

/// Σ|I|²r over all branches, MW.
pub fn sweep_loss_mw(net: &NetworkModel, s: &Sweep) -> f64 {
    net.branches
        .iter()
        .zip(&s.i_branch)
        .map(|(br, i)| i.norm_sqr() * br.r)
        .sum::<f64>()
        * net.base_mva
}

/// Largest |S_calc − S_spec| over non-slack buses, recomputed from the
/// branch list. `inj` is the specified net injection (generation − load).
pub fn mismatch(net: &NetworkModel, v: &[f64], theta: &[f64], inj: &[Complex64]) -> f64 {
    let n = v.len();
    let vc: Vec<Complex64> = (0..n)
        .map(|i| Complex64::from_polar(v[i], theta[i]))
        .collect();
    let mut current = vec![Complex64::new(0.0, 0.0); n];
    for br in &net.branches {
        let (i, j) = (br.from - 1, br.to - 1);
        let y = Complex64::new(br.r, br.x).inv();
        let flow = (vc[i] - vc[j]) * y;
        current[i] += flow;
        current[j] -= flow;
    }
    (0..n)
        .filter(|&i| !net.buses[i].slack)
        .map(|i| {
            let s = vc[i] * current[i].conj();
            (s.re - inj[i].re).abs().max((s.im - inj[i].im).abs())
        })
        .fold(0.0, f64::max)
}
