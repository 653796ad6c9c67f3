//! Joint (channel state × buffer level) Markov chain and its stationary law.
//!
//! States are ordered channel-state outer, buffer-level inner: index
//! `x·(M+1) + q`. A state `(x, q)` means the channel is in `x` during the
//! current slot and `q` packets were queued at the end of the previous slot.
//! Within a slot the queue is served first, then arrivals join:
//! `S_t = min(M, max(0, S_{t−1} − c) + a)`.
//!
//! The transition matrix has block form `Ξ_{x,y} = ℘_{xy}·B_x`, where `B_x` is
//! the buffer transition matrix under channel state `x`. Only the channel
//! matrix and the `B_x` are stored.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::queueing::Pmf;

#[derive(Debug, Clone)]
pub struct JointChain {
    channel: DMatrix<f64>,
    buffer: Vec<DMatrix<f64>>,
    service: Vec<Vec<(usize, f64)>>,
    arrivals: Pmf,
    capacity: usize,
}

/// Build the chain from the per-slot arrival PMF, per-channel-state service
/// count distributions, the channel transition matrix and buffer capacity `M`.
pub fn build_chain(
    arrivals: &Pmf,
    service: &[Vec<(usize, f64)>],
    channel: &DMatrix<f64>,
    capacity: usize,
) -> Result<JointChain> {
    let k = channel.nrows();
    if channel.ncols() != k {
        return Err(Error::Shape(format!("channel matrix is {}x{}", k, channel.ncols())));
    }
    if service.len() != k {
        return Err(Error::Shape(format!(
            "{} service distributions for {} channel states",
            service.len(),
            k
        )));
    }
    for (x, row) in channel.row_iter().enumerate() {
        if row.iter().any(|p| !(*p >= 0.0)) || (row.sum() - 1.0).abs() > 1e-12 {
            return Err(Error::Shape(format!("channel row {x} is not a probability vector")));
        }
    }
    for (x, s) in service.iter().enumerate() {
        let total: f64 = s.iter().map(|c| c.1).sum();
        if (total - 1.0).abs() > 1e-12 || s.iter().any(|c| c.1 < 0.0) {
            return Err(Error::Shape(format!("service distribution {x} is not a PMF")));
        }
    }
    let m = capacity;
    let arr = arrivals.probs();
    let buffer = service
        .iter()
        .map(|counts| {
            let mut b = DMatrix::<f64>::zeros(m + 1, m + 1);
            for q in 0..=m {
                for &(c, pc) in counts {
                    if pc == 0.0 {
                        continue;
                    }
                    let base = q.saturating_sub(c);
                    for (a, &pa) in arr.iter().enumerate() {
                        if pa == 0.0 {
                            continue;
                        }
                        b[(q, (base + a).min(m))] += pc * pa;
                    }
                }
            }
            b
        })
        .collect();
    Ok(JointChain {
        channel: channel.clone(),
        buffer,
        service: service.to_vec(),
        arrivals: arrivals.clone(),
        capacity,
    })
}

impl JointChain {
    pub fn n_channel(&self) -> usize {
        self.channel.nrows()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn levels(&self) -> usize {
        self.capacity + 1
    }

    pub fn len(&self) -> usize {
        self.n_channel() * self.levels()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, x: usize, q: usize) -> usize {
        x * self.levels() + q
    }

    /// `(channel state, buffer level)` of a flat index.
    pub fn state(&self, i: usize) -> (usize, usize) {
        (i / self.levels(), i % self.levels())
    }

    pub fn channel(&self) -> &DMatrix<f64> {
        &self.channel
    }

    pub fn buffer_block(&self, x: usize) -> &DMatrix<f64> {
        &self.buffer[x]
    }

    pub fn service(&self, x: usize) -> &[(usize, f64)] {
        &self.service[x]
    }

    pub fn arrivals(&self) -> &Pmf {
        &self.arrivals
    }

    /// Full dense transition matrix `Υ`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let l = self.levels();
        let mut u = DMatrix::<f64>::zeros(n, n);
        for x in 0..self.n_channel() {
            for y in 0..self.n_channel() {
                let p = self.channel[(x, y)];
                if p == 0.0 {
                    continue;
                }
                let mut view = u.view_mut((x * l, y * l), (l, l));
                view.copy_from(&(&self.buffer[x] * p));
            }
        }
        u
    }

    /// `π·Υ` using the block structure.
    pub fn step(&self, pi: &[f64]) -> Vec<f64> {
        let l = self.levels();
        let k = self.n_channel();
        let mut out = vec![0.0; pi.len()];
        for x in 0..k {
            let px = DVector::from_column_slice(&pi[x * l..(x + 1) * l]);
            let v = self.buffer[x].tr_mul(&px);
            for y in 0..k {
                let p = self.channel[(x, y)];
                if p == 0.0 {
                    continue;
                }
                for (o, vi) in out[y * l..(y + 1) * l].iter_mut().zip(v.iter()) {
                    *o += p * vi;
                }
            }
        }
        out
    }

    fn channel_is_tridiagonal(&self) -> bool {
        let k = self.n_channel();
        (0..k).all(|x| (0..k).all(|y| x.abs_diff(y) <= 1 || self.channel[(x, y)] == 0.0))
    }

    fn successors(&self, i: usize) -> Vec<usize> {
        let (x, q) = self.state(i);
        let mut out = Vec::new();
        for y in 0..self.n_channel() {
            if self.channel[(x, y)] == 0.0 {
                continue;
            }
            for l in 0..self.levels() {
                if self.buffer[x][(q, l)] > 0.0 {
                    out.push(self.index(y, l));
                }
            }
        }
        out
    }
}

/// Result of the strong-connectivity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Irreducibility {
    pub irreducible: bool,
    /// Every state reaches state 0, so there is exactly one closed class
    /// and a unique stationary law (states outside it are transient).
    pub unichain: bool,
    /// `(from, to)` with `to` unreachable from `from`, when reducible.
    pub witness: Option<(usize, usize)>,
}

pub fn is_irreducible(chain: &JointChain) -> Irreducibility {
    let n = chain.len();
    let mut forward: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut backward: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in chain.successors(i) {
            forward[i].push(j);
            backward[j].push(i);
        }
    }
    let reach = |adj: &Vec<Vec<usize>>| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    };
    if let Some(j) = reach(&backward).iter().position(|s| !s) {
        return Irreducibility {
            irreducible: false,
            unichain: false,
            witness: Some((j, 0)),
        };
    }
    if let Some(j) = reach(&forward).iter().position(|s| !s) {
        return Irreducibility {
            irreducible: false,
            unichain: true,
            witness: Some((0, j)),
        };
    }
    Irreducibility {
        irreducible: true,
        unichain: true,
        witness: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Dense,
    BlockReduction,
    Power,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
    /// `‖πΥ − π‖∞`.
    pub residual: f64,
    pub method: SolveMethod,
}

const RESIDUAL_TOL: f64 = 1e-10;

fn finish(chain: &JointChain, mut pi: Vec<f64>, method: SolveMethod) -> StationaryDistribution {
    for p in pi.iter_mut() {
        // round-off can leave tiny negatives in far tails
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    let residual = chain
        .step(&pi)
        .iter()
        .zip(&pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    StationaryDistribution { pi, residual, method }
}

/// Direct solve of `(Υᵀ − I)π = 0` with the last equation replaced by `Σπ = 1`.
pub fn stationary_dense(chain: &JointChain) -> Result<StationaryDistribution> {
    let n = chain.len();
    let mut a = chain.matrix().transpose();
    for i in 0..n {
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let x = a.lu().solve(&rhs).ok_or(Error::Numeric {
        what: "dense stationary solve",
        residual: f64::INFINITY,
    })?;
    Ok(finish(chain, x.iter().copied().collect(), SolveMethod::Dense))
}

/// Linear level reduction over channel states; requires a tridiagonal channel matrix.
pub fn stationary_block(chain: &JointChain) -> Result<StationaryDistribution> {
    if !chain.channel_is_tridiagonal() {
        return Err(Error::Shape("block reduction needs a tridiagonal channel matrix".into()));
    }
    let k = chain.n_channel();
    let l = chain.levels();
    let p = &chain.channel;
    let identity = DMatrix::<f64>::identity(l, l);
    // G = I − Υ; blocks G_{x,y} = δ_{xy} I − ℘_{xy} B_x.
    let g = |x: usize, y: usize| -> DMatrix<f64> {
        let blk = &chain.buffer[x] * (-p[(x, y)]);
        if x == y {
            blk + &identity
        } else {
            blk
        }
    };
    let singular = || Error::Numeric {
        what: "block stationary solve",
        residual: f64::INFINITY,
    };
    // π_{y−1} = π_y R_y, U_y = G_yy + R_y G_{y−1,y}
    let mut rs: Vec<DMatrix<f64>> = Vec::with_capacity(k);
    let mut u = g(0, 0);
    for y in 1..k {
        let u_inv = u.clone().try_inverse().ok_or_else(singular)?;
        let r = -(g(y, y - 1) * u_inv);
        u = g(y, y) + &r * g(y - 1, y);
        rs.push(r);
    }
    // π_{k−1} U = 0: solve Uᵀ z = 0 with one equation replaced by normalization.
    let mut a = u.transpose();
    for j in 0..l {
        a[(l - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(l);
    rhs[l - 1] = 1.0;
    let last = a.lu().solve(&rhs).ok_or_else(singular)?;
    let mut levels = vec![last.transpose()];
    for r in rs.iter().rev() {
        let next = levels.last().unwrap() * r;
        levels.push(next);
    }
    levels.reverse();
    let pi: Vec<f64> = levels.iter().flat_map(|v| v.iter().copied()).collect();
    Ok(finish(chain, pi, SolveMethod::BlockReduction))
}

/// Power iteration from the uniform vector until `‖πΥ − π‖∞ ≤ tol`.
pub fn stationary_power(chain: &JointChain, tol: f64, max_iter: usize) -> Result<StationaryDistribution> {
    let n = chain.len();
    let mut pi = vec![1.0 / n as f64; n];
    let mut diff = f64::INFINITY;
    for _ in 0..max_iter {
        let next = chain.step(&pi);
        diff = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        pi = next;
        if diff <= tol {
            return Ok(finish(chain, pi, SolveMethod::Power));
        }
    }
    Err(Error::Numeric {
        what: "power iteration",
        residual: diff,
    })
}

fn acceptable(s: &StationaryDistribution) -> bool {
    s.residual <= RESIDUAL_TOL && s.pi.iter().all(|p| p.is_finite())
}

/// Stationary distribution; block reduction (or a dense solve for a
/// non-tridiagonal channel) with power-iteration fallback.
pub fn stationary(chain: &JointChain) -> Result<StationaryDistribution> {
    // Levels the service always outpaces are transient and simply get zero
    // mass; only a second closed class makes the law ambiguous.
    let check = is_irreducible(chain);
    if !check.unichain {
        let (from, to) = check.witness.unwrap_or((0, 0));
        return Err(Error::Reducible { from, to });
    }
    if chain.channel_is_tridiagonal() {
        // the level recursion loses accuracy when some levels are (nearly) transient
        if let Ok(s) = stationary_block(chain) {
            if acceptable(&s) {
                return Ok(s);
            }
            log::debug!("block reduction residual {:e}; trying a dense solve", s.residual);
        }
    }
    match stationary_dense(chain) {
        Ok(s) if acceptable(&s) => Ok(s),
        _ => {
            log::warn!("direct stationary solve inaccurate, falling back to power iteration");
            let s = stationary_power(chain, 1e-12, 1_000_000)?;
            if acceptable(&s) {
                Ok(s)
            } else {
                Err(Error::Numeric {
                    what: "stationary distribution",
                    residual: s.residual,
                })
            }
        }
    }
}

/// `(buffer-level marginal, channel-state marginal)`.
pub fn marginals(pi: &[f64], chain: &JointChain) -> (Vec<f64>, Vec<f64>) {
    let mut buffer = vec![0.0; chain.levels()];
    let mut channel = vec![0.0; chain.n_channel()];
    for (i, p) in pi.iter().enumerate() {
        let (x, q) = chain.state(i);
        buffer[q] += p;
        channel[x] += p;
    }
    (buffer, channel)
}

/// Expected per-slot `(departures, drops)` under `π`.
pub fn flow(pi: &[f64], chain: &JointChain) -> (f64, f64) {
    let m = chain.capacity();
    let arr = chain.arrivals().probs();
    let mut departures = 0.0;
    let mut drops = 0.0;
    for (i, &p) in pi.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let (x, q) = chain.state(i);
        for &(c, pc) in chain.service(x) {
            let served = q.min(c);
            departures += p * pc * served as f64;
            let base = q - served;
            for (a, &pa) in arr.iter().enumerate() {
                if base + a > m {
                    drops += p * pc * pa * (base + a - m) as f64;
                }
            }
        }
    }
    (departures, drops)
}

/// Distribution of packets served per slot under `π`.
pub fn departure_pmf(pi: &[f64], chain: &JointChain) -> Result<Pmf> {
    let max_c = (0..chain.n_channel())
        .flat_map(|x| chain.service(x).iter().map(|c| c.0))
        .max()
        .unwrap_or(0)
        .min(chain.capacity());
    let mut d = vec![0.0; max_c + 1];
    for (i, &p) in pi.iter().enumerate() {
        let (x, q) = chain.state(i);
        for &(c, pc) in chain.service(x) {
            d[q.min(c)] += p * pc;
        }
    }
    Pmf::new(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_state(p: [[f64; 2]; 2]) -> JointChain {
        // buffer capacity 0 turns the joint chain into the channel chain
        let ch = DMatrix::from_row_slice(2, 2, &[p[0][0], p[0][1], p[1][0], p[1][1]]);
        build_chain(&Pmf::point(0), &[vec![(0, 1.0)], vec![(0, 1.0)]], &ch, 0).unwrap()
    }

    #[test]
    fn frozen_system_is_identity() {
        let ch = DMatrix::identity(2, 2);
        let c = build_chain(&Pmf::point(0), &[vec![(0, 1.0)], vec![(0, 1.0)]], &ch, 3).unwrap();
        assert_eq!(c.matrix(), DMatrix::identity(8, 8));
        let r = is_irreducible(&c);
        assert!(!r.irreducible);
        assert!(matches!(stationary(&c), Err(Error::Reducible { .. })));
    }

    #[test]
    fn two_level_hand_solve() {
        let ch = DMatrix::identity(1, 1);
        let arr = Pmf::new(vec![0.5, 0.5]).unwrap();
        let c = build_chain(&arr, &[vec![(1, 1.0)]], &ch, 1).unwrap();
        let s = stationary_dense(&c).unwrap();
        assert_abs_diff_eq!(s.pi[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(s.pi[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn two_state_balance() {
        let c = two_state([[0.9, 0.1], [0.5, 0.5]]);
        for s in [stationary_dense(&c).unwrap(), stationary_block(&c).unwrap()] {
            assert_abs_diff_eq!(s.pi[0], 5.0 / 6.0, epsilon = 1e-14);
            assert_abs_diff_eq!(s.pi[1], 1.0 / 6.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn doubly_stochastic_is_uniform() {
        let ch = DMatrix::from_row_slice(3, 3, &[0.2, 0.5, 0.3, 0.3, 0.2, 0.5, 0.5, 0.3, 0.2]);
        let c = build_chain(&Pmf::point(0), &vec![vec![(0, 1.0)]; 3], &ch, 0).unwrap();
        let s = stationary(&c).unwrap();
        assert_eq!(s.method, SolveMethod::Dense);
        for p in s.pi {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn transient_levels_get_zero_mass() {
        // at most one arrival, always one served: level 2 is never revisited
        let ch = DMatrix::identity(1, 1);
        let arr = Pmf::new(vec![0.5, 0.5]).unwrap();
        let c = build_chain(&arr, &[vec![(1, 1.0)]], &ch, 2).unwrap();
        let check = is_irreducible(&c);
        assert!(!check.irreducible && check.unichain);
        let s = stationary(&c).unwrap();
        assert_abs_diff_eq!(s.pi[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(s.pi[1], 0.5, epsilon = 1e-14);
        assert_eq!(s.pi[2], 0.0);
    }

    #[test]
    fn disconnected_channel_gives_witness() {
        let ch = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let arr = Pmf::new(vec![0.5, 0.5]).unwrap();
        let c = build_chain(&arr, &[vec![(1, 1.0)], vec![(1, 1.0)]], &ch, 1).unwrap();
        let r = is_irreducible(&c);
        assert!(!r.irreducible);
        let (from, to) = r.witness.unwrap();
        assert_ne!(c.state(from).0, c.state(to).0);
    }

    #[test]
    fn shape_errors() {
        let ch = DMatrix::identity(2, 2);
        assert!(matches!(
            build_chain(&Pmf::point(0), &[vec![(0, 1.0)]], &ch, 1),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn marginal_examples() {
        let ch = DMatrix::identity(2, 2);
        let c = build_chain(&Pmf::point(0), &[vec![(0, 1.0)], vec![(0, 1.0)]], &ch, 1).unwrap();
        let (b, x) = marginals(&[0.25; 4], &c);
        assert_eq!(b, vec![0.5, 0.5]);
        assert_eq!(x, vec![0.5, 0.5]);
        let (b, x) = marginals(&[0.0, 0.0, 1.0, 0.0], &c);
        assert_eq!(b, vec![1.0, 0.0]);
        assert_eq!(x, vec![0.0, 1.0]);
    }

    fn random_chain(seed: &[f64], m: usize) -> JointChain {
        let k = 3;
        let up = 0.05 + 0.2 * seed[0];
        let down = 0.05 + 0.2 * seed[1];
        let mut ch = DMatrix::<f64>::zeros(k, k);
        for x in 0..k {
            if x + 1 < k {
                ch[(x, x + 1)] = up;
            }
            if x > 0 {
                ch[(x, x - 1)] = down;
            }
            ch[(x, x)] = 1.0 - ch.row(x).sum();
        }
        let lam = 0.3 + 1.5 * seed[2];
        let arr = crate::queueing::truncated_poisson(lam, 6);
        let service: Vec<_> = (0..k)
            .map(|x| crate::queueing::service_counts(x as f64 * (0.5 + 1.5 * seed[3]), m))
            .collect();
        build_chain(&arr, &service, &ch, m).unwrap()
    }

    proptest! {
        #[test]
        fn rows_are_stochastic_and_solvers_agree(seed in proptest::collection::vec(0.0f64..1.0, 4), m in 1usize..12) {
            let c = random_chain(&seed, m);
            let u = c.matrix();
            for r in u.row_iter() {
                prop_assert!((r.sum() - 1.0).abs() < 1e-12);
            }
            let a = stationary_dense(&c).unwrap();
            let b = stationary_block(&c).unwrap();
            prop_assert!(a.residual < 1e-12 && b.residual < 1e-12);
            for (x, y) in a.pi.iter().zip(&b.pi) {
                prop_assert!((x - y).abs() < 1e-11);
            }
            // flow consistency: arrivals − drops = departures
            let (dep, drop) = flow(&b.pi, &c);
            prop_assert!((c.arrivals().mean() - drop - dep).abs() < 1e-9);
            let d = departure_pmf(&b.pi, &c).unwrap();
            prop_assert!((d.mean() - dep).abs() < 1e-9);
        }
    }
}
