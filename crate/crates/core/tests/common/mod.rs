//! Reference computations used as test oracles. None of these call the
//! library's own evaluation, projection or minimizer code paths.

#![allow(dead_code)]

use crl_mnp::geometry::MeasurementVec;
use crl_mnp::mdp::{make_gridworld, make_random_mdp, make_rps, make_worstcase, DeterministicPolicy, VectorMdp};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn v(xs: &[f64]) -> MeasurementVec {
    MeasurementVec::from_row_slice(xs)
}

/// Policy measurement by backward recursion (finite horizon) or a dense
/// solve of the value equations `(I - gamma P) V = c` (discounted).
pub fn reference_measurement(mdp: &VectorMdp, policy: &DeterministicPolicy) -> Vec<f64> {
    let n = mdp.num_states();
    let m = mdp.measurement_dim();
    let gamma = mdp.discount();
    let value: Vec<Vec<f64>> = match mdp.horizon() {
        Some(h) => {
            let mut value = vec![vec![0.0; m]; n];
            for _ in 0..h {
                value = (0..n)
                    .map(|s| {
                        let mut out = vec![0.0; m];
                        if mdp.is_terminal(s) {
                            return out;
                        }
                        for o in mdp.outcomes(s, policy.action(s)) {
                            for k in 0..m {
                                out[k] += o.prob * (o.measurement[k] + gamma * value[o.next][k]);
                            }
                        }
                        out
                    })
                    .collect();
            }
            value
        }
        None => {
            let mut lhs = DMatrix::<f64>::identity(n, n);
            let mut rhs = DMatrix::<f64>::zeros(n, m);
            for s in (0..n).filter(|&s| !mdp.is_terminal(s)) {
                for o in mdp.outcomes(s, policy.action(s)) {
                    if !mdp.is_terminal(o.next) {
                        lhs[(s, o.next)] -= gamma * o.prob;
                    }
                    for k in 0..m {
                        rhs[(s, k)] += o.prob * o.measurement[k];
                    }
                }
            }
            let v = lhs.lu().solve(&rhs).expect("discounted value equations are nonsingular");
            (0..n).map(|s| (0..m).map(|k| v[(s, k)]).collect()).collect()
        }
    };
    let mut j = vec![0.0; m];
    for (s, &p) in mdp.initial().iter().enumerate() {
        for k in 0..m {
            j[k] += p * value[s][k];
        }
    }
    j
}

/// Every deterministic policy with its reference measurement.
pub fn enumerate(mdp: &VectorMdp) -> Vec<(DeterministicPolicy, Vec<f64>)> {
    mdp.enumerate_policies()
        .map(|p| {
            let j = reference_measurement(mdp, &p);
            (p, j)
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `max ||J(pi)||` over enumerated policies.
pub fn q_constant(points: &[(DeterministicPolicy, Vec<f64>)]) -> f64 {
    points.iter().map(|(_, j)| dot(j, j).sqrt()).fold(0.0, f64::max)
}

/// Closest point of the affine hull to `origin` from the KKT system
/// `[2 P^T P, 1; 1^T, 0] [alpha; nu] = [2 P^T origin; 1]`, solved by dense LU.
pub fn kkt_affine_minimizer(points: &[Vec<f64>], origin: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = points.len();
    let m = origin.len();
    let p = DMatrix::from_fn(m, k, |r, c| points[c][r]);
    let o = DVector::from_column_slice(origin);
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    kkt.view_mut((0, 0), (k, k)).copy_from(&(p.transpose() * &p * 2.0));
    for i in 0..k {
        kkt[(i, k)] = 1.0;
        kkt[(k, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs.rows_mut(0, k).copy_from(&(p.transpose() * &o * 2.0));
    rhs[k] = 1.0;
    let sol = kkt.lu().solve(&rhs).expect("affinely independent reference instance");
    let alpha: Vec<f64> = sol.rows(0, k).iter().copied().collect();
    let y = &p * DVector::from_column_slice(&alpha);
    (y.iter().copied().collect(), alpha)
}

pub struct RandomInstance {
    pub label: String,
    pub mdp: VectorMdp,
    pub target_point: Vec<f64>,
}

/// A small random MDP with a feasible singleton target at a random convex
/// combination of enumerated policy measurements. Instance `i` of `seed` is
/// independent of every other index.
pub fn random_instance(seed: u64, i: u64) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    let n = rng.gen_range(2..=8);
    let a = rng.gen_range(2..=4);
    let m = rng.gen_range(1..=3);
    let mdp = make_random_mdp(n, a, m, 0.9, rng.gen()).unwrap();
    let js = enumerate(&mdp);
    let k = rng.gen_range(1..=4);
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut point = vec![0.0; m];
    for w in &weights {
        let (_, j) = &js[rng.gen_range(0..js.len())];
        for d in 0..m {
            point[d] += w / total * j[d];
        }
    }
    RandomInstance {
        label: format!("random#{i}(n={n},a={a},m={m})"),
        mdp,
        target_point: point,
    }
}

/// The fixed sweep of `count` random instances.
pub fn random_sweep(count: usize, seed: u64) -> Vec<RandomInstance> {
    (0..count as u64).map(|i| random_instance(seed, i)).collect()
}

/// Random points in general position for a bandit, and a target point at a
/// random convex combination of some of them.
pub fn bandit_instance(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(1..=4);
    let k = rng.gen_range(m + 1..=2 * m + 3);
    let points: Vec<Vec<f64>> = (0..k).map(|_| (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
    let used = rng.gen_range(1..=k.min(m + 1));
    let weights: Vec<f64> = (0..used).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut target = vec![0.0; m];
    for w in &weights {
        let p = &points[rng.gen_range(0..k)];
        for d in 0..m {
            target[d] += w / total * p[d];
        }
    }
    (points, target)
}

/// One major cycle of the Wolfe transcription.
pub struct WolfeStep {
    pub size: usize,
    pub iterate: Vec<f64>,
    pub chosen: usize,
}

/// Wolfe's minimum-norm-point method over the finite set `points`, with the
/// norm measured from `target` instead of the origin. The oracle returns the
/// lowest index minimizing `(x - target)^T s`. Iteration starts at zero and
/// stops when `(x - target)^T (x - s) <= eps` (from the second cycle) or
/// `|x - target| <= eps`.
pub fn wolfe_transcription(points: &[Vec<f64>], target: &[f64], cycles: usize, corral_tol: f64, eps: f64) -> Vec<WolfeStep> {
    let p: Vec<MeasurementVec> = points.iter().map(|q| v(q)).collect();
    let origin = v(target);
    let mut x = MeasurementVec::zeros(target.len());
    let mut active: Vec<(usize, f64)> = Vec::new();
    let mut steps = Vec::new();

    for t in 1..=cycles {
        let dir = &x - &origin;
        let score = |i: usize| -> f64 { -p[i].iter().zip(dir.iter()).map(|(c, l)| c * l).sum::<f64>() };
        let mut best = 0;
        for i in 1..p.len() {
            if score(i) > score(best) {
                best = i;
            }
        }
        if t >= 2 && dir.dot(&(&x - &p[best])) <= eps {
            break;
        }
        active.push((best, 0.0));
        loop {
            let set: Vec<MeasurementVec> = active.iter().map(|&(i, _)| p[i].clone()).collect();
            let solved = crl_mnp::geometry::affine_minimizer(&set, &origin).unwrap();
            let mut alpha = solved.weights;
            if alpha.iter().all(|&a| a > corral_tol) {
                for (entry, a) in active.iter_mut().zip(&alpha) {
                    entry.1 = *a;
                }
                x = solved.minimizer;
                break;
            }
            for a in alpha.iter_mut() {
                if *a <= corral_tol {
                    *a = a.min(0.0);
                }
            }
            let mut theta = f64::INFINITY;
            for (&(_, mu), &a) in active.iter().zip(&alpha) {
                if a <= 0.0 && mu - a > 0.0 {
                    theta = theta.min(mu / (mu - a));
                }
            }
            x = &solved.minimizer * theta + &x * (1.0 - theta);
            for (entry, &a) in active.iter_mut().zip(&alpha) {
                let gap = entry.1 - a;
                let blocking = a <= 0.0 && gap > 0.0 && entry.1 / gap == theta;
                entry.1 = if blocking { 0.0 } else { theta * a + (1.0 - theta) * entry.1 };
            }
            active.retain(|e| e.1 > 0.0);
        }
        steps.push(WolfeStep {
            size: active.len(),
            iterate: x.iter().copied().collect(),
            chosen: best,
        });
        if (&x - &origin).norm() <= eps {
            break;
        }
    }
    steps
}

/// 64 directions: the zero vector, the signed axes, the signed all-ones
/// vectors, then uniform draws from [-3, 3).
pub fn probe_set(m: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(64 + m as u64);
    let mut probes = vec![vec![0.0; m]];
    for k in 0..m {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; m];
            e[k] = sign;
            probes.push(e);
        }
    }
    probes.push(vec![1.0; m]);
    probes.push(vec![-1.0; m]);
    while probes.len() < 64 {
        probes.push((0..m).map(|_| rng.gen_range(-3.0..3.0)).collect());
    }
    probes
}

pub fn small_gridworlds() -> Vec<(&'static str, VectorMdp)> {
    [("S.R\n..G", 12), ("S#.\n.RG", 10), ("SR.\nR.R\n..G", 14)]
        .into_iter()
        .map(|(map, cap)| (map, make_gridworld(map, 1.0, cap).unwrap().mdp))
        .collect()
}

pub fn enumerable_environments() -> Vec<(String, VectorMdp)> {
    let mut envs: Vec<(String, VectorMdp)> = (1..=3).map(|m| (format!("worstcase({m})"), make_worstcase(m).unwrap())).collect();
    envs.push(("rps(1)".into(), make_rps(1).unwrap()));
    envs.push(("rps(3)".into(), make_rps(3).unwrap()));
    for (map, mdp) in small_gridworlds() {
        assert!(mdp.num_states() <= 20);
        envs.push((format!("grid {map:?}"), mdp));
    }
    envs
}
