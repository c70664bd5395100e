//! Independent oracles shared by the integration tests. Nothing here calls the
//! solver or the matrix-free operators.

#![allow(dead_code)]

use lnlasso::{EmpiricalGraph, Label, NodeDataset, PrimalSignal};
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub struct TestRng(ChaCha8Rng);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    pub fn unit_vector(&mut self, d: usize) -> Vec<f64> {
        loop {
            let v = self.normals(d);
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-3 {
                return v.iter().map(|x| x / n).collect();
            }
        }
    }
}

/// Connected graph: random spanning tree plus extra random edges, weights in `[lo, hi]`.
pub fn random_connected_graph(rng: &mut TestRng, n: usize, extra: usize, lo: f64, hi: f64) -> EmpiricalGraph {
    let mut pairs = std::collections::BTreeSet::new();
    for v in 1..n {
        let parent = rng.below(v);
        pairs.insert((parent, v));
    }
    for _ in 0..extra {
        let a = rng.below(n);
        let b = rng.below(n);
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let edges: Vec<_> = pairs
        .into_iter()
        .map(|(a, b)| {
            // store a random orientation to exercise normalization
            let w = rng.range(lo, hi);
            if rng.uniform() < 0.5 {
                (a, b, w)
            } else {
                (b, a, w)
            }
        })
        .collect();
    EmpiricalGraph::new(n, edges).unwrap()
}

/// The block incidence matrix written out entry by entry: for edge `e = {i, j}`,
/// block `(e, i)` is `+A I_d` when `i < j` and `-A I_d` when `i > j`.
pub fn dense_incidence(graph: &EmpiricalGraph, d: usize) -> DMatrix<f64> {
    let (n, m) = (graph.num_nodes(), graph.num_edges());
    let mut mat = DMatrix::zeros(m * d, n * d);
    for (e, edge) in graph.edges().iter().enumerate() {
        let (a, b) = (edge.lower, edge.upper);
        for node in [a, b] {
            let other = if node == a { b } else { a };
            let sign = if node < other { 1.0 } else { -1.0 };
            for k in 0..d {
                mat[(e * d + k, node * d + k)] = sign * edge.weight;
            }
        }
    }
    mat
}

pub fn random_signal(rng: &mut TestRng, blocks: usize, d: usize) -> Vec<f64> {
    rng.normals(blocks * d)
}

/// Random dataset with unit-norm features and a non-empty training set.
pub fn random_dataset(rng: &mut TestRng, n: usize, d: usize, train_prob: f64) -> NodeDataset {
    let feats: Vec<f64> = (0..n).flat_map(|_| rng.unit_vector(d)).collect();
    let labels: Vec<Option<Label>> = (0..n)
        .map(|_| {
            Some(if rng.uniform() < 0.5 {
                Label::Positive
            } else {
                Label::Negative
            })
        })
        .collect();
    let mut training: Vec<usize> = (0..n).filter(|_| rng.uniform() < train_prob).collect();
    if training.is_empty() {
        training.push(rng.below(n));
    }
    NodeDataset::new(PrimalSignal::from_vec(d, feats).unwrap(), labels, training, true).unwrap()
}

/// Signed training features `y_i x_i`.
pub fn signed_features(ds: &NodeDataset) -> Vec<(usize, Vec<f64>)> {
    ds.training_set()
        .iter()
        .map(|&i| {
            let y = ds.label(i).unwrap().sign();
            (i, ds.feature(i).iter().map(|x| y * x).collect())
        })
        .collect()
}

/// True when the signed training features positively span `R^d` (d <= 2), so
/// the objective has a minimizer: no constant direction lowers every loss.
pub fn positively_spanning(ds: &NodeDataset) -> bool {
    let xs = signed_features(ds);
    match ds.dim() {
        1 => xs.iter().any(|(_, x)| x[0] > 1e-6) && xs.iter().any(|(_, x)| x[0] < -1e-6),
        2 => {
            let mut angles: Vec<f64> = xs.iter().map(|(_, x)| x[1].atan2(x[0])).collect();
            angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut max_gap: f64 = 0.0;
            for w in angles.windows(2) {
                max_gap = max_gap.max(w[1] - w[0]);
            }
            max_gap = max_gap.max(angles[0] + 2.0 * std::f64::consts::PI - angles[angles.len() - 1]);
            max_gap < std::f64::consts::PI - 0.2
        }
        _ => unimplemented!("oracle only covers d <= 2"),
    }
}

fn log1pexp_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

fn sig(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Objective evaluated directly from the definition (risk + lambda * TV).
pub fn reference_objective(graph: &EmpiricalGraph, ds: &NodeDataset, lambda: f64, w: &[f64]) -> f64 {
    let d = ds.dim();
    let xs = signed_features(ds);
    let m = xs.len() as f64;
    let risk: f64 = xs
        .iter()
        .map(|(i, x)| {
            let z: f64 = (0..d).map(|k| w[i * d + k] * x[k]).sum();
            log1pexp_neg(z)
        })
        .sum::<f64>()
        / m;
    let tv: f64 = graph
        .edges()
        .iter()
        .map(|e| {
            (0..d)
                .map(|k| (w[e.lower * d + k] - w[e.upper * d + k]).powi(2))
                .sum::<f64>()
                .sqrt()
                * e.weight
        })
        .sum();
    risk + lambda * tv
}

/// Minimizes the objective with the TV term smoothed to
/// `A sqrt(||diff||^2 + eps^2)`, by damped Newton with continuation in `eps`
/// down to `1e-10`. Returns the unsmoothed objective at the final point,
/// which exceeds the true optimum by at most `lambda * sum(A) * 1e-10`.
pub fn newton_oracle(graph: &EmpiricalGraph, ds: &NodeDataset, lambda: f64) -> (f64, Vec<f64>) {
    let d = ds.dim();
    let n = graph.num_nodes();
    let dim = n * d;
    let xs = signed_features(ds);
    let m = xs.len() as f64;

    let smoothed = |w: &DVector<f64>, eps: f64| -> f64 {
        let mut f = 0.0;
        for (i, x) in &xs {
            let z: f64 = (0..d).map(|k| w[i * d + k] * x[k]).sum();
            f += log1pexp_neg(z) / m;
        }
        for e in graph.edges() {
            let s: f64 = (0..d).map(|k| (w[e.lower * d + k] - w[e.upper * d + k]).powi(2)).sum();
            f += lambda * e.weight * (s + eps * eps).sqrt();
        }
        f
    };

    let grad_hess = |w: &DVector<f64>, eps: f64| -> (DVector<f64>, DMatrix<f64>) {
        let mut g = DVector::zeros(dim);
        let mut h = DMatrix::zeros(dim, dim);
        for (i, x) in &xs {
            let z: f64 = (0..d).map(|k| w[i * d + k] * x[k]).sum();
            let s = sig(-z);
            for a in 0..d {
                g[i * d + a] -= x[a] * s / m;
                for b in 0..d {
                    h[(i * d + a, i * d + b)] += x[a] * x[b] * s * (1.0 - s) / m;
                }
            }
        }
        for e in graph.edges() {
            let diff: Vec<f64> = (0..d).map(|k| w[e.lower * d + k] - w[e.upper * d + k]).collect();
            let r = (diff.iter().map(|v| v * v).sum::<f64>() + eps * eps).sqrt();
            let c = lambda * e.weight;
            // local Hessian of c * r(diff): c (I / r - diff diff^T / r^3)
            for a in 0..d {
                let ga = c * diff[a] / r;
                g[e.lower * d + a] += ga;
                g[e.upper * d + a] -= ga;
                for b in 0..d {
                    let mut hab = -c * diff[a] * diff[b] / (r * r * r);
                    if a == b {
                        hab += c / r;
                    }
                    let (la, lb) = (e.lower * d + a, e.lower * d + b);
                    let (ua, ub) = (e.upper * d + a, e.upper * d + b);
                    h[(la, lb)] += hab;
                    h[(ua, ub)] += hab;
                    h[(la, ub)] -= hab;
                    h[(ua, lb)] -= hab;
                }
            }
        }
        (g, h)
    };

    let mut w = DVector::zeros(dim);
    let mut eps = 1e-1;
    while eps >= 1e-10 {
        for _ in 0..500 {
            let (g, mut h) = grad_hess(&w, eps);
            for k in 0..dim {
                h[(k, k)] += 1e-14;
            }
            let step = match h.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => h.lu().solve(&(-&g)).unwrap_or_else(|| -g.clone()),
            };
            let decrement = -g.dot(&step);
            if decrement < 1e-22 {
                break;
            }
            let f0 = smoothed(&w, eps);
            let mut t = 1.0;
            loop {
                let cand = &w + t * &step;
                if smoothed(&cand, eps) <= f0 - 0.25 * t * decrement || t < 1e-20 {
                    w = cand;
                    break;
                }
                t *= 0.5;
            }
        }
        eps /= 10.0;
    }
    let w: Vec<f64> = w.iter().copied().collect();
    (reference_objective(graph, ds, lambda, &w), w)
}

/// Fixed point of `v = w_bar + step * xt * sigmoid(-v . xt)` by bisection on
/// the scalar coefficient `t` in `v = w_bar + t xt`, `t in [0, step]`.
pub fn fixed_point_bisection(w_bar: &[f64], xt: &[f64], step: f64) -> Vec<f64> {
    let a: f64 = w_bar.iter().zip(xt).map(|(w, x)| w * x).sum();
    let s: f64 = xt.iter().map(|x| x * x).sum();
    let f = |t: f64| t - step * sig(-(a + t * s));
    let (mut lo, mut hi) = (0.0, step);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    w_bar.iter().zip(xt).map(|(w, x)| w + t * x).collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
