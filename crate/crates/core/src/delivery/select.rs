use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryDecision<T> {
    /// `bits[i]` is true when ladder `i` is sent.
    pub bits: Vec<bool>,
    pub cost: T,
    /// Set when the greedy fallback produced the decision.
    pub approximate: bool,
}

impl<T> DeliveryDecision<T> {
    pub fn delivered(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// Inputs for one request in one state bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryProblem<T> {
    /// Probability that each ladder is the client's best choice.
    pub p: Vec<T>,
    /// `replace[i][j]`: loss when the client wanted `i` but plays `j`.
    pub replace: Vec<Vec<T>>,
    pub deliver: Vec<T>,
}

impl<T: Scalar> DeliveryProblem<T> {
    pub fn k(&self) -> usize {
        self.p.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.p.len();
        if k == 0 {
            return Err(Error::input("no ladders"));
        }
        if self.replace.len() != k || self.replace.iter().any(|r| r.len() != k) || self.deliver.len() != k {
            return Err(Error::input("replace matrix and deliver costs must be K x K and K"));
        }
        for i in 0..k {
            if self.replace[i][i] != T::zero() {
                return Err(Error::input(format!("replace_cost[{i}][{i}] must be 0")));
            }
            if self.replace[i].iter().any(|c| !(*c >= T::zero())) {
                return Err(Error::input("replace costs must be >= 0"));
            }
        }
        if self.p.iter().any(|v| !(*v >= T::zero())) || self.deliver.iter().any(|v| !(*v >= T::zero())) {
            return Err(Error::input("probabilities and deliver costs must be >= 0"));
        }
        Ok(())
    }

    /// `Σ_i p_i · min_{j delivered} replace_i(j) + Σ_i d_i · deliver_i`,
    /// summed in index order. Infinite for the empty set.
    pub fn cost(&self, bits: &[bool]) -> T {
        if !bits.iter().any(|b| *b) {
            return T::infinity();
        }
        let mut c = T::zero();
        for (i, row) in self.replace.iter().enumerate() {
            let best = row
                .iter()
                .zip(bits)
                .filter(|(_, d)| **d)
                .map(|(v, _)| *v)
                .fold(T::infinity(), |a, b| a.min(b));
            c = c + self.p[i] * best;
        }
        for (d, cost) in bits.iter().zip(&self.deliver) {
            if *d {
                c = c + *cost;
            }
        }
        c
    }
}

/// Strict preference: lower cost, then fewer ladders, then lexicographically
/// smaller bit vector (`false < true`).
fn better<T: Scalar>(a: (T, &[bool]), b: (T, &[bool])) -> bool {
    if a.0 != b.0 {
        return a.0 < b.0;
    }
    let (ca, cb) = (a.1.iter().filter(|x| **x).count(), b.1.iter().filter(|x| **x).count());
    if ca != cb {
        return ca < cb;
    }
    a.1 < b.1
}

pub const EXACT_LADDER_CAP: usize = 30;

/// Exact subset search with branch-and-bound up to [`EXACT_LADDER_CAP`]
/// ladders; greedy marginal-gain search above it.
pub fn optimal_delivery<T: Scalar>(problem: &DeliveryProblem<T>) -> Result<DeliveryDecision<T>> {
    problem.validate()?;
    let k = problem.k();
    if k > EXACT_LADDER_CAP {
        return Ok(greedy_delivery(problem));
    }
    let mut best_bits = vec![true; k];
    let mut best_cost = problem.cost(&best_bits);
    let mut bits = vec![false; k];
    let eps = T::lit(1e-12);
    search(problem, 0, T::zero(), &mut bits, &mut best_bits, &mut best_cost, eps);
    Ok(DeliveryDecision {
        bits: best_bits,
        cost: best_cost,
        approximate: false,
    })
}

fn lower_bound<T: Scalar>(problem: &DeliveryProblem<T>, depth: usize, bits: &[bool], partial_deliver: T) -> T {
    // the final set lies inside decided-in ∪ undecided
    let mut lb = partial_deliver;
    for (i, row) in problem.replace.iter().enumerate() {
        let m = row
            .iter()
            .enumerate()
            .filter(|(j, _)| *j >= depth || bits[*j])
            .map(|(_, v)| *v)
            .fold(T::infinity(), |a, b| a.min(b));
        lb = lb + problem.p[i] * m;
    }
    lb
}

fn search<T: Scalar>(
    problem: &DeliveryProblem<T>,
    depth: usize,
    partial_deliver: T,
    bits: &mut Vec<bool>,
    best_bits: &mut Vec<bool>,
    best_cost: &mut T,
    eps: T,
) {
    let k = problem.k();
    if partial_deliver > *best_cost + eps {
        return;
    }
    if depth == k {
        let c = problem.cost(bits);
        if better((c, bits), (*best_cost, best_bits)) {
            *best_cost = c;
            best_bits.clone_from(bits);
        }
        return;
    }
    let lb = lower_bound(problem, depth, bits, partial_deliver);
    if lb > *best_cost + eps * (T::one() + best_cost.abs()) {
        return;
    }
    // exclude first so smaller sets are met early
    bits[depth] = false;
    search(problem, depth + 1, partial_deliver, bits, best_bits, best_cost, eps);
    bits[depth] = true;
    search(problem, depth + 1, partial_deliver + problem.deliver[depth], bits, best_bits, best_cost, eps);
    bits[depth] = false;
}

/// Best single ladder, then repeatedly add the ladder with the largest cost
/// reduction until none helps.
pub fn greedy_delivery<T: Scalar>(problem: &DeliveryProblem<T>) -> DeliveryDecision<T> {
    let k = problem.k();
    let mut bits = vec![false; k];
    let mut cost = T::infinity();
    loop {
        let mut step: Option<(usize, T)> = None;
        for j in 0..k {
            if bits[j] {
                continue;
            }
            bits[j] = true;
            let c = problem.cost(&bits);
            bits[j] = false;
            if c < cost && step.is_none_or(|(_, sc)| c < sc) {
                step = Some((j, c));
            }
        }
        match step {
            Some((j, c)) => {
                bits[j] = true;
                cost = c;
            }
            None => break,
        }
    }
    DeliveryDecision {
        bits,
        cost,
        approximate: true,
    }
}

/// Transmission and parsing overhead of one ladder's metadata:
/// `meta_bytes / (α_dev · α_net) · scale`.
pub fn deliver_cost<T: Scalar>(meta_bytes: T, alpha_dev: T, alpha_net: T, scale: T) -> Result<T> {
    if !(alpha_dev > T::zero()) || !(alpha_net > T::zero()) {
        return Err(Error::param("device and network factors must be > 0"));
    }
    Ok(meta_bytes / alpha_dev / alpha_net * scale)
}

/// Default substitution loss: weighted absolute quality gap plus weighted
/// bitrate gap in Mbps. Zero on the diagonal.
pub fn default_replace_cost<T: Scalar>(quality: &[T], bitrate_kbps: &[T], w_quality: T, w_bitrate: T) -> Vec<Vec<T>> {
    let k = quality.len();
    let mbps = T::lit(1000.0);
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    w_quality * (quality[i] - quality[j]).abs()
                        + w_bitrate * (bitrate_kbps[i] - bitrate_kbps[j]).abs() / mbps
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(rng: &mut ChaCha8Rng, k: usize) -> DeliveryProblem<f64> {
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let replace = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 0.0 } else { rng.random_range(0.0..10.0) }).collect())
            .collect();
        DeliveryProblem {
            p: raw.iter().map(|v| v / s).collect(),
            replace,
            deliver: (0..k).map(|_| rng.random_range(0.0..3.0)).collect(),
        }
    }

    fn brute(problem: &DeliveryProblem<f64>) -> (Vec<bool>, f64) {
        let k = problem.k();
        let mut best: Option<(Vec<bool>, f64)> = None;
        for mask in 1u32..(1 << k) {
            let bits: Vec<bool> = (0..k).map(|i| mask >> i & 1 == 1).collect();
            let c = problem.cost(&bits);
            let replace = match &best {
                None => true,
                Some((bb, bc)) => better((c, &bits), (*bc, bb)),
            };
            if replace {
                best = Some((bits, c));
            }
        }
        best.unwrap()
    }

    #[test]
    fn free_delivery_sends_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = random_problem(&mut rng, 6);
        p.deliver = vec![0.0; 6];
        let d = optimal_delivery(&p).unwrap();
        assert_eq!(d.bits, vec![true; 6]);
        assert_eq!(d.cost, 0.0);
    }

    #[test]
    fn single_ladder() {
        let p = DeliveryProblem { p: vec![1.0], replace: vec![vec![0.0]], deliver: vec![5.0] };
        let d = optimal_delivery(&p).unwrap();
        assert_eq!((d.bits, d.cost), (vec![true], 5.0));
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let k = rng.random_range(1..=8);
            let p = random_problem(&mut rng, k);
            let d = optimal_delivery(&p).unwrap();
            let (bits, cost) = brute(&p);
            assert_eq!(d.bits, bits);
            assert_eq!(d.cost, cost);
        }
    }

    #[test]
    fn greedy_fallback_above_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_problem(&mut rng, 40);
        let d = optimal_delivery(&p).unwrap();
        assert!(d.approximate);
        assert!(d.count() >= 1);
        assert!(d.cost <= p.cost(&[true; 40]) + 1e-9);
    }

    #[test]
    fn works_in_f32() {
        let p = DeliveryProblem::<f32> {
            p: vec![0.5, 0.5],
            replace: vec![vec![0.0, 4.0], vec![1.0, 0.0]],
            deliver: vec![1.0, 1.0],
        };
        let d = optimal_delivery(&p).unwrap();
        // {0}: 0.5·1 + 1 = 1.5; {1}: 0.5·4 + 1 = 3; both: 2
        assert_eq!(d.bits, vec![true, false]);
        assert_eq!(d.cost, 1.5);
    }

    #[test]
    fn deliver_cost_formula() {
        assert_eq!(deliver_cost(1000.0, 1.0, 1.0, 0.01).unwrap(), 10.0);
        let a = deliver_cost(1000.0, 0.5, 1.0, 1.0).unwrap();
        let b = deliver_cost(1000.0, 0.5, 2.0, 1.0).unwrap();
        assert_eq!(a, 2.0 * b);
        assert!(deliver_cost(1000.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn rejects_nonzero_diagonal() {
        let p = DeliveryProblem { p: vec![1.0], replace: vec![vec![1.0]], deliver: vec![0.0] };
        assert!(optimal_delivery(&p).is_err());
    }

    proptest! {
        #[test]
        fn optimum_dominates_simple_decisions(seed in 0u64..1000, k in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_problem(&mut rng, k);
            let d = optimal_delivery(&p).unwrap();
            prop_assert!(d.cost <= p.cost(&vec![true; k]));
            for j in 0..k {
                let single: Vec<bool> = (0..k).map(|i| i == j).collect();
                prop_assert!(d.cost <= p.cost(&single));
            }
            // a free extra ladder never hurts
            let mut q = p.clone();
            for row in q.replace.iter_mut() {
                row.push(rng.random_range(0.0..10.0));
            }
            q.replace.push((0..=k).map(|j| if j == k { 0.0 } else { rng.random_range(0.0..10.0) }).collect());
            q.p.push(0.0);
            q.deliver.push(0.0);
            prop_assert!(optimal_delivery(&q).unwrap().cost <= d.cost + 1e-12);
        }
    }
}
