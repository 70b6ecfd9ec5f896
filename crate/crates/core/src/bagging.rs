//! Non-overlapping equal-size bags and the streaming bag operators.
//!
//! A bag assignment partitions sample indices `0..n` into `m = n/k` disjoint
//! bags of exactly `k` samples. The bag operators used by the estimator — the
//! projection onto bag-constant vectors, its blend with the identity, and the
//! scaled deviation from bag means — are all O(n) passes over the inverse map;
//! no bag matrix is ever materialized.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

/// Partition of `0..n` into `n/k` disjoint bags of size exactly `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BagAssignmentRepr", into = "BagAssignmentRepr")]
pub struct BagAssignment {
    n: usize,
    k: usize,
    bags: Vec<Vec<usize>>,
    bag_of: Vec<usize>,
}

/// JSON shape: `{"n": .., "k": .., "bags": [[..], ..]}` with 0-based indices.
#[derive(Serialize, Deserialize)]
struct BagAssignmentRepr {
    n: usize,
    k: usize,
    bags: Vec<Vec<usize>>,
}

impl TryFrom<BagAssignmentRepr> for BagAssignment {
    type Error = Error;

    fn try_from(repr: BagAssignmentRepr) -> Result<Self> {
        BagAssignment::from_bags(repr.n, repr.k, repr.bags)
    }
}

impl From<BagAssignment> for BagAssignmentRepr {
    fn from(a: BagAssignment) -> Self {
        Self {
            n: a.n,
            k: a.k,
            bags: a.bags,
        }
    }
}

impl BagAssignment {
    /// Builds an assignment from explicit bags, validating that they form a
    /// partition of `0..n` into bags of exactly `k` indices.
    pub fn from_bags(n: usize, k: usize, bags: Vec<Vec<usize>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain {
                what: "k",
                value: 0.0,
                domain: "k >= 1",
            });
        }
        if n == 0 || !n.is_multiple_of(k) {
            return Err(Error::Divisibility { n, k });
        }
        if bags.len() != n / k {
            return Err(Error::LengthMismatch {
                what: "bags",
                expected: n / k,
                got: bags.len(),
            });
        }
        let mut bag_of = vec![usize::MAX; n];
        for (a, bag) in bags.iter().enumerate() {
            if bag.len() != k {
                return Err(Error::LengthMismatch {
                    what: "bag",
                    expected: k,
                    got: bag.len(),
                });
            }
            for &i in bag {
                if i >= n || bag_of[i] != usize::MAX {
                    return Err(Error::ConfigMismatch(format!(
                        "index {i} is out of range or assigned to more than one bag"
                    )));
                }
                bag_of[i] = a;
            }
        }
        Ok(Self { n, k, bags, bag_of })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of bags `m = n / k`.
    pub fn num_bags(&self) -> usize {
        self.bags.len()
    }

    pub fn bags(&self) -> &[Vec<usize>] {
        &self.bags
    }

    /// Bag index of sample `i`.
    pub fn bag_of(&self, i: usize) -> usize {
        self.bag_of[i]
    }

    fn check_len(&self, v: &[f64], what: &'static str) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::LengthMismatch {
                what,
                expected: self.n,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Per-bag means of a length-`n` vector, one entry per bag.
    pub fn bag_means(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v, "vector")?;
        let inv_k = 1.0 / self.k as f64;
        Ok(self
            .bags
            .iter()
            .map(|bag| bag.iter().map(|&i| v[i]).sum::<f64>() * inv_k)
            .collect())
    }

    /// Row means of an `n × d` matrix within each bag, as an `m × d` matrix.
    pub fn bag_mean_rows(&self, x: &Matrix) -> Result<Matrix> {
        if x.nrows() != self.n {
            return Err(Error::LengthMismatch {
                what: "matrix rows",
                expected: self.n,
                got: x.nrows(),
            });
        }
        let d = x.ncols();
        let inv_k = 1.0 / self.k as f64;
        let mut out = Matrix::zeros(self.num_bags(), d);
        for (a, bag) in self.bags.iter().enumerate() {
            let row = out.row_mut(a);
            for &i in bag {
                for (o, &v) in row.iter_mut().zip(x.row(i)) {
                    *o += v;
                }
            }
            for o in row.iter_mut() {
                *o *= inv_k;
            }
        }
        Ok(out)
    }
}

/// Uniformly random partition of `0..n` into `n/k` bags of size `k`,
/// deterministic given `seed`. Implemented as a seeded shuffle sliced into
/// consecutive blocks.
pub fn assign_bags(n: usize, k: usize, seed: u64) -> Result<BagAssignment> {
    if k == 0 {
        return Err(Error::Domain {
            what: "k",
            value: 0.0,
            domain: "k >= 1",
        });
    }
    if n == 0 || !n.is_multiple_of(k) {
        return Err(Error::Divisibility { n, k });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng::master_rng(seed));
    let bags: Vec<Vec<usize>> = indices.chunks_exact(k).map(<[usize]>::to_vec).collect();
    BagAssignment::from_bags(n, k, bags)
}

/// Arithmetic mean of `y` within each bag.
pub fn aggregate_responses(y: &[f64], assignment: &BagAssignment) -> Result<Vec<f64>> {
    assignment.bag_means(y)
}

/// Replaces every entry by the mean of its bag: the orthogonal projection
/// onto bag-constant vectors.
pub fn bag_mean_projection(v: &[f64], assignment: &BagAssignment) -> Result<Vec<f64>> {
    let means = assignment.bag_means(v)?;
    Ok((0..v.len()).map(|i| means[assignment.bag_of(i)]).collect())
}

/// `rho * v + (1 - rho) * projection(v)`: blends each entry with its bag mean.
pub fn bag_mean_blend(v: &[f64], assignment: &BagAssignment, rho: f64) -> Result<Vec<f64>> {
    check_rho(rho)?;
    let proj = bag_mean_projection(v, assignment)?;
    Ok(v.iter()
        .zip(&proj)
        .map(|(&vi, &pi)| rho * vi + (1.0 - rho) * pi)
        .collect())
}

/// `rho * (v - projection(v))`: the scaled within-bag deviation. Vanishes on
/// bag-constant vectors.
pub fn bag_deviation(v: &[f64], assignment: &BagAssignment, rho: f64) -> Result<Vec<f64>> {
    check_rho(rho)?;
    let proj = bag_mean_projection(v, assignment)?;
    Ok(v.iter()
        .zip(&proj)
        .map(|(&vi, &pi)| rho * (vi - pi))
        .collect())
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain {
            what: "rho",
            value: rho,
            domain: "0 <= rho <= 1",
        });
    }
    Ok(())
}

/// Features paired with per-bag mean responses.
#[derive(Debug, Clone)]
pub struct AggregateDataset {
    features: Matrix,
    bag_means: Vec<f64>,
    assignment: BagAssignment,
}

impl AggregateDataset {
    pub fn new(features: Matrix, bag_means: Vec<f64>, assignment: BagAssignment) -> Result<Self> {
        if features.nrows() != assignment.n() {
            return Err(Error::LengthMismatch {
                what: "feature rows",
                expected: assignment.n(),
                got: features.nrows(),
            });
        }
        if bag_means.len() != assignment.num_bags() {
            return Err(Error::LengthMismatch {
                what: "bag means",
                expected: assignment.num_bags(),
                got: bag_means.len(),
            });
        }
        Ok(Self {
            features,
            bag_means,
            assignment,
        })
    }

    /// Aggregates raw per-sample responses into bag means first.
    pub fn from_responses(features: Matrix, y: &[f64], assignment: BagAssignment) -> Result<Self> {
        let bag_means = aggregate_responses(y, &assignment)?;
        Self::new(features, bag_means, assignment)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn bag_means(&self) -> &[f64] {
        &self.bag_means
    }

    pub fn assignment(&self) -> &BagAssignment {
        &self.assignment
    }
}
