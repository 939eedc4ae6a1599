//! Unweighted graph families used as the test and benchmark corpus.
//!
//! Node labeling per family:
//! - `complete:n`, `cycle:n`: nodes `0..n`, cycle edges `x ~ x±1 mod n`.
//! - `torus2d:L`: `L²` nodes, node `r·L + c` at row `r`, column `c`.
//! - `hypercube:d`: `2^d` nodes, edges between labels at Hamming distance 1.
//! - `barbell:k`: two `K_k` cliques on `0..k` and `k..2k`, bridged by the
//!   edge `(k-1, k)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{from_weighted_graph, MarkovChain};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFamily {
    Complete,
    Cycle,
    Torus2d,
    Hypercube,
    Barbell,
}

impl GraphFamily {
    pub fn name(self) -> &'static str {
        match self {
            GraphFamily::Complete => "complete",
            GraphFamily::Cycle => "cycle",
            GraphFamily::Torus2d => "torus2d",
            GraphFamily::Hypercube => "hypercube",
            GraphFamily::Barbell => "barbell",
        }
    }

    /// Number of nodes for the given size parameter.
    pub fn node_count(self, size: usize) -> usize {
        match self {
            GraphFamily::Complete | GraphFamily::Cycle => size,
            GraphFamily::Torus2d => size * size,
            GraphFamily::Hypercube => 1 << size,
            GraphFamily::Barbell => 2 * size,
        }
    }
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraphFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(GraphFamily::Complete),
            "cycle" => Ok(GraphFamily::Cycle),
            "torus2d" => Ok(GraphFamily::Torus2d),
            "hypercube" => Ok(GraphFamily::Hypercube),
            "barbell" => Ok(GraphFamily::Barbell),
            other => Err(invalid(format!("unknown graph family '{other}'"))),
        }
    }
}

/// A `"family:size"` graph address such as `"complete:32"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub family: GraphFamily,
    pub size: usize,
}

impl GraphSpec {
    pub fn generate(&self) -> Result<MarkovChain> {
        generate(self.family, self.size)
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.family, self.size)
    }
}

impl FromStr for GraphSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (family, size) = s
            .split_once(':')
            .ok_or_else(|| invalid(format!("graph spec '{s}' is not of the form family:size")))?;
        let size = size
            .trim()
            .parse()
            .map_err(|_| invalid(format!("graph size '{size}' is not an integer")))?;
        Ok(GraphSpec {
            family: family.trim().parse()?,
            size,
        })
    }
}

/// 0/1 adjacency matrix of the family member.
pub fn adjacency(family: GraphFamily, size: usize) -> Result<DMatrix<f64>> {
    let min = if family == GraphFamily::Hypercube { 1 } else { 2 };
    if size < min {
        return Err(invalid(format!("{family} needs size >= {min}, got {size}")));
    }
    let n = family.node_count(size);
    let mut w = DMatrix::zeros(n, n);
    let mut link = |a: usize, b: usize| {
        if a != b {
            w[(a, b)] = 1.0;
            w[(b, a)] = 1.0;
        }
    };
    match family {
        GraphFamily::Complete => {
            for a in 0..n {
                for b in (a + 1)..n {
                    link(a, b);
                }
            }
        }
        GraphFamily::Cycle => {
            for a in 0..n {
                link(a, (a + 1) % n);
            }
        }
        GraphFamily::Torus2d => {
            let side = size;
            for r in 0..side {
                for c in 0..side {
                    let here = r * side + c;
                    link(here, r * side + (c + 1) % side);
                    link(here, ((r + 1) % side) * side + c);
                }
            }
        }
        GraphFamily::Hypercube => {
            for a in 0..n {
                for bit in 0..size {
                    link(a, a ^ (1 << bit));
                }
            }
        }
        GraphFamily::Barbell => {
            let k = size;
            for a in 0..k {
                for b in (a + 1)..k {
                    link(a, b);
                    link(k + a, k + b);
                }
            }
            link(k - 1, k);
        }
    }
    Ok(w)
}

/// Simple random walk on the family member (not lazy).
pub fn generate(family: GraphFamily, size: usize) -> Result<MarkovChain> {
    let chain = from_weighted_graph(&adjacency(family, size)?)?;
    let n = chain.n();
    let labels = match family {
        GraphFamily::Torus2d => (0..n).map(|x| format!("({},{})", x / size, x % size)).collect(),
        GraphFamily::Hypercube => (0..n).map(|x| format!("{x:0width$b}", width = size)).collect(),
        _ => (0..n).map(|x| x.to_string()).collect(),
    };
    chain.with_labels(labels)
}
