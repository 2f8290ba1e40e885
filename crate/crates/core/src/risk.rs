//! Risk vectors and the sorted-tail risk metric `mu_r`.
//!
//! For a non-positive risk vector `r` whose entries are nondecreasing (most
//! negative weight first), `mu_r(y) = max_pi r' P_pi y` is attained by
//! pairing `r` with `y` sorted ascending, so evaluation is a sort and a dot
//! product.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scenario::ScenarioMatrix;

/// One CVaR component of a risk specification: return period and weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvarTerm {
    pub return_period: usize,
    pub weight: f64,
}

/// A CVaR component expressed by its tail size `m` (the number of worst
/// scenarios averaged), so that `r = sum_k weight_k * cvar(m_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailTerm {
    pub tail_size: usize,
    pub weight: f64,
}

/// A list of `(return_period, weight)` pairs, written `"100:0.5,1000:0.5"`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSpec(pub Vec<CvarTerm>);

impl FromStr for RiskSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (rp, w) = part
                .split_once(':')
                .ok_or_else(|| Error::invalid(format!("risk term {part:?} is not rp:weight")))?;
            let return_period = rp
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad return period {rp:?}")))?;
            let weight: f64 = w
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad weight {w:?}")))?;
            terms.push(CvarTerm {
                return_period,
                weight,
            });
        }
        if terms.is_empty() {
            return Err(Error::invalid("empty risk specification"));
        }
        Ok(RiskSpec(terms))
    }
}

impl fmt::Display for RiskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}", t.return_period, t.weight)?;
        }
        Ok(())
    }
}

impl RiskSpec {
    pub fn risk_vector(&self, scenarios: usize) -> Result<RiskVector> {
        let vectors = self
            .0
            .iter()
            .map(|t| make_cvar_vector(scenarios, t.return_period))
            .collect::<Result<Vec<_>>>()?;
        let weights: Vec<f64> = self.0.iter().map(|t| t.weight).collect();
        blend(&weights, &vectors)
    }
}

/// Non-positive, nondecreasing weights `r` defining `mu_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskVector {
    weights: Vec<f64>,
    description: String,
}

impl RiskVector {
    pub fn new(weights: Vec<f64>, description: impl Into<String>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::dim("risk vector is empty"));
        }
        if let Some((j, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w > 0.0)
        {
            return Err(Error::invalid(format!(
                "risk weight {w} at position {j} is not a finite non-positive number"
            )));
        }
        if let Some(j) = weights.windows(2).position(|w| w[0] > w[1]) {
            return Err(Error::invalid(format!(
                "risk weights must be nondecreasing, but r[{j}] > r[{}]",
                j + 1
            )));
        }
        Ok(Self {
            weights,
            description: description.into(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Number of leading nonzero weights; only these scenarios enter a cut.
    pub fn tail_len(&self) -> usize {
        self.weights.iter().take_while(|w| **w != 0.0).count()
    }

    /// Decomposes `r` into nonnegative multiples of pure tail-mean vectors.
    ///
    /// With `r_{J+1} = 0`, the coefficient on the tail of size `m` is
    /// `m (r_{m+1} - r_m)`, which is nonnegative because `r` is
    /// nondecreasing. For vectors built by [`make_cvar_vector`] and [`blend`]
    /// this recovers the original terms.
    pub fn tail_terms(&self) -> Vec<TailTerm> {
        let j = self.weights.len();
        (0..j)
            .filter_map(|k| {
                let next = self.weights.get(k + 1).copied().unwrap_or(0.0);
                let weight = (k + 1) as f64 * (next - self.weights[k]);
                (weight > 0.0).then_some(TailTerm {
                    tail_size: k + 1,
                    weight,
                })
            })
            .collect()
    }
}

/// CVaR at return period `rho`: the first `J/rho` weights are `-rho/J`.
pub fn make_cvar_vector(scenarios: usize, return_period: usize) -> Result<RiskVector> {
    if scenarios == 0 || return_period == 0 {
        return Err(Error::dim(format!(
            "scenario count and return period must be positive (J={scenarios}, rp={return_period})"
        )));
    }
    if !scenarios.is_multiple_of(return_period) {
        return Err(Error::ReturnPeriod {
            scenarios,
            return_period,
        });
    }
    let tail = scenarios / return_period;
    let mut weights = vec![0.0; scenarios];
    weights[..tail].fill(-(return_period as f64) / scenarios as f64);
    RiskVector::new(weights, format!("CVaR rp={return_period}"))
}

/// Componentwise weighted sum of risk vectors.
pub fn blend(weights: &[f64], vectors: &[RiskVector]) -> Result<RiskVector> {
    if weights.len() != vectors.len() || vectors.is_empty() {
        return Err(Error::dim(format!(
            "{} weights for {} risk vectors",
            weights.len(),
            vectors.len()
        )));
    }
    let j = vectors[0].len();
    if vectors.iter().any(|v| v.len() != j) {
        return Err(Error::dim("risk vectors of different lengths"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid("blend weights must be finite and non-negative"));
    }
    if !weights.iter().any(|w| *w > 0.0) {
        return Err(Error::invalid("at least one blend weight must be positive"));
    }
    if weights == [1.0] {
        return Ok(vectors[0].clone());
    }
    let mut out = vec![0.0; j];
    for (w, v) in weights.iter().zip(vectors) {
        for (o, r) in out.iter_mut().zip(&v.weights) {
            *o += w * r;
        }
    }
    let description = weights
        .iter()
        .zip(vectors)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, v)| format!("{w}*{}", v.description))
        .collect::<Vec<_>>()
        .join(" + ");
    RiskVector::new(out, description)
}

/// Permutation listing scenario indices from the smallest outcome upwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TailOrdering {
    perm: Vec<usize>,
}

impl TailOrdering {
    /// `ranked()[k]` is the index of the `k`-th smallest outcome.
    pub fn ranked(&self) -> &[usize] {
        &self.perm
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&j| y[j]).collect()
    }
}

/// Stable ascending ordering of `y`; ties keep their original index order.
pub fn tail_ordering(y: &[f64]) -> TailOrdering {
    let mut perm: Vec<usize> = (0..y.len()).collect();
    perm.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).expect("outcomes must be finite"));
    TailOrdering { perm }
}

/// `mu_r(y) = r' y_sorted`.
pub fn evaluate_risk(r: &RiskVector, y: &[f64]) -> Result<f64> {
    if r.len() != y.len() {
        return Err(Error::dim(format!(
            "risk vector has {} entries, outcome vector {}",
            r.len(),
            y.len()
        )));
    }
    let tail = r.tail_len();
    if tail == 0 {
        return Ok(0.0);
    }
    let mut sorted = y.to_vec();
    let cmp = |a: &f64, b: &f64| a.partial_cmp(b).expect("outcomes must be finite");
    if tail < sorted.len() {
        sorted.select_nth_unstable_by(tail - 1, cmp);
    }
    sorted[..tail].sort_unstable_by(cmp);
    Ok(r.weights[..tail]
        .iter()
        .zip(&sorted[..tail])
        .map(|(w, v)| w * v)
        .sum())
}

/// Aggregated cut row `c = (r placed by rank)' Y`, so that `c'x = r' P_pi Y x`.
///
/// The scenario ranked `k`-th smallest receives weight `r_k`; only the
/// nonzero tail contributes.
pub fn cut_coefficients(
    r: &RiskVector,
    ordering: &TailOrdering,
    y: &ScenarioMatrix,
) -> Result<Vec<f64>> {
    if r.len() != y.scenarios() || ordering.len() != y.scenarios() {
        return Err(Error::dim(format!(
            "risk vector ({}), ordering ({}) and scenario matrix ({}) disagree on J",
            r.len(),
            ordering.len(),
            y.scenarios()
        )));
    }
    let mut c = vec![0.0; y.instruments()];
    for (w, &scenario) in r.weights[..r.tail_len()].iter().zip(&ordering.perm) {
        for (ci, v) in c.iter_mut().zip(y.row(scenario)) {
            *ci += w * v;
        }
    }
    Ok(c)
}
