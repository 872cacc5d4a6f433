//! Diabatic models H(t) = A + B t with diagonal B.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::HermitianMatrix;

/// One coupling as it arrives from user input. Indices are 0-based here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCoupling {
    pub i: usize,
    pub j: usize,
    pub g: f64,
    #[serde(default)]
    pub im: f64,
}

/// Unvalidated model description.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawModel {
    pub slopes: Vec<f64>,
    pub offsets: Vec<f64>,
    pub couplings: Vec<RawCoupling>,
}

/// A validated multistate Landau-Zener model.
///
/// Diagonal entry `n` is `slopes[n]·t + offsets[n]`; couplings are real and
/// constant. Pairs with exactly equal slopes are never coupled.
#[derive(Debug, Clone, PartialEq)]
pub struct DiabaticModel {
    slopes: Vec<f64>,
    offsets: Vec<f64>,
    couplings: BTreeMap<(usize, usize), f64>,
}

/// Transformations that leave transition probabilities unchanged
/// (relabelings permute them).
#[derive(Debug, Clone, PartialEq)]
pub enum GaugeSpec {
    /// t → t + τ: offsets become ε + b·τ.
    TimeShift(f64),
    /// Adds c·t to every diagonal entry.
    CommonSlope(f64),
    /// Adds a constant to every diagonal entry.
    CommonOffset(f64),
    /// New level `k` is old level `perm[k]`.
    Relabel(Vec<usize>),
}

/// Checks the diabatic-basis invariants and builds a model.
pub fn validate_model(raw: RawModel) -> Result<DiabaticModel> {
    let n = raw.slopes.len();
    if n < 2 {
        return Err(Error::BadDimension(format!("need at least 2 levels, got {n}")));
    }
    if raw.offsets.len() != n {
        return Err(Error::BadDimension(format!("{n} slopes but {} offsets", raw.offsets.len())));
    }
    for (k, (&b, &e)) in raw.slopes.iter().zip(&raw.offsets).enumerate() {
        if !b.is_finite() || !e.is_finite() {
            return Err(Error::NonFinite(format!("level {}", k + 1)));
        }
    }
    let mut couplings = BTreeMap::new();
    for c in &raw.couplings {
        for idx in [c.i, c.j] {
            if idx >= n {
                return Err(Error::LevelOutOfRange { index: idx + 1, n });
            }
        }
        if c.i == c.j {
            return Err(Error::BadDimension(format!("diagonal coupling on level {}", c.i + 1)));
        }
        if !c.g.is_finite() || !c.im.is_finite() {
            return Err(Error::NonFinite(format!("coupling ({}, {})", c.i + 1, c.j + 1)));
        }
        if c.im != 0.0 {
            return Err(Error::NonRealCoupling { i: c.i, j: c.j, im: c.im });
        }
        let key = (c.i.min(c.j), c.i.max(c.j));
        if couplings.contains_key(&key) {
            return Err(Error::DuplicateCoupling { i: key.0, j: key.1 });
        }
        if c.g == 0.0 {
            continue;
        }
        if raw.slopes[key.0] == raw.slopes[key.1] {
            return Err(Error::DegenerateSlopeCoupling { i: key.0, j: key.1, g: c.g });
        }
        couplings.insert(key, c.g);
    }
    Ok(DiabaticModel { slopes: raw.slopes, offsets: raw.offsets, couplings })
}

impl DiabaticModel {
    /// Builds and validates a model from 0-based `(i, j, g)` triples.
    pub fn new(
        slopes: Vec<f64>,
        offsets: Vec<f64>,
        couplings: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let couplings = couplings.into_iter().map(|(i, j, g)| RawCoupling { i, j, g, im: 0.0 }).collect();
        validate_model(RawModel { slopes, offsets, couplings })
    }

    pub fn to_raw(&self) -> RawModel {
        RawModel {
            slopes: self.slopes.clone(),
            offsets: self.offsets.clone(),
            couplings: self.couplings().map(|(i, j, g)| RawCoupling { i, j, g, im: 0.0 }).collect(),
        }
    }

    pub fn n_levels(&self) -> usize {
        self.slopes.len()
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Diabatic energy of level `n` at time `t`.
    pub fn energy(&self, n: usize, t: f64) -> f64 {
        self.slopes[n] * t + self.offsets[n]
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0)
    }

    /// Nonzero couplings as `(i, j, g)` with `i < j`.
    pub fn couplings(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.couplings.iter().map(|(&(i, j), &g)| (i, j, g))
    }

    pub fn n_couplings(&self) -> usize {
        self.couplings.len()
    }

    pub fn max_abs_coupling(&self) -> f64 {
        self.couplings.values().fold(0.0, |a, g| a.max(g.abs()))
    }

    pub(crate) fn real_hamiltonian_at(&self, t: f64) -> DMatrix<f64> {
        let n = self.n_levels();
        let mut h = DMatrix::zeros(n, n);
        for k in 0..n {
            h[(k, k)] = self.energy(k, t);
        }
        for (i, j, g) in self.couplings() {
            h[(i, j)] = g;
            h[(j, i)] = g;
        }
        h
    }

    pub fn hamiltonian_at(&self, t: f64) -> HermitianMatrix {
        HermitianMatrix::from_real_symmetric(&self.real_hamiltonian_at(t))
    }

    /// Same levels, every coupling multiplied by `s`.
    pub fn with_scaled_couplings(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.couplings = self
            .couplings
            .iter()
            .filter(|_| s != 0.0)
            .map(|(&k, &g)| (k, g * s))
            .collect();
        out
    }

    /// Sub-model on `levels` (local index `k` is global `levels[k]`).
    pub fn projected(&self, levels: &[usize]) -> Self {
        let slopes = levels.iter().map(|&l| self.slopes[l]).collect();
        let offsets = levels.iter().map(|&l| self.offsets[l]).collect();
        let mut couplings = BTreeMap::new();
        for (a, &la) in levels.iter().enumerate() {
            for (b, &lb) in levels.iter().enumerate().skip(a + 1) {
                let g = self.coupling(la, lb);
                if g != 0.0 {
                    couplings.insert((a, b), g);
                }
            }
        }
        Self { slopes, offsets, couplings }
    }

    pub fn apply_gauge(&self, gauge: &GaugeSpec) -> Result<Self> {
        let mut out = self.clone();
        match gauge {
            GaugeSpec::TimeShift(tau) => {
                for (e, b) in out.offsets.iter_mut().zip(&self.slopes) {
                    *e += b * tau;
                }
            }
            GaugeSpec::CommonSlope(c) => out.slopes.iter_mut().for_each(|b| *b += c),
            GaugeSpec::CommonOffset(c) => out.offsets.iter_mut().for_each(|e| *e += c),
            GaugeSpec::Relabel(perm) => {
                let n = self.n_levels();
                let mut seen = vec![false; n];
                if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
                    return Err(Error::BadDimension(format!("{perm:?} is not a permutation of {n} levels")));
                }
                let mut inverse = vec![0; n];
                for (new, &old) in perm.iter().enumerate() {
                    inverse[old] = new;
                }
                out.slopes = perm.iter().map(|&p| self.slopes[p]).collect();
                out.offsets = perm.iter().map(|&p| self.offsets[p]).collect();
                out.couplings = self
                    .couplings()
                    .map(|(i, j, g)| {
                        let (a, b) = (inverse[i], inverse[j]);
                        ((a.min(b), a.max(b)), g)
                    })
                    .collect();
            }
        }
        Ok(out)
    }
}

/// Relabeling that puts a four-level model with a 4-cycle coupling graph into
/// the order used by the four-state family: levels 1, 2 uncoupled with
/// half-slope-difference b1 about their mean, level 4 with relative slope
/// b2 < b1, level 3 with relative slope b < b2.
pub fn four_state_canonical_relabel(model: &DiabaticModel) -> Result<GaugeSpec> {
    if model.n_levels() != 4 {
        return Err(Error::BadDimension("four-state relabeling needs 4 levels".into()));
    }
    let s = model.slopes();
    let pairs = [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))];
    for ((a, b), (c, d)) in pairs {
        if model.coupling(a, b) != 0.0 || model.coupling(c, d) != 0.0 {
            continue;
        }
        for (l1, l2) in [(a, b), (b, a)] {
            for (l3, l4) in [(c, d), (d, c)] {
                for (p1, p2, p3, p4) in [(l1, l2, l3, l4), (l3, l4, l1, l2)] {
                    let mean = 0.5 * (s[p1] + s[p2]);
                    let b1 = 0.5 * (s[p2] - s[p1]);
                    let (bb, b2) = (s[p3] - mean, s[p4] - mean);
                    if b1 > 0.0 && b1 > b2 && bb < b2 && bb > -b1 {
                        return Ok(GaugeSpec::Relabel(vec![p1, p2, p3, p4]));
                    }
                }
            }
        }
    }
    Err(Error::OutOfRange("no relabeling satisfies b1 > b2 > b > -b1".into()))
}
