//! Fixed-particle-number sectors of a driven site coupled to a band of sites,
//! and the determinant solution for free fermions.
//!
//! Sites are 0-based; the driven site is `n_sites - 1`. For fermion signs the
//! driven site is ordered ahead of the band sites.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::AmplitudeMatrix;
use crate::model::DiabaticModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Boson,
    Fermion,
}

/// H = Σ_k e_k n_k (1 − x n_d) + β_d t n_d + β_b t Σ_k n_k + Σ_k g_k (d† c_k + c_k† d).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondQuantizedSpec {
    pub statistics: Statistics,
    pub n_sites: usize,
    pub driven_slope: f64,
    pub band_slope: f64,
    pub energies: Vec<f64>,
    pub couplings: Vec<f64>,
    /// Interaction factor x; fermions only.
    pub quartic: f64,
}

impl SecondQuantizedSpec {
    /// Interacting fermions: driven slope β, flat band.
    pub fn fermion(beta: f64, energies: Vec<f64>, couplings: Vec<f64>, x: f64) -> Self {
        Self {
            statistics: Statistics::Fermion,
            n_sites: energies.len() + 1,
            driven_slope: beta,
            band_slope: 0.0,
            energies,
            couplings,
            quartic: x,
        }
    }

    /// Bosons with the driven site rising at +1/2 and the band falling at −1/2.
    pub fn boson(energies: Vec<f64>, couplings: Vec<f64>) -> Self {
        Self {
            statistics: Statistics::Boson,
            n_sites: energies.len() + 1,
            driven_slope: 0.5,
            band_slope: -0.5,
            energies,
            couplings,
            quartic: 0.0,
        }
    }

    pub fn driven(&self) -> usize {
        self.n_sites - 1
    }

    fn validate(&self) -> Result<()> {
        if self.n_sites < 2 || self.energies.len() != self.n_sites - 1 || self.couplings.len() != self.n_sites - 1 {
            return Err(Error::BadDimension(format!(
                "{} sites need {} energies and couplings, got {} and {}",
                self.n_sites,
                self.n_sites.saturating_sub(1),
                self.energies.len(),
                self.couplings.len()
            )));
        }
        if self.statistics == Statistics::Boson && self.quartic != 0.0 {
            return Err(Error::SchemaViolation("the interaction factor applies to fermions only".into()));
        }
        if self.driven_slope == self.band_slope && self.couplings.iter().any(|&g| g != 0.0) {
            return Err(Error::DegenerateSlopeCoupling { i: 0, j: self.n_sites - 1, g: self.couplings[0] });
        }
        Ok(())
    }
}

/// Ordered occupation basis. Each state lists occupied sites in ascending
/// order (with repetition for bosons).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockSector {
    pub statistics: Statistics,
    pub n_sites: usize,
    pub n_particles: usize,
    pub basis: Vec<Vec<usize>>,
}

impl FockSector {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn occupation(&self, state: usize) -> Vec<u32> {
        let mut occ = vec![0; self.n_sites];
        for &s in &self.basis[state] {
            occ[s] += 1;
        }
        occ
    }

    pub fn index_of(&self, sites: &[usize]) -> Option<usize> {
        let mut key = sites.to_vec();
        key.sort_unstable();
        self.basis.iter().position(|s| *s == key)
    }
}

fn combinations(n: usize, k: usize, repeat: bool) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, repeat: bool, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for s in start..n {
            cur.push(s);
            rec(if repeat { s } else { s + 1 }, n, k, repeat, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, repeat, &mut Vec::new(), &mut out);
    out
}

/// Sector basis in the numbering of the level diagrams.
///
/// Fermions, one particle: band sites, then the driven site. Fermions, two or
/// more: states holding the driven particle first, each group in
/// lexicographic order of band sites. Bosons: ascending in
/// (n_driven, n_1, …, n_{N−1}).
pub fn enumerate_basis(spec: &SecondQuantizedSpec, n_particles: usize) -> Result<FockSector> {
    spec.validate()?;
    let n = spec.n_sites;
    let d = spec.driven();
    let bad = Error::BadParticleNumber { n_particles, n_sites: n };
    let basis = match spec.statistics {
        Statistics::Fermion => {
            if n_particles == 0 || n_particles > n {
                return Err(bad);
            }
            if n_particles == 1 {
                (0..n).map(|s| vec![s]).collect()
            } else {
                let mut with_d: Vec<Vec<usize>> = combinations(n - 1, n_particles - 1, false)
                    .into_iter()
                    .map(|mut c| {
                        c.push(d);
                        c
                    })
                    .collect();
                with_d.extend(combinations(n - 1, n_particles, false));
                with_d
            }
        }
        Statistics::Boson => {
            if n_particles == 0 {
                return Err(bad);
            }
            let mut states = combinations(n, n_particles, true);
            let key = |s: &Vec<usize>| {
                let mut occ = vec![0u32; n];
                for &x in s {
                    occ[x] += 1;
                }
                let mut k = vec![occ[d]];
                k.extend_from_slice(&occ[..d]);
                k
            };
            states.sort_by_key(key);
            states
        }
    };
    Ok(FockSector { statistics: spec.statistics, n_sites: n, n_particles, basis })
}

/// Sector Hamiltonian as a diabatic model.
pub fn build_sector_model(spec: &SecondQuantizedSpec, n_particles: usize) -> Result<DiabaticModel> {
    let sector = enumerate_basis(spec, n_particles)?;
    build_sector_model_in(spec, &sector)
}

pub fn build_sector_model_in(spec: &SecondQuantizedSpec, sector: &FockSector) -> Result<DiabaticModel> {
    let d = spec.driven();
    let mut slopes = Vec::with_capacity(sector.dim());
    let mut offsets = Vec::with_capacity(sector.dim());
    for s in 0..sector.dim() {
        let occ = sector.occupation(s);
        let nd = f64::from(occ[d]);
        let band: f64 = occ[..d].iter().map(|&c| f64::from(c)).sum();
        slopes.push(nd * spec.driven_slope + band * spec.band_slope);
        offsets.push((0..d).map(|k| f64::from(occ[k]) * spec.energies[k] * (1.0 - spec.quartic * nd)).sum());
    }
    let mut couplings = Vec::new();
    for (from, state) in sector.basis.iter().enumerate() {
        if !state.contains(&d) {
            continue;
        }
        let occ = sector.occupation(from);
        for k in 0..d {
            let g = spec.couplings[k];
            if g == 0.0 {
                continue;
            }
            // c_k† d applied to the state.
            let amplitude = match spec.statistics {
                Statistics::Boson => g * (f64::from(occ[d]) * f64::from(occ[k] + 1)).sqrt(),
                Statistics::Fermion => {
                    if occ[k] > 0 {
                        continue;
                    }
                    // d sits first in mode order, so removing it gives no sign;
                    // creating at k passes the occupied band sites before k.
                    let passed = state.iter().filter(|&&s| s < k).count();
                    if passed % 2 == 0 { g } else { -g }
                }
            };
            let mut target: Vec<usize> = state.clone();
            let pos = target.iter().position(|&s| s == d).unwrap();
            target[pos] = k;
            let to = sector.index_of(&target).expect("hopping stays in the sector");
            couplings.push((from.min(to), from.max(to), amplitude));
        }
    }
    DiabaticModel::new(slopes, offsets, couplings)
}

/// p_k = exp(−2π g_k² / |β|).
pub fn do_probabilities(beta: f64, couplings: &[f64]) -> Vec<f64> {
    couplings.iter().map(|g| (-2.0 * std::f64::consts::PI * g * g / beta.abs()).exp()).collect()
}

/// Truncated amplitudes of the Demkov-Osherov model: a level of slope β
/// (index N−1) crossing flat levels `energies` (indices 0..N−2) whose
/// crossings occur in the order given by `order` (positions into the band).
fn do_amplitudes_ordered(beta: f64, couplings: &[f64], order: &[usize]) -> AmplitudeMatrix {
    let nb = couplings.len();
    let n = nb + 1;
    let p = do_probabilities(beta, couplings);
    let q: Vec<f64> = p.iter().map(|x| 1.0 - x).collect();
    let sgn = |k: usize| if couplings[k] < 0.0 { -1.0 } else { 1.0 };
    let mut rank = vec![0; nb];
    for (r, &k) in order.iter().enumerate() {
        rank[k] = r;
    }
    // Product of p over crossings strictly between ranks lo and hi.
    let between = |lo: usize, hi: usize| -> f64 { order[lo.min(hi)..hi.max(lo)].iter().skip(1).map(|&k| p[k]).product() };
    let mut s = DMatrix::zeros(n, n);
    let d = nb;
    s[(d, d)] = Complex64::new(p.iter().product::<f64>().sqrt(), 0.0);
    for a in 0..nb {
        s[(a, a)] = Complex64::new(p[a].sqrt(), 0.0);
        let before: f64 = order[..rank[a]].iter().map(|&k| p[k]).product();
        let after: f64 = order[rank[a] + 1..].iter().map(|&k| p[k]).product();
        s[(a, d)] = Complex64::new(0.0, sgn(a) * (q[a] * before).sqrt());
        s[(d, a)] = Complex64::new(0.0, sgn(a) * (q[a] * after).sqrt());
        for m in 0..nb {
            if rank[m] < rank[a] {
                let mid = between(rank[m], rank[a]);
                s[(a, m)] = Complex64::new(-sgn(a) * sgn(m) * (q[a] * q[m] * mid).sqrt(), 0.0);
            }
        }
    }
    AmplitudeMatrix(s)
}

/// Truncated scattering matrix of the N-state Demkov-Osherov model with
/// band energies sorted ascending and driven slope β > 0.
pub fn do_amplitudes(n: usize, beta: f64, energies: &[f64], couplings: &[f64]) -> Result<AmplitudeMatrix> {
    if n < 2 || energies.len() != n - 1 || couplings.len() != n - 1 {
        return Err(Error::BadDimension(format!("N = {n} with {} energies, {} couplings", energies.len(), couplings.len())));
    }
    if !(beta > 0.0) {
        return Err(Error::OutOfRange(format!("driven slope {beta} must be positive")));
    }
    if energies.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::UnsortedBand);
    }
    let order: Vec<usize> = (0..n - 1).collect();
    Ok(do_amplitudes_ordered(beta, couplings, &order))
}

/// Demkov-Osherov amplitudes for any band order and sign of β, following
/// the chronological order of the crossings t_k = e_k/β.
pub fn do_amplitudes_chronological(beta: f64, energies: &[f64], couplings: &[f64]) -> Result<AmplitudeMatrix> {
    if energies.len() != couplings.len() || energies.is_empty() || beta == 0.0 {
        return Err(Error::BadDimension("band and couplings must match; slope nonzero".into()));
    }
    let mut order: Vec<usize> = (0..energies.len()).collect();
    order.sort_by(|&a, &b| (energies[a] / beta).total_cmp(&(energies[b] / beta)));
    if order.windows(2).any(|w| energies[w[0]] == energies[w[1]]) {
        return Err(Error::UnsortedBand);
    }
    Ok(do_amplitudes_ordered(beta, couplings, &order))
}

/// |det S[final, initial]|² for fermions moving through a single-particle
/// scattering matrix S.
pub fn fermion_transition_det(s: &AmplitudeMatrix, initial: &[usize], r#final: &[usize]) -> Result<f64> {
    if initial.len() != r#final.len() {
        return Err(Error::SizeMismatch(format!("{} initial vs {} final sites", initial.len(), r#final.len())));
    }
    let n = s.dim();
    if let Some(&bad) = initial.iter().chain(r#final).find(|&&x| x >= n) {
        return Err(Error::LevelOutOfRange { index: bad + 1, n });
    }
    let m = initial.len();
    let minor = DMatrix::from_fn(m, m, |a, b| s.get(r#final[a], initial[b]));
    Ok(minor.determinant().norm_sqr())
}

/// Σ_j |S_{site, j}|² over initially occupied sites j.
pub fn site_occupation(s: &AmplitudeMatrix, initial: &[usize], site: usize) -> f64 {
    initial.iter().map(|&j| s.get(site, j).norm_sqr()).sum()
}
