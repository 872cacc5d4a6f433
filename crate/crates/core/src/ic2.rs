//! Integrability condition (ii): uncoupled crossings whose levels are not
//! linked through the couplings inside the crossing must stay exact
//! degeneracies of the adiabatic spectrum at small but finite couplings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{coupling_components, find_crossings, CrossingEvent};
use crate::model::DiabaticModel;
use crate::spectrum::eigenvalues_at;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCoupling {
    pub pair: (usize, usize),
    pub order: usize,
    pub value: f64,
    /// Intermediate levels of each term and its contribution.
    pub terms: Vec<(Vec<usize>, f64)>,
}

/// Perturbative coupling between two directly uncoupled levels at their
/// crossing, through one (order 2) or two (order 3) intermediate levels.
pub fn effective_coupling(
    model: &DiabaticModel,
    event: &CrossingEvent,
    pair: (usize, usize),
    order: usize,
) -> Result<EffectiveCoupling> {
    let (i, j) = pair;
    let n = model.n_levels();
    for l in [i, j] {
        if l >= n {
            return Err(Error::LevelOutOfRange { index: l + 1, n });
        }
    }
    if model.coupling(i, j) != 0.0 {
        return Err(Error::PairCoupled { i, j });
    }
    let t = event.time;
    let reference = event.energy;
    let scale = 1e-12 * 1f64.max(reference.abs());
    let denominator = |k: usize| -> Result<f64> {
        let d = reference - model.energy(k, t);
        if d.abs() <= scale {
            Err(Error::DegenerateDenominator { level: k, t })
        } else {
            Ok(d)
        }
    };
    let others: Vec<usize> = (0..n).filter(|&k| k != i && k != j).collect();
    let mut terms = Vec::new();
    match order {
        2 => {
            for &k in &others {
                let num = model.coupling(i, k) * model.coupling(k, j);
                if num != 0.0 {
                    terms.push((vec![k], num / denominator(k)?));
                }
            }
        }
        3 => {
            for &k in &others {
                for &l in others.iter().filter(|&&l| l != k) {
                    let num = model.coupling(i, k) * model.coupling(k, l) * model.coupling(l, j);
                    if num != 0.0 {
                        terms.push((vec![k, l], num / (denominator(k)? * denominator(l)?)));
                    }
                }
            }
        }
        _ => return Err(Error::OutOfRange(format!("effective coupling order {order} (expected 2 or 3)"))),
    }
    let value = terms.iter().map(|t| t.1).sum();
    Ok(EffectiveCoupling { pair, order, value, terms })
}

/// Whether the pair is linked by couplings among the event's own levels.
pub fn projected_connectivity(model: &DiabaticModel, event: &CrossingEvent, pair: (usize, usize)) -> bool {
    coupling_components(model, &event.levels)
        .iter()
        .any(|c| c.contains(&pair.0) && c.contains(&pair.1))
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Minimum of the gap between sorted eigenvalues `k` and `k + 1` inside
/// `bracket`, by golden-section search.
pub fn min_gap(model: &DiabaticModel, k: usize, bracket: (f64, f64)) -> Result<(f64, f64)> {
    let n = model.n_levels();
    if k + 1 >= n {
        return Err(Error::LevelOutOfRange { index: k + 2, n });
    }
    let gap = |t: f64| -> Result<f64> {
        let e = eigenvalues_at(model, t)?;
        Ok(e[k + 1] - e[k])
    };
    let (lo, hi) = (bracket.0.min(bracket.1), bracket.0.max(bracket.1));
    let tol = 1e-12 * (hi - lo).max(1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (gap(c)?, gap(d)?);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = gap(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = gap(d)?;
        }
    }
    let t = 0.5 * (a + b);
    let g = gap(t)?;
    let edge = 1e-6 * (hi - lo);
    if (t - lo < edge && gap(lo)? <= g) || (hi - t < edge && gap(hi)? <= g) {
        return Err(Error::NoMinimumInBracket { lo, hi });
    }
    Ok((t, g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleGap {
    pub scale: f64,
    pub gap: f64,
    pub time: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingVerdict {
    pub event: CrossingEvent,
    pub pair: (usize, usize),
    pub required_exact: bool,
    /// Largest gap over the coupling scales.
    pub min_gap: f64,
    pub min_gap_time: f64,
    pub classified_exact: bool,
    pub per_scale: Vec<ScaleGap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ic2Report {
    pub holds: bool,
    pub scales: Vec<f64>,
    pub required: usize,
    pub exact: usize,
    pub verdicts: Vec<CrossingVerdict>,
}

pub const DEFAULT_SCALES: [f64; 2] = [1.0, 0.5];

/// Local gap minimum found on the scan grid, refined.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    time: f64,
    energy: f64,
    gap: f64,
    tolerance: f64,
}

fn bracket_half_width(model: &DiabaticModel) -> f64 {
    let (b, e) = (model.slopes(), model.offsets());
    let spread = b.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x)) - b.iter().fold(f64::INFINITY, |a, &x| a.min(x));
    let spacing = e.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x)) - e.iter().fold(f64::INFINITY, |a, &x| a.min(x));
    if spread > 0.0 && spacing > 0.0 {
        spacing / spread
    } else {
        1.0
    }
}

/// Scans all adjacent-eigenvalue gaps over `[lo, hi]` and refines every
/// interior local minimum.
fn gap_minima(model: &DiabaticModel, lo: f64, hi: f64, points: usize) -> Result<Vec<Candidate>> {
    let n = model.n_levels();
    let step = (hi - lo) / (points - 1) as f64;
    let spectra: Vec<Vec<f64>> = (0..points).map(|p| eigenvalues_at(model, lo + step * p as f64)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for k in 0..n - 1 {
        let gaps: Vec<f64> = spectra.iter().map(|e| e[k + 1] - e[k]).collect();
        for p in 1..points - 1 {
            if gaps[p] <= gaps[p - 1] && gaps[p] < gaps[p + 1] {
                let bracket = (lo + step * (p - 1) as f64, lo + step * (p + 1) as f64);
                let (t, gap) = match min_gap(model, k, bracket) {
                    Ok(v) => v,
                    Err(Error::NoMinimumInBracket { .. }) => continue,
                    Err(e) => return Err(e),
                };
                let e = eigenvalues_at(model, t)?;
                let local_scale = [bracket.0, bracket.1]
                    .iter()
                    .map(|&s| eigenvalues_at(model, s).map(|v| v.iter().fold(0.0f64, |a, x| a.max(x.abs()))))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .fold(e.iter().fold(0.0f64, |a, x| a.max(x.abs())), f64::max);
                out.push(Candidate { time: t, energy: 0.5 * (e[k] + e[k + 1]), gap, tolerance: 1e-8 * local_scale.max(1e-300) });
            }
        }
    }
    Ok(out)
}

/// Numerical check of condition (ii) at each coupling scale.
pub fn check_ic2(model: &DiabaticModel, scales: &[f64]) -> Result<Ic2Report> {
    let events = find_crossings(model);
    let mut pairs: Vec<(CrossingEvent, (usize, usize), bool)> = Vec::new();
    for ev in events.iter() {
        for (a, &i) in ev.levels.iter().enumerate() {
            for &j in &ev.levels[a + 1..] {
                if model.coupling(i, j) == 0.0 {
                    let connected = projected_connectivity(model, ev, (i, j));
                    pairs.push((ev.clone(), (i, j), !connected));
                }
            }
        }
    }
    let delta = bracket_half_width(model);
    let spread = {
        let b = model.slopes();
        (b.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x)) - b.iter().fold(f64::INFINITY, |a, &x| a.min(x))).max(1e-300)
    };
    let (t_lo, t_hi) = events
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e.time), hi.max(e.time)));
    let mut per_pair: Vec<Vec<ScaleGap>> = vec![Vec::new(); pairs.len()];
    if !pairs.is_empty() {
        let (lo, hi) = (t_lo - delta, t_hi + delta);
        let points = (((hi - lo) / delta) * 400.0).clamp(4001.0, 40001.0) as usize;
        for &scale in scales {
            let scaled = model.with_scaled_couplings(scale);
            let candidates = gap_minima(&scaled, lo, hi, points)?;
            let distance = |p: &(CrossingEvent, (usize, usize), bool), c: &Candidate| {
                (c.time - p.0.time).abs() + (c.energy - p.0.energy).abs() / spread
            };
            // Greedy one-to-one matching: required crossings to exact candidates first.
            let mut taken = vec![false; candidates.len()];
            let mut assigned: Vec<Option<usize>> = vec![None; pairs.len()];
            let mut options: Vec<(f64, usize, usize)> = Vec::new();
            for (pi, p) in pairs.iter().enumerate().filter(|(_, p)| p.2) {
                for (ci, c) in candidates.iter().enumerate() {
                    let d = distance(p, c);
                    if c.gap < c.tolerance && (c.time - p.0.time).abs() <= delta {
                        options.push((d, pi, ci));
                    }
                }
            }
            options.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (_, pi, ci) in options {
                if assigned[pi].is_none() && !taken[ci] {
                    assigned[pi] = Some(ci);
                    taken[ci] = true;
                }
            }
            for (pi, p) in pairs.iter().enumerate() {
                let chosen = assigned[pi].or_else(|| {
                    (0..candidates.len())
                        .filter(|&ci| !taken[ci])
                        .min_by(|&a, &b| distance(p, &candidates[a]).total_cmp(&distance(p, &candidates[b])))
                });
                per_pair[pi].push(match chosen {
                    Some(ci) => ScaleGap {
                        scale,
                        gap: candidates[ci].gap,
                        time: candidates[ci].time,
                        tolerance: candidates[ci].tolerance,
                    },
                    None => ScaleGap { scale, gap: f64::INFINITY, time: p.0.time, tolerance: 0.0 },
                });
            }
        }
    }
    let verdicts: Vec<CrossingVerdict> = pairs
        .into_iter()
        .zip(per_pair)
        .map(|((event, pair, required_exact), per_scale)| {
            let classified_exact = !per_scale.is_empty() && per_scale.iter().all(|s| s.gap < s.tolerance);
            let worst = per_scale.iter().max_by(|a, b| a.gap.total_cmp(&b.gap));
            let (min_gap, min_gap_time) = worst.map_or((f64::NAN, event.time), |s| (s.gap, s.time));
            CrossingVerdict { event, pair, required_exact, min_gap, min_gap_time, classified_exact, per_scale }
        })
        .collect();
    let required = verdicts.iter().filter(|v| v.required_exact).count();
    let exact = verdicts.iter().filter(|v| v.required_exact && v.classified_exact).count();
    Ok(Ic2Report { holds: exact == required, scales: scales.to_vec(), required, exact, verdicts })
}
