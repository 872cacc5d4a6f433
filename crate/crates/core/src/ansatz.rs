//! Semiclassical matrix-product solution.
//!
//! Coupled crossing points are visited in chronological order; each
//! contributes a truncated scattering block (only the ±i turn factors are
//! kept, dynamical phases are dropped). The full scattering matrix is the
//! time-ordered product of the blocks lifted to all levels.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_level_graph, grouping_tolerance, CrossingEvent};
use crate::matrix::{AmplitudeMatrix, ProbabilityMatrix};
use crate::model::{DiabaticModel, GaugeSpec};
use crate::propagate::{transition_matrix_numeric, IntegrationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Lz2,
    /// Hub level coupled to two levels whose slopes lie on the same side.
    BowtieOneSided,
    /// Hub slope strictly between the slopes of its two partners.
    BowtieStraddle,
    Spin1,
    Numeric,
}

/// Truncated scattering block over `levels` (global indices, ascending
/// except for three-level blocks, which use the order documented per kind).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingBlock {
    pub event: CrossingEvent,
    pub kind: BlockKind,
    pub levels: Vec<usize>,
    pub s: Option<DMatrix<Complex64>>,
    pub p: DMatrix<f64>,
}

fn sgn(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn local_event(n: usize) -> CrossingEvent {
    CrossingEvent { time: 0.0, energy: 0.0, levels: (0..n).collect(), coupled: true }
}

/// Two-level Landau-Zener block, p = exp(−2πg²/|β1 − β2|); the turn factor
/// carries the sign of g.
pub fn block_lz2(g: f64, beta1: f64, beta2: f64) -> Result<CrossingBlock> {
    if beta1 == beta2 {
        return Err(Error::EqualSlopes);
    }
    let p = (-2.0 * PI * g * g / (beta1 - beta2).abs()).exp();
    let (a, b) = (p.sqrt(), Complex64::new(0.0, sgn(g) * (1.0 - p).sqrt()));
    let s = DMatrix::from_row_slice(2, 2, &[Complex64::new(a, 0.0), b, b, Complex64::new(a, 0.0)]);
    let pm = s.map(|z| z.norm_sqr());
    Ok(CrossingBlock { event: local_event(2), kind: BlockKind::Lz2, levels: vec![0, 1], s: Some(s), p: pm })
}

/// Slope arrangement of a three-level bow-tie crossing, relative to the hub.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BowtiePattern {
    /// Both partners on the same side of the hub slope; `far`/`near` are the
    /// absolute slope differences to the hub (far > near).
    OneSided { far: f64, near: f64 },
    /// Hub slope between the partners; `low`/`high` are the absolute slope
    /// differences to the lower- and higher-slope partner.
    Straddle { low: f64, high: f64 },
}

/// Three-level bow-tie block.
///
/// One-sided pattern, local order (hub, far, near), amplitudes with
/// X = exp(−πG_far²/Δ_far), Y = exp(−πG_near²/Δ_near). Straddle pattern,
/// local order (low, hub, high), probabilities only, with
/// p_j = exp(−πG_j²/Δ_j).
pub fn block_bowtie3(coupling_first: f64, coupling_second: f64, pattern: BowtiePattern) -> Result<CrossingBlock> {
    match pattern {
        BowtiePattern::OneSided { far, near } => {
            if !(far > near && near > 0.0) {
                return Err(Error::NotBowtie(format!("one-sided slope gaps far = {far}, near = {near}")));
            }
            let (gf, gn) = (coupling_first, coupling_second);
            let x = (-PI * gf * gf / far).exp();
            let y = (-PI * gn * gn / near).exp();
            let r = |v: f64| v.max(0.0).sqrt();
            let i = |v: f64| Complex64::new(0.0, v);
            let re = |v: f64| Complex64::new(v, 0.0);
            let (sf, sn) = (sgn(gf), sgn(gn));
            let hub_far = i(sf * r((1.0 - x) * (1.0 + x * y)));
            let hub_near = i(sn * r(x * (1.0 - y) * (1.0 + x * y)));
            let far_near = re(-sf * sn * r(x * (1.0 - x) * (1.0 - y)));
            let s = DMatrix::from_row_slice(
                3,
                3,
                &[re(x * y), hub_far, hub_near, hub_far, re(x), far_near, hub_near, far_near, re(1.0 - x + x * y)],
            );
            let p = s.map(|z| z.norm_sqr());
            Ok(CrossingBlock { event: local_event(3), kind: BlockKind::BowtieOneSided, levels: vec![0, 1, 2], s: Some(s), p })
        }
        BowtiePattern::Straddle { low, high } => {
            if !(low > 0.0 && high > 0.0) {
                return Err(Error::NotBowtie(format!("straddle slope gaps low = {low}, high = {high}")));
            }
            let pl = (-PI * coupling_first * coupling_first / low).exp();
            let ph = (-PI * coupling_second * coupling_second / high).exp();
            Ok(CrossingBlock {
                event: local_event(3),
                kind: BlockKind::BowtieStraddle,
                levels: vec![0, 1, 2],
                s: None,
                p: straddle_p(pl, ph),
            })
        }
    }
}

fn straddle_p(pl: f64, ph: f64) -> DMatrix<f64> {
    let (ql, qh, s) = (1.0 - pl, 1.0 - ph, pl + ph);
    DMatrix::from_row_slice(3, 3, &[pl * pl, ql * s, ql * qh, ql * s, (1.0 - s) * (1.0 - s), qh * s, ql * qh, qh * s, ph * ph])
}

/// Spin-1 (equally spaced slopes, equal couplings √2·g) probability block in
/// slope order; `slope_gap` is the difference between the extreme slopes and
/// p = exp(−4πg²/slope_gap).
pub fn block_spin1(g: f64, slope_gap: f64) -> Result<CrossingBlock> {
    if !(slope_gap.abs() > 0.0) || !slope_gap.is_finite() {
        return Err(Error::NotSpin1Pattern(format!("slope gap {slope_gap}")));
    }
    let p = (-4.0 * PI * g * g / slope_gap.abs()).exp();
    Ok(CrossingBlock { event: local_event(3), kind: BlockKind::Spin1, levels: vec![0, 1, 2], s: None, p: straddle_p(p, p) })
}

/// Coupled crossing points in chronological order (ties by lowest level).
pub fn crossing_sequence(model: &DiabaticModel) -> Result<Vec<CrossingEvent>> {
    let graph = build_level_graph(model);
    let mut seq: Vec<CrossingEvent> = graph
        .vertices
        .iter()
        .map(|v| CrossingEvent { time: v.time, energy: v.energy, levels: v.levels.clone(), coupled: true })
        .collect();
    seq.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.levels[0].cmp(&b.levels[0])));
    for (k, a) in seq.iter().enumerate() {
        for b in &seq[k + 1..] {
            if (b.time - a.time).abs() > grouping_tolerance(a.time, a.energy) {
                break;
            }
            if a.levels.iter().any(|l| b.levels.contains(l)) {
                return Err(Error::OverlappingSimultaneousEvents { t: a.time });
            }
        }
    }
    Ok(seq)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzOptions {
    /// Propagate unrecognized multi-level crossings numerically (probabilities only).
    pub numeric_fallback: bool,
    pub fallback_config: IntegrationConfig,
}

impl Default for AnsatzOptions {
    fn default() -> Self {
        Self { numeric_fallback: true, fallback_config: IntegrationConfig::default() }
    }
}

/// Identifies the block for one coupled crossing point.
pub fn classify_block(model: &DiabaticModel, event: &CrossingEvent, opts: &AnsatzOptions) -> Result<CrossingBlock> {
    let lv = &event.levels;
    let b = model.slopes();
    let with_event = |mut blk: CrossingBlock, levels: Vec<usize>| {
        blk.event = event.clone();
        blk.levels = levels;
        blk
    };
    if lv.len() == 2 {
        let blk = block_lz2(model.coupling(lv[0], lv[1]), b[lv[0]], b[lv[1]])?;
        return Ok(with_event(blk, lv.clone()));
    }
    if lv.len() == 3 {
        let coupled = |x: usize, y: usize| model.coupling(x, y) != 0.0;
        let hubs: Vec<usize> = lv.iter().copied().filter(|&h| lv.iter().all(|&o| o == h || coupled(h, o))).collect();
        if hubs.len() == 1 {
            let hub = hubs[0];
            let mut others: Vec<usize> = lv.iter().copied().filter(|&o| o != hub).collect();
            others.sort_by(|&x, &y| b[x].total_cmp(&b[y]));
            let (lo, hi) = (others[0], others[1]);
            if b[lo] < b[hub] && b[hub] < b[hi] {
                let (dl, dh) = (b[hub] - b[lo], b[hi] - b[hub]);
                let (gl, gh) = (model.coupling(lo, hub), model.coupling(hub, hi));
                if dl == dh && gl.abs() == gh.abs() {
                    let blk = block_spin1(gl / std::f64::consts::SQRT_2, dl + dh)?;
                    return Ok(with_event(blk, vec![lo, hub, hi]));
                }
                let blk = block_bowtie3(gl, gh, BowtiePattern::Straddle { low: dl, high: dh })?;
                return Ok(with_event(blk, vec![lo, hub, hi]));
            }
            let (d0, d1) = ((b[others[0]] - b[hub]).abs(), (b[others[1]] - b[hub]).abs());
            if d0 != d1 {
                let (far, near) = if d0 > d1 { (others[0], others[1]) } else { (others[1], others[0]) };
                let pattern = BowtiePattern::OneSided { far: d0.max(d1), near: d0.min(d1) };
                let blk = block_bowtie3(model.coupling(hub, far), model.coupling(hub, near), pattern)?;
                return Ok(with_event(blk, vec![hub, far, near]));
            }
        }
    }
    if !opts.numeric_fallback {
        return Err(Error::UnknownBlockKind { t: event.time, reason: format!("{}-level crossing", lv.len()) });
    }
    let local = model
        .projected(lv)
        .apply_gauge(&GaugeSpec::TimeShift(event.time))?
        .apply_gauge(&GaugeSpec::CommonOffset(-event.energy))?;
    let p = transition_matrix_numeric(&local, &opts.fallback_config)?;
    Ok(CrossingBlock { event: event.clone(), kind: BlockKind::Numeric, levels: lv.clone(), s: None, p: p.0 })
}

pub fn crossing_blocks(model: &DiabaticModel, opts: &AnsatzOptions) -> Result<Vec<CrossingBlock>> {
    crossing_sequence(model)?.iter().map(|ev| classify_block(model, ev, opts)).collect()
}

/// Embeds a block into `identity` (the n×n identity) on `levels`.
fn lift<T: nalgebra::Scalar + Copy>(mut identity: DMatrix<T>, block: &DMatrix<T>, levels: &[usize]) -> DMatrix<T> {
    for (i, &a) in levels.iter().enumerate() {
        for (j, &c) in levels.iter().enumerate() {
            identity[(a, c)] = block[(i, j)];
        }
    }
    identity
}

/// Time-ordered product of truncated amplitude blocks.
pub fn ansatz_scattering(model: &DiabaticModel) -> Result<AmplitudeMatrix> {
    let opts = AnsatzOptions { numeric_fallback: false, ..AnsatzOptions::default() };
    let blocks = crossing_blocks(model, &opts)?;
    scattering_from_blocks(model.n_levels(), &blocks)
}

fn scattering_from_blocks(n: usize, blocks: &[CrossingBlock]) -> Result<AmplitudeMatrix> {
    let mut total = DMatrix::identity(n, n);
    for blk in blocks {
        let s = blk.s.as_ref().ok_or_else(|| Error::UnknownBlockKind {
            t: blk.event.time,
            reason: format!("{:?} block has no amplitude form", blk.kind),
        })?;
        total = lift(DMatrix::identity(n, n), s, &blk.levels) * total;
    }
    Ok(AmplitudeMatrix(total))
}

pub fn ansatz_probabilities(model: &DiabaticModel) -> Result<ProbabilityMatrix> {
    ansatz_probabilities_with(model, &AnsatzOptions::default())
}

/// Product of probability blocks when no paths interfere; otherwise the
/// squared modulus of the amplitude product.
pub fn ansatz_probabilities_with(model: &DiabaticModel, opts: &AnsatzOptions) -> Result<ProbabilityMatrix> {
    let n = model.n_levels();
    let interference = has_interference(model);
    if interference {
        let strict = AnsatzOptions { numeric_fallback: false, ..opts.clone() };
        let blocks = crossing_blocks(model, &strict)?;
        return Ok(scattering_from_blocks(n, &blocks)?.probabilities());
    }
    let blocks = crossing_blocks(model, opts)?;
    let mut total = DMatrix::identity(n, n);
    for blk in &blocks {
        total = lift(DMatrix::identity(n, n), &blk.p, &blk.levels) * total;
    }
    Ok(ProbabilityMatrix(total))
}

/// Counts forward-in-time paths between every pair of levels; true if any
/// pair is joined by two or more.
pub fn has_interference(model: &DiabaticModel) -> bool {
    let n = model.n_levels();
    let graph = build_level_graph(model);
    let mut seq: Vec<&Vec<usize>> = Vec::new();
    let mut order: Vec<usize> = (0..graph.vertices.len()).collect();
    order.sort_by(|&a, &b| graph.vertices[a].time.total_cmp(&graph.vertices[b].time));
    for v in order {
        seq.push(&graph.vertices[v].levels);
    }
    (0..n).any(|start| {
        let mut counts = vec![0u64; n];
        counts[start] = 1;
        for levels in &seq {
            let total: u64 = levels.iter().map(|&l| counts[l]).fold(0, u64::saturating_add);
            for &l in levels.iter() {
                counts[l] = total;
            }
        }
        counts.iter().any(|&c| c >= 2)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalPath {
    /// Levels occupied, in order, starting with the initial level.
    pub levels: Vec<usize>,
    /// Times at which the path turns from one level to the next.
    pub turn_times: Vec<f64>,
    pub amplitude_re: f64,
    pub amplitude_im: f64,
    pub probability: f64,
}

impl SemiclassicalPath {
    pub fn amplitude(&self) -> Complex64 {
        Complex64::new(self.amplitude_re, self.amplitude_im)
    }
}

/// All forward-in-time paths from `start` to `end` through pairwise crossings.
pub fn enumerate_paths(model: &DiabaticModel, start: usize, end: usize) -> Result<Vec<SemiclassicalPath>> {
    let n = model.n_levels();
    for l in [start, end] {
        if l >= n {
            return Err(Error::LevelOutOfRange { index: l + 1, n });
        }
    }
    let seq = crossing_sequence(model)?;
    let mut out = Vec::new();
    struct Walk {
        levels: Vec<usize>,
        turns: Vec<f64>,
        amp: Complex64,
    }
    let mut stack = vec![(0usize, Walk { levels: vec![start], turns: Vec::new(), amp: Complex64::new(1.0, 0.0) })];
    while let Some((k, walk)) = stack.pop() {
        let current = *walk.levels.last().unwrap();
        let next = seq[k..].iter().position(|ev| ev.levels.contains(&current)).map(|p| p + k);
        let Some(idx) = next else {
            if current == end {
                out.push(SemiclassicalPath {
                    probability: walk.amp.norm_sqr(),
                    amplitude_re: walk.amp.re,
                    amplitude_im: walk.amp.im,
                    levels: walk.levels,
                    turn_times: walk.turns,
                });
            }
            continue;
        };
        let ev = &seq[idx];
        if ev.levels.len() > 2 {
            return Err(Error::MultiLevelEventOnPath(ev.levels.len()));
        }
        let other = if ev.levels[0] == current { ev.levels[1] } else { ev.levels[0] };
        let blk = block_lz2(model.coupling(current, other), model.slopes()[current], model.slopes()[other])?;
        let s = blk.s.unwrap();
        let mut turned = Walk { levels: walk.levels.clone(), turns: walk.turns.clone(), amp: walk.amp * s[(1, 0)] };
        turned.levels.push(other);
        turned.turns.push(ev.time);
        stack.push((idx + 1, turned));
        stack.push((idx + 1, Walk { amp: walk.amp * s[(0, 0)], ..walk }));
    }
    Ok(out)
}
