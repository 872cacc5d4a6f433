//! Named models with their parameter schemas, constraint solvers and
//! closed-form transition probabilities.
//!
//! Every matrix here follows the crate convention `P[final][initial]`.
//! Parameter names follow the usual notation for each model, so published
//! parameter sets can be entered directly.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{build_sector_model, do_amplitudes_chronological, enumerate_basis, fermion_transition_det, SecondQuantizedSpec};
use crate::matrix::ProbabilityMatrix;
use crate::model::DiabaticModel;

/// Numeric parameters plus a few string labels (branch selectors).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub values: BTreeMap<String, f64>,
    pub labels: BTreeMap<String, String>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.set(key, value);
        self
    }

    pub fn with_label(mut self, key: &str, value: &str) -> Self {
        self.labels.insert(key.to_string(), value.to_string());
        self
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.values.insert(key.to_string(), value);
    }

    /// Parses `k=v` items; values that are not numbers become labels.
    pub fn parse<S: AsRef<str>>(items: &[S]) -> Result<Self> {
        let mut out = Self::new();
        for item in items {
            for part in item.as_ref().split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (k, v) = part
                    .split_once('=')
                    .ok_or_else(|| Error::SchemaViolation(format!("expected key=value, got '{part}'")))?;
                let (k, v) = (k.trim(), v.trim());
                if k.is_empty() {
                    return Err(Error::SchemaViolation(format!("empty key in '{part}'")));
                }
                match v.parse::<f64>() {
                    Ok(x) => out.set(k, x),
                    Err(_) => {
                        out.labels.insert(k.to_string(), v.to_string());
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub fn label(&self, key: &str) -> Option<&str> {
        self.labels.get(key).map(String::as_str)
    }

    fn num(&self, key: &str) -> Result<f64> {
        self.get(key).ok_or_else(|| Error::SchemaViolation(format!("missing parameter '{key}'")))
    }

    fn count(&self, key: &str) -> Result<usize> {
        let v = self.num(key)?;
        if v < 0.0 || v.fract() != 0.0 || v > 64.0 {
            return Err(Error::SchemaViolation(format!("'{key}' must be a small non-negative integer, got {v}")));
        }
        Ok(v as usize)
    }

    fn indexed(&self, prefix: &str, n: usize) -> Result<Vec<f64>> {
        (1..=n).map(|k| self.num(&format!("{prefix}{k}"))).collect()
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, v) in &self.values {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{k}={v}")?;
        }
        for (k, v) in &self.labels {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: String,
    pub default: f64,
    pub doc: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelSpec {
    pub name: String,
    pub choices: Vec<String>,
    pub default: String,
}

/// Description of a catalog model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: Vec<ParamSpec>,
    pub labels: Vec<LabelSpec>,
    /// Accepts `e<k>` and `g<k>` for k = 1..N−1 in addition to `params`.
    pub indexed_band: bool,
    /// Some parameters are derived from the integrability conditions.
    pub constrained: bool,
    pub has_analytic: bool,
    /// Exact adiabatic crossings expected at the default parameters.
    pub expected_exact_crossings: Option<usize>,
}

fn p(name: &str, default: f64, doc: &str) -> ParamSpec {
    ParamSpec { name: name.to_string(), default, doc: doc.to_string() }
}

fn l(name: &str, choices: &[&str]) -> LabelSpec {
    LabelSpec {
        name: name.to_string(),
        choices: choices.iter().map(|s| s.to_string()).collect(),
        default: choices[0].to_string(),
    }
}

pub const NAMES: [&str; 8] = [
    "do3",
    "doN",
    "bosonic6",
    "four-state",
    "four-state-ic1-broken",
    "distorted-bosonic6",
    "interference6",
    "fermionic",
];

fn four_state_params() -> Vec<ParamSpec> {
    vec![
        p("b1", 1.5, "slope magnitude of levels 1 and 2"),
        p("b2", 0.4, "slope of level 4"),
        p("b", -0.35, "slope of level 3, in (-b1, b1)"),
        p("e", 0.3, "common offset of levels 1 and 2"),
        p("e2", 0.1, "antisymmetric offset of levels 1 and 2"),
        p("g", 0.25, "coupling of levels 2 and 4"),
        p("gamma", 0.1875, "coupling of levels 2 and 3"),
    ]
}

pub fn list() -> Vec<CatalogEntry> {
    NAMES.iter().map(|n| entry(n).expect("listed names resolve")).collect()
}

pub fn entry(name: &str) -> Result<CatalogEntry> {
    let e = match name {
        "do3" => CatalogEntry {
            name: "do3",
            summary: "three-state Demkov-Osherov model: level t/2 crossing two parallel levels",
            params: vec![
                p("e1", -1.0, "lower band level"),
                p("e2", 1.0, "upper band level"),
                p("g1", 0.67, "coupling to level 2"),
                p("g2", 0.469, "coupling to level 3"),
            ],
            labels: vec![],
            indexed_band: false,
            constrained: false,
            has_analytic: true,
            expected_exact_crossings: Some(0),
        },
        "doN" => CatalogEntry {
            name: "doN",
            summary: "N-state Demkov-Osherov model: level beta*t crossing N-1 flat levels e_k with couplings g_k",
            params: vec![
                p("N", 4.0, "number of levels"),
                p("beta", 1.0, "slope of the driven level"),
                p("e1", -1.0, "band level 1"),
                p("e2", 0.0, "band level 2"),
                p("e3", 1.5, "band level 3"),
                p("g1", 0.55, "coupling to band level 1"),
                p("g2", 0.4125, "coupling to band level 2"),
                p("g3", 0.4675, "coupling to band level 3"),
            ],
            labels: vec![],
            indexed_band: true,
            constrained: false,
            has_analytic: true,
            expected_exact_crossings: Some(0),
        },
        "bosonic6" => CatalogEntry {
            name: "bosonic6",
            summary: "two bosons in three modes: bosonic extension of the three-state Demkov-Osherov model",
            params: vec![
                p("e1", -1.0, "mode energy 1 (e1 < e2)"),
                p("e2", 1.0, "mode energy 2"),
                p("g1", 0.67, "coupling of mode 1 to the driven mode"),
                p("g2", 0.469, "coupling of mode 2 to the driven mode"),
            ],
            labels: vec![],
            indexed_band: false,
            constrained: false,
            has_analytic: true,
            expected_exact_crossings: Some(3),
        },
        "four-state" => CatalogEntry {
            name: "four-state",
            summary: "four-state model with a free slope b; e1, x, y are fixed by the integrability conditions",
            params: four_state_params(),
            labels: vec![l("phase", &["interference", "plain"])],
            indexed_band: false,
            constrained: true,
            has_analytic: true,
            expected_exact_crossings: Some(2),
        },
        "four-state-ic1-broken" => CatalogEntry {
            name: "four-state-ic1-broken",
            summary: "four-state model with e1 detuned from the zero-area root; x, y from the second-order conditions",
            params: {
                let mut v: Vec<ParamSpec> = four_state_params().into_iter().filter(|s| s.name != "e2").collect();
                for s in v.iter_mut().filter(|s| s.name == "e") {
                    s.default = -1.55;
                }
                v.push(p("detune", 0.3, "shift of e1 away from the zero-area root"));
                v
            },
            labels: vec![],
            indexed_band: false,
            constrained: true,
            has_analytic: false,
            expected_exact_crossings: None,
        },
        "distorted-bosonic6" => CatalogEntry {
            name: "distorted-bosonic6",
            summary: "six-state bosonic graph with three-state bow-tie crossings and free e1, e2, g, gamma",
            params: vec![
                p("e1", -0.5, "band level 1 (e1 < e2)"),
                p("e2", 0.65, "band level 2"),
                p("g", 0.38, "pairwise coupling"),
                p("gamma", 0.779, "bow-tie coupling"),
            ],
            labels: vec![],
            indexed_band: false,
            constrained: false,
            has_analytic: true,
            expected_exact_crossings: Some(3),
        },
        "interference6" => CatalogEntry {
            name: "interference6",
            summary: "six-state model with exchanged slopes and interfering semiclassical paths",
            params: vec![
                p("e", 1.0, "level spacing (e > 0)"),
                p("g", 0.65, "coupling g"),
                p("gamma", 1.0, "coupling gamma"),
            ],
            labels: vec![],
            indexed_band: false,
            constrained: false,
            has_analytic: true,
            expected_exact_crossings: Some(3),
        },
        "fermionic" => CatalogEntry {
            name: "fermionic",
            summary: "interacting fermions: driven dot beta*t, N-1 dots e_k, hopping g_k, quartic factor x",
            params: vec![
                p("N", 4.0, "number of dots including the driven one"),
                p("NF", 2.0, "number of fermions"),
                p("beta", 1.0, "slope of the driven dot"),
                p("x", -0.5, "interaction factor"),
                p("e1", -1.0, "dot energy 1"),
                p("e2", 0.0, "dot energy 2"),
                p("e3", 1.5, "dot energy 3"),
                p("g1", 0.55, "hopping to dot 1"),
                p("g2", 0.4125, "hopping to dot 2"),
                p("g3", 0.4675, "hopping to dot 3"),
            ],
            labels: vec![],
            indexed_band: true,
            constrained: false,
            has_analytic: true,
            expected_exact_crossings: Some(3),
        },
        other => return Err(Error::UnknownModel(other.to_string())),
    };
    Ok(e)
}

fn is_band_key(key: &str) -> bool {
    let mut chars = key.chars();
    matches!(chars.next(), Some('e' | 'g')) && {
        let rest = chars.as_str();
        !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit())
    }
}

impl CatalogEntry {
    /// Fills defaults and rejects unknown keys or labels.
    pub fn resolve(&self, given: &Params) -> Result<Params> {
        let mut out = Params::new();
        for spec in &self.params {
            out.set(&spec.name, spec.default);
        }
        for spec in &self.labels {
            out.labels.insert(spec.name.clone(), spec.default.clone());
        }
        for (k, &v) in &given.values {
            let known = self.params.iter().any(|s| &s.name == k) || (self.indexed_band && is_band_key(k));
            if !known {
                return Err(Error::SchemaViolation(format!("'{}' has no parameter '{k}'", self.name)));
            }
            if !v.is_finite() {
                return Err(Error::SchemaViolation(format!("parameter '{k}' is not finite")));
            }
            out.set(k, v);
        }
        for (k, v) in &given.labels {
            let spec = self
                .labels
                .iter()
                .find(|s| &s.name == k)
                .ok_or_else(|| Error::SchemaViolation(format!("'{}' has no label '{k}'", self.name)))?;
            if !spec.choices.contains(v) {
                return Err(Error::SchemaViolation(format!("'{k}' must be one of {:?}, got '{v}'", spec.choices)));
            }
            out.labels.insert(k.clone(), v.clone());
        }
        if self.indexed_band {
            let n = out.count("N")?;
            if n < 2 {
                return Err(Error::SchemaViolation("N must be at least 2".into()));
            }
            out.indexed("e", n - 1)?;
            out.indexed("g", n - 1)?;
            if let Some(k) = out.values.keys().filter(|k| is_band_key(k)).find(|k| k[1..].parse::<usize>().map_or(true, |i| i == 0 || i >= n)) {
                return Err(Error::SchemaViolation(format!("'{k}' is outside the band of N = {n}")));
            }
        }
        Ok(out)
    }
}

/// Which root of the zero-area quadratic is taken for e1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Root {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XySigns {
    Same,
    Opposite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourStateBranch {
    pub root: Root,
    /// Sign of e in the gauge where e2 = 0 (+1 or −1).
    pub sign_e: f64,
    pub xy_signs: XySigns,
}

impl FourStateBranch {
    /// Branch realizing the requested phase for the given sign of e.
    pub fn for_phase(interference: bool, e: f64) -> Self {
        let positive = e >= 0.0;
        let root = if interference == positive { Root::Minus } else { Root::Plus };
        let xy_signs = if interference { XySigns::Same } else { XySigns::Opposite };
        Self { root, sign_e: if positive { 1.0 } else { -1.0 }, xy_signs }
    }

    /// Interference iff (minus, e > 0) or (plus, e < 0).
    pub fn interference(&self) -> bool {
        (self.root == Root::Minus) == (self.sign_e > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourStateSolution {
    pub e1: f64,
    pub x: f64,
    pub y: f64,
    /// e = 0 collapses both roots onto e1 = 0.
    pub degenerate: bool,
}

/// e1 from the zero-area condition and x, y from the third-order
/// exact-crossing conditions, in the gauge e2 = 0.
pub fn solve_four_state_constraints(b1: f64, b2: f64, b: f64, e: f64, branch: FourStateBranch) -> Result<FourStateSolution> {
    if !(b1 > b2) {
        return Err(Error::OutOfRange(format!("need b1 > b2, got b1 = {b1}, b2 = {b2}")));
    }
    if !(b > -b1 && b < b1) {
        return Err(Error::OutOfRange(format!("need -b1 < b < b1, got b = {b} with b1 = {b1}")));
    }
    if b2 <= -b1 {
        return Err(Error::OutOfRange(format!("need b1 + b2 > 0, got b1 = {b1}, b2 = {b2}")));
    }
    let r = e.abs() * ((b1 * b1 - b * b) / (b1 * b1 - b2 * b2)).sqrt();
    let e1 = match branch.root {
        Root::Plus => e + r,
        Root::Minus => e - r,
    };
    let x = ((b1 + b2) / (b1 - b)).sqrt();
    let y = ((b1 + b) / (b1 - b2)).sqrt();
    let y = match branch.xy_signs {
        XySigns::Same => y,
        XySigns::Opposite => -y,
    };
    Ok(FourStateSolution { e1, x, y, degenerate: e == 0.0 })
}

/// x, y from the second-order conditions at the two uncoupled crossings for
/// an arbitrary e1 (gauge e2 = 0); x is taken positive.
pub fn second_order_xy(b1: f64, b2: f64, b: f64, e: f64, e1: f64) -> Result<(f64, f64)> {
    let e13 = e - e1;
    let e14 = e;
    let e32 = -e - e1 * (b1 - b2) / (b2 - b);
    let e31 = -e + e1 * (b1 + b2) / (b2 - b);
    let ratio = e31 * e14 / (e32 * e13);
    if !ratio.is_finite() || ratio <= 0.0 {
        return Err(Error::ConstraintViolation(format!("second-order conditions have no real solution (x² = {ratio})")));
    }
    let x = ratio.sqrt();
    Ok((x, x * e13 / e14))
}

/// Levels −b1 t + e + e2, b1 t + e − e2, b t + e1, b2 t with couplings
/// (1,3) = g y, (1,4) = −γ x, (2,3) = γ, (2,4) = g.
#[allow(clippy::too_many_arguments)]
pub fn four_state_model(b1: f64, b2: f64, b: f64, e: f64, e1: f64, e2: f64, g: f64, gamma: f64, x: f64, y: f64) -> Result<DiabaticModel> {
    DiabaticModel::new(
        vec![-b1, b1, b, b2],
        vec![e + e2, e - e2, e1, 0.0],
        vec![(0, 2, g * y), (0, 3, -gamma * x), (1, 2, gamma), (1, 3, g)],
    )
}

struct FourState {
    b1: f64,
    b2: f64,
    b: f64,
    e: f64,
    e2: f64,
    g: f64,
    gamma: f64,
    interference: bool,
}

impl FourState {
    fn read(p: &Params) -> Result<Self> {
        Ok(Self {
            b1: p.num("b1")?,
            b2: p.num("b2")?,
            b: p.num("b")?,
            e: p.num("e")?,
            e2: p.get("e2").unwrap_or(0.0),
            g: p.num("g")?,
            gamma: p.num("gamma")?,
            interference: p.label("phase").map_or(true, |s| s == "interference"),
        })
    }

    /// e in the gauge that removes e2: shift t by e2/b1, then drop the
    /// common offset b2·e2/b1.
    fn e_prime(&self) -> f64 {
        self.e - self.b2 * self.e2 / self.b1
    }

    fn solve(&self) -> Result<FourStateSolution> {
        let ep = self.e_prime();
        let branch = FourStateBranch::for_phase(self.interference, ep);
        let mut s = solve_four_state_constraints(self.b1, self.b2, self.b, ep, branch)?;
        s.e1 -= (self.b - self.b2) * self.e2 / self.b1;
        Ok(s)
    }
}

fn lz(g: f64, slope_gap: f64) -> f64 {
    (-2.0 * PI * g * g / slope_gap.abs()).exp()
}

fn ordered_band(energies: &[f64]) -> bool {
    energies.windows(2).all(|w| w[0] < w[1])
}

/// Builds the model named `name` at `params` (defaults filled in).
pub fn make_model(name: &str, params: &Params) -> Result<DiabaticModel> {
    let entry = entry(name)?;
    let p = entry.resolve(params)?;
    match name {
        "do3" => DiabaticModel::new(
            vec![0.5, -0.5, -0.5],
            vec![0.0, p.num("e1")?, p.num("e2")?],
            vec![(0, 1, p.num("g1")?), (0, 2, p.num("g2")?)],
        ),
        "doN" => {
            let n = p.count("N")?;
            let spec = SecondQuantizedSpec::fermion(p.num("beta")?, p.indexed("e", n - 1)?, p.indexed("g", n - 1)?, 0.0);
            build_sector_model(&spec, 1)
        }
        "bosonic6" => {
            let spec = SecondQuantizedSpec::boson(vec![p.num("e1")?, p.num("e2")?], vec![p.num("g1")?, p.num("g2")?]);
            build_sector_model(&spec, 2)
        }
        "four-state" => {
            let f = FourState::read(&p)?;
            let s = f.solve()?;
            if s.degenerate {
                return Err(Error::ConstraintViolation("e' = 0 makes both roots coincide at e1 = 0".into()));
            }
            four_state_model(f.b1, f.b2, f.b, f.e, s.e1, f.e2, f.g, f.gamma, s.x, s.y)
        }
        "four-state-ic1-broken" => {
            let f = FourState::read(&p)?;
            let s = f.solve()?;
            let e1 = s.e1 + p.num("detune")?;
            let (x, y) = second_order_xy(f.b1, f.b2, f.b, f.e, e1)?;
            four_state_model(f.b1, f.b2, f.b, f.e, e1, 0.0, f.g, f.gamma, x, y)
        }
        "distorted-bosonic6" => {
            let (e1, e2, g, gm) = (p.num("e1")?, p.num("e2")?, p.num("g")?, p.num("gamma")?);
            let r2g = std::f64::consts::SQRT_2 * g;
            DiabaticModel::new(
                vec![-1.0, -1.0, -1.0, 0.0, 0.0, 1.0],
                vec![2.0 * e2, e1 + e2, 2.0 * e1, e2, e1, 0.0],
                vec![(0, 3, gm), (1, 3, g), (1, 4, g), (2, 4, gm), (3, 5, r2g), (4, 5, r2g)],
            )
        }
        "interference6" => {
            let (e, g, gm) = (p.num("e")?, p.num("g")?, p.num("gamma")?);
            DiabaticModel::new(
                vec![-1.0, -1.0, -1.0, 1.0, 1.0, 0.0],
                vec![e, 0.0, -e, -e, e, 0.0],
                vec![(0, 3, gm), (0, 5, g), (1, 3, -g), (1, 4, g), (2, 4, gm), (2, 5, g)],
            )
        }
        "fermionic" => {
            let n = p.count("N")?;
            let nf = p.count("NF")?;
            let spec = SecondQuantizedSpec::fermion(p.num("beta")?, p.indexed("e", n - 1)?, p.indexed("g", n - 1)?, p.num("x")?);
            build_sector_model(&spec, nf)
        }
        _ => unreachable!("entry() accepted the name"),
    }
}

/// Solved (e1, x, y) for the constrained four-state entries.
pub fn four_state_solution(name: &str, params: &Params) -> Result<FourStateSolution> {
    let p = entry(name)?.resolve(params)?;
    let f = FourState::read(&p)?;
    let s = f.solve()?;
    match name {
        "four-state" => Ok(s),
        "four-state-ic1-broken" => {
            let e1 = s.e1 + p.num("detune")?;
            let (x, y) = second_order_xy(f.b1, f.b2, f.b, f.e, e1)?;
            Ok(FourStateSolution { e1, x, y, degenerate: false })
        }
        other => Err(Error::ConstraintViolation(format!("'{other}' has no constraint solver"))),
    }
}

/// Exact adiabatic crossings expected for `name` at `params`.
pub fn expected_exact_crossings(name: &str, params: &Params) -> Result<Option<usize>> {
    let e = entry(name)?;
    if name != "fermionic" {
        return Ok(e.expected_exact_crossings);
    }
    let p = e.resolve(params)?;
    Ok(match (p.count("N")?, p.count("NF")?) {
        (_, 0 | 1) => Some(0),
        (4, 2) => Some(3),
        (5, 2 | 3) => Some(12),
        _ => None,
    })
}

fn embed(n: usize, levels: &[usize], block: &[&[f64]]) -> ProbabilityMatrix {
    let mut m = ProbabilityMatrix::identity(n);
    for (a, &i) in levels.iter().enumerate() {
        for (b, &j) in levels.iter().enumerate() {
            m.0[(i, j)] = block[a][b];
        }
    }
    m
}

fn lz_block(n: usize, i: usize, j: usize, p: f64) -> ProbabilityMatrix {
    embed(n, &[i, j], &[&[p, 1.0 - p], &[1.0 - p, p]])
}

fn spin1_block(n: usize, levels: [usize; 3], p: f64) -> ProbabilityMatrix {
    let q = 1.0 - p;
    let c = (1.0 - 2.0 * p).powi(2);
    embed(n, &levels, &[&[p * p, 2.0 * p * q, q * q], &[2.0 * p * q, c, 2.0 * p * q], &[q * q, 2.0 * p * q, p * p]])
}

fn chain(blocks: &[ProbabilityMatrix]) -> ProbabilityMatrix {
    // blocks are in chronological order; later ones multiply from the left
    let n = blocks[0].dim();
    blocks.iter().fold(ProbabilityMatrix::identity(n), |acc, b| b.product(&acc))
}

/// Four-state interference phase, b1 > b2 > b.
pub fn four_state_interference_low_b(p1: f64, p2: f64) -> ProbabilityMatrix {
    let (q1, q2) = (1.0 - p1, 1.0 - p2);
    ProbabilityMatrix::from_rows(&[
        vec![p1 * p2, 0.0, p2 * q1, q2],
        vec![0.0, p1 * p2, q2, p2 * q1],
        vec![p2 * q1, q2, p1 * p2, 0.0],
        vec![q2, p2 * q1, 0.0, p1 * p2],
    ])
}

/// Four-state interference phase, b1 > b > b2.
pub fn four_state_interference_high_b(p1: f64, p2: f64) -> ProbabilityMatrix {
    let (q1, q2) = (1.0 - p1, 1.0 - p2);
    ProbabilityMatrix::from_rows(&[
        vec![p1 * p2, 0.0, q1, q2 * p1],
        vec![0.0, p1 * p2, q2 * p1, q1],
        vec![q1, q2 * p1, p1 * p2, 0.0],
        vec![q2 * p1, q1, 0.0, p1 * p2],
    ])
}

/// Four-state phase without interference.
pub fn four_state_plain(p1: f64, p2: f64) -> ProbabilityMatrix {
    let (q1, q2) = (1.0 - p1, 1.0 - p2);
    ProbabilityMatrix::from_rows(&[
        vec![p1 * p2, q1 * q2, p2 * q1, p1 * q2],
        vec![q1 * q2, p1 * p2, p1 * q2, p2 * q1],
        vec![p2 * q1, p1 * q2, p1 * p2, q1 * q2],
        vec![p1 * q2, p2 * q1, q1 * q2, p1 * p2],
    ])
}

/// Distorted bosonic six-state matrix; p1 = e^{−2πg²}, p2 = e^{−πγ²}.
pub fn distorted_bosonic6_matrix(p1: f64, p2: f64) -> ProbabilityMatrix {
    let (q1, q2) = (1.0 - p1, 1.0 - p2);
    let s = p1 + p2;
    let r = (1.0 - p1 - p2).powi(2);
    ProbabilityMatrix::from_rows(&[
        vec![p2 * p2, q1 * q2 * s, q1 * q1 * q2 * q2, p1 * q2 * s, q1 * q1 * q2 * s, p1 * p1 * q1 * q2],
        vec![0.0, p1 * p1, q1 * q2 * s, p1 * q1, q1 * r, q1 * q1 * s],
        vec![0.0, 0.0, p2 * p2, 0.0, q2 * s, q1 * q2],
        vec![q2 * s, q1 * r, q1 * q1 * q2 * s, p1 * r, q1 * q1 * s * s, p1 * p1 * q1 * s],
        vec![0.0, p1 * q1, p1 * q2 * s, q1 * q1, p1 * r, p1 * q1 * s],
        vec![q1 * q2, q1 * q1 * s, q1 * p1 * p1 * q2, q1 * p1 * s, q1 * p1 * p1 * s, p1.powi(4)],
    ])
}

/// Interference six-state matrix; X = e^{−πγ²/2}, Y = e^{−πg²}.
///
/// Entry (4, 2) is X²Y(1 − Y): that is what the product of the four
/// crossing blocks gives, and it keeps the matrix doubly stochastic.
pub fn interference6_matrix(x: f64, y: f64) -> ProbabilityMatrix {
    let (qx, qy, qxy) = (1.0 - x, 1.0 - y, 1.0 + x * y);
    ProbabilityMatrix::from_rows(&[
        vec![x * x * y * y, y * qx * qy * qxy, qxy * qxy * qy * qy, y * qx * qxy, 0.0, x * y * y * qy * qxy],
        vec![0.0, y * y, y * qx * qy * qxy, qy, x * x * y * qy, x * y * qx * qy * qy],
        vec![0.0, 0.0, x * x * y * y, 0.0, qx * qxy, x * qy * qxy],
        vec![qx * qxy, x * x * y * qy, 0.0, x * x * y, x * x * qy * qy, x * qx * qy],
        vec![0.0, qy, y * qx * qxy, 0.0, x * x * y, x * y * qx * qy],
        vec![x * qy * qxy, x * y * qx * qy * qy, x * y * y * qy * qxy, x * y * qx * qy, x * qx * qy, (qx + x * y * y).powi(2)],
    ])
}

/// Six-state fermionic sector for x < 1, band ordered e1 < e2 < e3.
pub fn six_state_below(p: [f64; 3]) -> ProbabilityMatrix {
    let [p1, p2, p3] = p;
    let [q1, q2, q3] = p.map(|v| 1.0 - v);
    ProbabilityMatrix::from_rows(&[
        vec![p2 * p3, q1 * q2 * p3, q1 * q3, p1 * q2 * p3, p1 * q3, 0.0],
        vec![0.0, p1 * p3, p1 * q2 * q3, q1 * p3, q1 * q2 * q3, p2 * q3],
        vec![0.0, 0.0, p1 * p2, 0.0, q1 * p2, q2],
        vec![q2, q1 * p2, 0.0, p1 * p2, 0.0, 0.0],
        vec![p2 * q3, q1 * q2 * q3, q1 * p3, p1 * q2 * q3, p1 * p3, 0.0],
        vec![0.0, p1 * q3, p1 * q2 * p3, q1 * q3, q1 * q2 * p3, p2 * p3],
    ])
}

/// Six-state fermionic sector for x > 1, band ordered e1 < e2 < e3.
pub fn six_state_above(p: [f64; 3]) -> ProbabilityMatrix {
    let [p1, p2, p3] = p;
    let [q1, q2, q3] = p.map(|v| 1.0 - v);
    ProbabilityMatrix::from_rows(&[
        vec![p2 * p3, 0.0, 0.0, q2 * p3, q3, 0.0],
        vec![q2 * q1 * p3, p1 * p3, 0.0, p2 * q1 * p3, 0.0, q3],
        vec![q1 * q3, p1 * q3 * q2, p1 * p2, 0.0, p3 * q1 * p2, p3 * q2],
        vec![q2 * p1, q1, 0.0, p1 * p2, 0.0, 0.0],
        vec![p2 * q3 * p1, 0.0, q1, q2 * q3 * p1, p1 * p3, 0.0],
        vec![0.0, p1 * q3 * p2, p1 * q2, q1 * q3, p3 * q1 * q2, p2 * p3],
    ])
}

/// Ten-state sector (five dots, two fermions), columns for initial levels
/// 2 and 3 (1-based) in the phase x < 1.
pub fn ten_state_below_columns(p: [f64; 4]) -> [Vec<f64>; 2] {
    let [p1, p2, p3, p4] = p;
    let [q1, q2, q3, q4] = p.map(|v| 1.0 - v);
    [
        vec![q1 * q2 * p3 * p4, p1 * p3 * p4, 0.0, 0.0, q1 * p2, q1 * q2 * q3, q1 * q2 * p3 * q4, p1 * q3, p1 * p3 * q4, 0.0],
        vec![q1 * q3 * p4, p1 * q2 * q3 * p4, p1 * p2 * p4, 0.0, 0.0, q1 * p3, q1 * q3 * q4, p1 * q2 * p3, p1 * q2 * q3 * q4, p1 * p2 * q4],
    ]
}

/// Same as [`ten_state_below_columns`] for x > 1.
pub fn ten_state_above_columns(p: [f64; 4]) -> [Vec<f64>; 2] {
    let [p1, p2, p3, p4] = p;
    let [q1, q2, q3, q4] = p.map(|v| 1.0 - v);
    [
        vec![0.0, p1 * p3 * p4, p1 * q3 * q2 * p4, p1 * q2 * q4, q1, 0.0, 0.0, p1 * q3 * p2, p1 * p3 * q4 * p2, 0.0],
        vec![0.0, 0.0, p1 * p2 * p4, p1 * p2 * q4 * q3, 0.0, q1, 0.0, p1 * q2, 0.0, p1 * p2 * q4 * p3],
    ]
}

/// Determinant solution of the free-fermion problem in a sector of
/// `n_particles` fermions, valid for every x < 1.
pub fn fermion_det_matrix(beta: f64, energies: &[f64], couplings: &[f64], n_particles: usize) -> Result<ProbabilityMatrix> {
    let spec = SecondQuantizedSpec::fermion(beta, energies.to_vec(), couplings.to_vec(), 0.0);
    let sector = enumerate_basis(&spec, n_particles)?;
    let s = do_amplitudes_chronological(beta, energies, couplings)?;
    let d = sector.dim();
    let mut m = ProbabilityMatrix::identity(d);
    for i in 0..d {
        for f in 0..d {
            m.0[(f, i)] = fermion_transition_det(&s, &sector.basis[i], &sector.basis[f])?;
        }
    }
    Ok(m)
}

struct Fermionic {
    n: usize,
    nf: usize,
    beta: f64,
    x: f64,
    e: Vec<f64>,
    g: Vec<f64>,
}

impl Fermionic {
    fn read(p: &Params) -> Result<Self> {
        let n = p.count("N")?;
        Ok(Self { n, nf: p.count("NF")?, beta: p.num("beta")?, x: p.num("x")?, e: p.indexed("e", n - 1)?, g: p.indexed("g", n - 1)? })
    }

    fn pk(&self) -> Vec<f64> {
        self.g.iter().map(|&g| lz(g, self.beta)).collect()
    }

    fn canonical(&self) -> bool {
        self.beta > 0.0 && ordered_band(&self.e)
    }
}

/// Closed-form transition probability matrix.
pub fn analytic_probabilities(name: &str, params: &Params) -> Result<ProbabilityMatrix> {
    let p = entry(name)?.resolve(params)?;
    match name {
        "do3" => {
            let (e1, e2) = (p.num("e1")?, p.num("e2")?);
            if e1 == e2 {
                return Err(Error::NoAnalyticForm("do3 with e1 = e2 has a single three-level crossing".into()));
            }
            // level 1 meets level k+1 at t = e_k
            let p1 = lz_block(3, 0, 1, lz(p.num("g1")?, 1.0));
            let p2 = lz_block(3, 0, 2, lz(p.num("g2")?, 1.0));
            Ok(if e1 < e2 { p2.product(&p1) } else { p1.product(&p2) })
        }
        "doN" => {
            let n = p.count("N")?;
            let s = do_amplitudes_chronological(p.num("beta")?, &p.indexed("e", n - 1)?, &p.indexed("g", n - 1)?)?;
            Ok(s.probabilities())
        }
        "bosonic6" => {
            let (e1, e2) = (p.num("e1")?, p.num("e2")?);
            if !(e1 < e2) {
                return Err(Error::ConstraintViolation(format!("the product formula assumes e1 < e2, got {e1}, {e2}")));
            }
            let p1 = lz(p.num("g1")?, 1.0);
            let p2 = lz(p.num("g2")?, 1.0);
            Ok(chain(&[spin1_block(6, [2, 4, 5], p1), lz_block(6, 1, 3, p1), lz_block(6, 1, 4, p2), spin1_block(6, [0, 3, 5], p2)]))
        }
        "four-state" => {
            let f = FourState::read(&p)?;
            let s = f.solve()?;
            if s.degenerate {
                return Err(Error::ConstraintViolation("e' = 0 makes both roots coincide at e1 = 0".into()));
            }
            let p1 = lz(f.g, f.b1 - f.b2);
            let p2 = lz(f.gamma, f.b1 - f.b);
            if !f.interference {
                Ok(four_state_plain(p1, p2))
            } else if f.b < f.b2 {
                Ok(four_state_interference_low_b(p1, p2))
            } else if f.b > f.b2 {
                Ok(four_state_interference_high_b(p1, p2))
            } else {
                Err(Error::NoAnalyticForm("b = b2 makes levels 3 and 4 permanently degenerate".into()))
            }
        }
        "distorted-bosonic6" => {
            let (e1, e2) = (p.num("e1")?, p.num("e2")?);
            if !(e1 < e2) {
                return Err(Error::ConstraintViolation(format!("the product formula assumes e1 < e2, got {e1}, {e2}")));
            }
            let g = p.num("g")?;
            let gm = p.num("gamma")?;
            Ok(distorted_bosonic6_matrix(lz(g, 1.0), (-PI * gm * gm).exp()))
        }
        "interference6" => {
            let e = p.num("e")?;
            if !(e > 0.0) {
                return Err(Error::ConstraintViolation(format!("the product formula assumes e > 0, got {e}")));
            }
            let (g, gm) = (p.num("g")?, p.num("gamma")?);
            Ok(interference6_matrix((-PI * gm * gm / 2.0).exp(), (-PI * g * g).exp()))
        }
        "fermionic" => {
            let f = Fermionic::read(&p)?;
            if f.nf == 0 || f.nf >= f.n {
                return Err(Error::BadParticleNumber { n_particles: f.nf, n_sites: f.n });
            }
            if f.nf == 1 {
                // one particle never feels the quartic term
                return Ok(do_amplitudes_chronological(f.beta, &f.e, &f.g)?.probabilities());
            }
            if f.x < 1.0 {
                return fermion_det_matrix(f.beta, &f.e, &f.g, f.nf);
            }
            if f.x > 1.0 && f.n == 4 && f.nf == 2 && f.beta > 0.0 {
                let pk = f.pk();
                let m = six_state_above([pk[0], pk[1], pk[2]]);
                if ordered_band(&f.e) {
                    return Ok(m);
                }
                // a band met in the reverse order gives the transposed matrix
                if f.e.windows(2).all(|w| w[0] > w[1]) {
                    return Ok(ProbabilityMatrix(m.0.transpose()));
                }
            }
            Err(Error::NoAnalyticForm(format!(
                "no closed form for N = {}, NF = {} at x = {}; use the ansatz engine",
                f.n, f.nf, f.x
            )))
        }
        "four-state-ic1-broken" => Err(Error::NoAnalyticForm("the detuned model is compared against the ansatz engine".into())),
        _ => unreachable!("entry() accepted the name"),
    }
}

/// Closed-form columns (0-based initial level, probabilities over final
/// levels). Falls back to the full matrix when one exists.
pub fn analytic_columns(name: &str, params: &Params) -> Result<Vec<(usize, Vec<f64>)>> {
    match analytic_probabilities(name, params) {
        Ok(m) => Ok((0..m.dim()).map(|c| (c, m.column(c))).collect()),
        Err(Error::NoAnalyticForm(why)) if name == "fermionic" => {
            let f = Fermionic::read(&entry(name)?.resolve(params)?)?;
            if f.n == 5 && f.nf == 2 && f.x > 1.0 && f.canonical() {
                let pk = f.pk();
                let [c2, c3] = ten_state_above_columns([pk[0], pk[1], pk[2], pk[3]]);
                Ok(vec![(1, c2), (2, c3)])
            } else {
                Err(Error::NoAnalyticForm(why))
            }
        }
        Err(e) => Err(e),
    }
}
