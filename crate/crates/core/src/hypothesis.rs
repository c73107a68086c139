//! Finite instance spaces, enumerated hypothesis classes and the exact
//! population quantities built on top of them: error rates, distances,
//! balls, disagreement regions and disagreement coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::stats::exact_sum;

/// A binary label, always `-1` or `+1`.
pub type Label = i8;

const MASS_TOL: f64 = 1e-12;

/// Exact joint distribution over a finite instance space together with the
/// logging propensity of every instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWorld", into = "RawWorld")]
pub struct FiniteWorld {
    mass: Vec<f64>,
    label_prob: Vec<f64>,
    q0: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawWorld {
    mass: Vec<f64>,
    label_prob: Vec<f64>,
    q0: Vec<f64>,
}

impl TryFrom<RawWorld> for FiniteWorld {
    type Error = crate::error::CfalError;
    fn try_from(raw: RawWorld) -> Result<Self> {
        FiniteWorld::new(raw.mass, raw.label_prob, raw.q0)
    }
}

impl From<FiniteWorld> for RawWorld {
    fn from(w: FiniteWorld) -> Self {
        RawWorld { mass: w.mass, label_prob: w.label_prob, q0: w.q0 }
    }
}

impl FiniteWorld {
    pub fn new(mass: Vec<f64>, label_prob: Vec<f64>, q0: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return input_err("world has no instances");
        }
        if mass.len() != label_prob.len() || mass.len() != q0.len() {
            return input_err(format!(
                "world vectors differ in length: mass {}, label_prob {}, q0 {}",
                mass.len(),
                label_prob.len(),
                q0.len()
            ));
        }
        if mass.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return input_err("instance masses must lie in [0, 1]");
        }
        let total = exact_sum(mass.iter().copied());
        if (total - 1.0).abs() > MASS_TOL {
            return input_err(format!("instance masses sum to {total}, expected 1"));
        }
        if label_prob.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return input_err("label probabilities must lie in [0, 1]");
        }
        if q0.iter().any(|&q| !(q > 0.0 && q <= 1.0)) {
            return input_err("logging propensities must lie in (0, 1]");
        }
        Ok(Self { mass, label_prob, q0 })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn label_prob(&self) -> &[f64] {
        &self.label_prob
    }

    pub fn q0(&self) -> &[f64] {
        &self.q0
    }

    /// `inf_x Q0(x)`.
    pub fn min_q0(&self) -> f64 {
        self.q0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Pr(Q0(X) <= t)`.
    pub fn propensity_cdf(&self, t: f64) -> f64 {
        exact_sum(self.q0.iter().zip(&self.mass).filter(|(q, _)| **q <= t).map(|(_, p)| *p))
    }

    /// Probability that an instance's label is wrong under prediction `pred`.
    pub fn error_at(&self, x: usize, pred: Label) -> f64 {
        if pred > 0 {
            1.0 - self.label_prob[x]
        } else {
            self.label_prob[x]
        }
    }

    /// Point masses of an instance-level weight function.
    pub fn weight_atoms(&self, weight: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        self.q0.iter().zip(&self.mass).map(|(&q, &p)| (weight(q), p)).collect()
    }
}

/// An enumerated finite hypothesis class. Hypothesis `i` predicts
/// `hypotheses[i][x]` on instance `x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct HypothesisClass {
    hypotheses: Vec<Vec<Label>>,
}

impl HypothesisClass {
    pub fn new(hypotheses: Vec<Vec<Label>>) -> Result<Self> {
        let Some(first) = hypotheses.first() else {
            return input_err("hypothesis class is empty");
        };
        let d = first.len();
        for (i, h) in hypotheses.iter().enumerate() {
            if h.len() != d {
                return input_err(format!("hypothesis {i} has length {}, expected {d}", h.len()));
            }
            if h.iter().any(|&v| v != 1 && v != -1) {
                return input_err(format!("hypothesis {i} has a label outside {{-1, +1}}"));
            }
        }
        Ok(Self { hypotheses })
    }

    /// Every labeling of a `d`-point instance space, in binary counting order
    /// with bit `x` of the index set meaning `h(x) = +1`.
    pub fn all_labelings(d: usize) -> Result<Self> {
        if d == 0 || d > 20 {
            return input_err("all_labelings supports 1..=20 instances");
        }
        let hs = (0..1usize << d)
            .map(|bits| (0..d).map(|x| if bits >> x & 1 == 1 { 1 } else { -1 }).collect())
            .collect();
        Self::new(hs)
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.hypotheses[0].len()
    }

    pub fn get(&self, i: usize) -> &[Label] {
        &self.hypotheses[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Label]> {
        self.hypotheses.iter().map(|h| h.as_slice())
    }

    /// Index pairs `(i, j)`, `i < j`, of identical hypotheses.
    pub fn duplicates(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                if self.hypotheses[i] == self.hypotheses[j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn check_world(&self, world: &FiniteWorld) -> Result<()> {
        if self.dim() != world.len() {
            return input_err(format!(
                "class is over {} instances but world has {}",
                self.dim(),
                world.len()
            ));
        }
        Ok(())
    }
}

/// Subset of a hypothesis class, kept as sorted indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    members: Vec<usize>,
}

impl CandidateSet {
    pub fn full(class: &HypothesisClass) -> Self {
        Self { members: (0..class.len()).collect() }
    }

    pub fn from_indices(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Self { members }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn is_subset_of(&self, other: &CandidateSet) -> bool {
        self.members.iter().all(|&i| other.contains(i))
    }
}

/// Subset of the instance space, stored as a membership mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    mask: Vec<bool>,
}

impl Region {
    pub fn empty(d: usize) -> Self {
        Self { mask: vec![false; d] }
    }

    pub fn whole(d: usize) -> Self {
        Self { mask: vec![true; d] }
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    pub fn contains(&self, x: usize) -> bool {
        self.mask[x]
    }

    pub fn instances(&self) -> Vec<usize> {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn mass(&self, world: &FiniteWorld) -> f64 {
        exact_sum(self.mask.iter().zip(world.mass()).filter(|(b, _)| **b).map(|(_, p)| *p))
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }
}

fn check_dims(world: &FiniteWorld, h: &[Label]) -> Result<()> {
    if h.len() != world.len() {
        return input_err(format!(
            "hypothesis has length {} but world has {} instances",
            h.len(),
            world.len()
        ));
    }
    Ok(())
}

/// `l(h) = Pr(h(X) != Y)`.
pub fn population_error(world: &FiniteWorld, h: &[Label]) -> Result<f64> {
    check_dims(world, h)?;
    Ok(exact_sum(h.iter().enumerate().map(|(x, &p)| world.mass[x] * world.error_at(x, p))))
}

/// Index and error of the best hypothesis; ties go to the lowest index.
pub fn best_hypothesis(world: &FiniteWorld, class: &HypothesisClass) -> Result<(usize, f64)> {
    class.check_world(world)?;
    let mut best = (0, f64::INFINITY);
    for (i, h) in class.iter().enumerate() {
        let e = population_error(world, h)?;
        if e < best.1 {
            best = (i, e);
        }
    }
    Ok(best)
}

/// `Pr(h1(X) != h2(X))`.
pub fn hypothesis_distance(world: &FiniteWorld, h1: &[Label], h2: &[Label]) -> Result<f64> {
    check_dims(world, h1)?;
    check_dims(world, h2)?;
    Ok(exact_sum(
        h1.iter().zip(h2).enumerate().filter(|(_, (a, b))| a != b).map(|(x, _)| world.mass[x]),
    ))
}

/// All hypotheses within distance `r` of hypothesis `center`.
pub fn ball(
    world: &FiniteWorld,
    class: &HypothesisClass,
    center: usize,
    r: f64,
) -> Result<CandidateSet> {
    if r < 0.0 || r.is_nan() {
        return input_err(format!("ball radius must be nonnegative, got {r}"));
    }
    class.check_world(world)?;
    if center >= class.len() {
        return input_err(format!("center {center} out of range"));
    }
    let c = class.get(center);
    let mut members = Vec::new();
    for (i, h) in class.iter().enumerate() {
        if hypothesis_distance(world, c, h)? <= r {
            members.push(i);
        }
    }
    Ok(CandidateSet::from_indices(members))
}

/// Instances on which at least two members of `set` disagree.
pub fn disagreement_region(class: &HypothesisClass, set: &CandidateSet) -> Region {
    let d = class.dim();
    let Some(&first) = set.members().first() else {
        return Region::empty(d);
    };
    let reference = class.get(first);
    let mut mask = vec![false; d];
    for &i in &set.members()[1..] {
        for (x, (a, b)) in class.get(i).iter().zip(reference).enumerate() {
            if a != b {
                mask[x] = true;
            }
        }
    }
    Region::from_mask(mask)
}

/// Modified disagreement coefficient
/// `(1/r) Pr(DIS(B(h*, r)) ∩ {x : Q0(x) <= 1/t})`.
pub fn modified_dis_coefficient(
    world: &FiniteWorld,
    class: &HypothesisClass,
    r: f64,
    t: f64,
) -> Result<f64> {
    if !(r > 0.0) {
        return input_err(format!("radius must be positive, got {r}"));
    }
    if !(t >= 1.0) {
        return input_err(format!("propensity scale t must be >= 1, got {t}"));
    }
    let (star, _) = best_hypothesis(world, class)?;
    let region = disagreement_region(class, &ball(world, class, star, r)?);
    let cut = 1.0 / t;
    let mass = exact_sum(
        (0..world.len()).filter(|&x| region.contains(x) && world.q0[x] <= cut).map(|x| world.mass[x]),
    );
    Ok(mass / r)
}

/// Standard disagreement coefficient `theta(r) = theta~(r, 1)`.
pub fn dis_coefficient(world: &FiniteWorld, class: &HypothesisClass, r: f64) -> Result<f64> {
    modified_dis_coefficient(world, class, r, 1.0)
}

/// Supremum of the modified coefficient over a finite radius grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSup {
    pub value: f64,
    pub argmax_r: f64,
    pub grid_step: f64,
    pub grid_points: usize,
}

/// Default radius grid `{2 nu + k step : k >= 1} ∩ (0, 1]`.
pub fn default_radius_grid(nu: f64, step: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut k = 1usize;
    loop {
        let r = 2.0 * nu + k as f64 * step;
        if r > 1.0 + 1e-12 {
            break;
        }
        grid.push(r.min(1.0));
        k += 1;
    }
    if grid.is_empty() {
        grid.push(1.0);
    }
    grid
}

pub fn sup_modified_dis_coefficient(
    world: &FiniteWorld,
    class: &HypothesisClass,
    grid: &[f64],
    t: f64,
) -> Result<CoefficientSup> {
    if grid.is_empty() {
        return input_err("radius grid is empty");
    }
    let mut best = CoefficientSup { value: 0.0, argmax_r: grid[0], grid_step: 0.0, grid_points: grid.len() };
    for &r in grid {
        let v = modified_dis_coefficient(world, class, r, t)?;
        if v > best.value {
            best.value = v;
            best.argmax_r = r;
        }
    }
    if grid.len() > 1 {
        best.grid_step = grid[1] - grid[0];
    }
    Ok(best)
}

/// Structured document holding a world and a class together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldDocument {
    pub mass: Vec<f64>,
    pub label_prob: Vec<f64>,
    pub q0: Vec<f64>,
    pub hypotheses: Vec<Vec<Label>>,
}

impl WorldDocument {
    pub fn new(world: &FiniteWorld, class: &HypothesisClass) -> Self {
        Self {
            mass: world.mass.clone(),
            label_prob: world.label_prob.clone(),
            q0: world.q0.clone(),
            hypotheses: class.hypotheses.clone(),
        }
    }

    pub fn into_parts(self) -> Result<(FiniteWorld, HypothesisClass)> {
        let world = FiniteWorld::new(self.mass, self.label_prob, self.q0)?;
        let class = HypothesisClass::new(self.hypotheses)?;
        class.check_world(&world)?;
        Ok((world, class))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world documents always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
