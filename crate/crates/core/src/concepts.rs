//! Concept classes over the finite domain `[0, N)` together with the oracles
//! the relabeling transformation relies on: dichotomy enumeration, exact
//! weighted ERM and a consistency oracle.
//!
//! Every oracle breaks ties canonically: among admissible concepts it returns
//! the one with the lexicographically smallest parameter key (see
//! [`ConceptClass::param_key`]).

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::data::{Dataset, DomainPoint, UnlabeledDataset};
use crate::error::{Error, Result};
use crate::rational::{lcm_of_denominators, Rational};
use num_traits::{Signed, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassKind {
    Points,
    Thresholds,
    Intervals,
    /// Unions of at most `k` disjoint intervals.
    UnionOfIntervals(usize),
}

impl fmt::Display for ClassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassKind::Points => f.write_str("points"),
            ClassKind::Thresholds => f.write_str("thresholds"),
            ClassKind::Intervals => f.write_str("intervals"),
            ClassKind::UnionOfIntervals(k) => write!(f, "union:{k}"),
        }
    }
}

impl FromStr for ClassKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "points" => Ok(ClassKind::Points),
            "thresholds" => Ok(ClassKind::Thresholds),
            "intervals" => Ok(ClassKind::Intervals),
            other => {
                let k = other
                    .strip_prefix("union:")
                    .or_else(|| other.strip_prefix("union_k_intervals:"))
                    .and_then(|k| k.parse::<usize>().ok())
                    .ok_or_else(|| Error::invalid(format!("unknown concept class '{other}'")))?;
                Ok(ClassKind::UnionOfIntervals(k))
            }
        }
    }
}

impl Serialize for ClassKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ClassKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A concept class together with its domain size `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ConceptClass {
    kind: ClassKind,
    domain_size: usize,
}

impl<'de> Deserialize<'de> for ConceptClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            kind: ClassKind,
            domain_size: usize,
        }
        let raw = Raw::deserialize(d)?;
        ConceptClass::new(raw.kind, raw.domain_size).map_err(serde::de::Error::custom)
    }
}

/// A member of one of the supported classes.
///
/// Union concepts are stored in canonical form: nonempty, sorted,
/// non-adjacent half-open runs `[a, b)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Concept {
    /// `c(x) = 1` iff `x == z`.
    Point(usize),
    /// `c(x) = 1` iff `x >= t`, `t ∈ [0, N]`.
    Threshold(usize),
    /// `c(x) = 1` iff `a <= x < b`.
    Interval(usize, usize),
    Union(Vec<(usize, usize)>),
}

impl Concept {
    pub fn evaluate(&self, x: DomainPoint) -> bool {
        self.eval(x.0)
    }

    pub fn eval(&self, x: usize) -> bool {
        match self {
            Concept::Point(z) => x == *z,
            Concept::Threshold(t) => x >= *t,
            Concept::Interval(a, b) => *a <= x && x < *b,
            Concept::Union(runs) => runs.iter().any(|&(a, b)| a <= x && x < b),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Concept::Point(_) => "points",
            Concept::Threshold(_) => "thresholds",
            Concept::Interval(..) => "intervals",
            Concept::Union(_) => "union_intervals",
        }
    }

    pub fn params(&self) -> Vec<usize> {
        match self {
            Concept::Point(z) => vec![*z],
            Concept::Threshold(t) => vec![*t],
            Concept::Interval(a, b) => vec![*a, *b],
            Concept::Union(runs) => runs.iter().flat_map(|&(a, b)| [a, b]).collect(),
        }
    }

    pub fn truth_table(&self, domain_size: usize) -> Vec<bool> {
        (0..domain_size).map(|x| self.eval(x)).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct ConceptJson {
    kind: String,
    params: Vec<usize>,
}

impl Serialize for Concept {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConceptJson { kind: self.kind_name().to_string(), params: self.params() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Concept {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = ConceptJson::deserialize(d)?;
        let p = &raw.params;
        match (raw.kind.as_str(), p.len()) {
            ("points", 1) => Ok(Concept::Point(p[0])),
            ("thresholds", 1) => Ok(Concept::Threshold(p[0])),
            ("intervals", 2) if p[0] <= p[1] => Ok(Concept::Interval(p[0], p[1])),
            ("union_intervals", n) if n % 2 == 0 => {
                let runs: Vec<(usize, usize)> = p.chunks(2).map(|c| (c[0], c[1])).collect();
                let canonical = runs.iter().all(|&(a, b)| a < b) && runs.windows(2).all(|w| w[0].1 < w[1].0);
                if canonical {
                    Ok(Concept::Union(runs))
                } else {
                    Err(D::Error::custom("union runs must be nonempty, sorted and non-adjacent"))
                }
            }
            (kind, n) => Err(D::Error::custom(format!("invalid concept '{kind}' with {n} params"))),
        }
    }
}

/// An evaluable 0-1 predicate: a concept (proper) or an explicit table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    Concept(Concept),
    Table(Vec<bool>),
}

impl Hypothesis {
    pub fn evaluate(&self, x: DomainPoint) -> bool {
        self.eval(x.0)
    }

    pub fn eval(&self, x: usize) -> bool {
        match self {
            Hypothesis::Concept(c) => c.eval(x),
            Hypothesis::Table(t) => t.get(x).copied().unwrap_or(false),
        }
    }

    pub fn is_proper(&self) -> bool {
        matches!(self, Hypothesis::Concept(_))
    }

    pub fn as_concept(&self) -> Option<&Concept> {
        match self {
            Hypothesis::Concept(c) => Some(c),
            Hypothesis::Table(_) => None,
        }
    }

    pub fn truth_table(&self, domain_size: usize) -> Vec<bool> {
        (0..domain_size).map(|x| self.eval(x)).collect()
    }

    /// Truth table over `[0, N)` as a `0`/`1` string.
    pub fn table_string(&self, domain_size: usize) -> String {
        (0..domain_size).map(|x| if self.eval(x) { '1' } else { '0' }).collect()
    }
}

impl From<Concept> for Hypothesis {
    fn from(c: Concept) -> Self {
        Hypothesis::Concept(c)
    }
}

impl Serialize for Hypothesis {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct TableJson {
            table: String,
        }
        match self {
            Hypothesis::Concept(c) => c.serialize(s),
            Hypothesis::Table(t) => TableJson { table: t.iter().map(|&b| if b { '1' } else { '0' }).collect() }.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Hypothesis {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let value = serde_json::Value::deserialize(d)?;
        if let Some(table) = value.get("table").and_then(|t| t.as_str()) {
            let bits = table
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(D::Error::custom(format!("invalid table character '{other}'"))),
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            return Ok(Hypothesis::Table(bits));
        }
        Concept::deserialize(value).map(Hypothesis::Concept).map_err(D::Error::custom)
    }
}

/// Builds an improper hypothesis from an explicit `N`-bit table.
pub fn hypothesis_from_table(bits: Vec<bool>, domain_size: usize) -> Result<Hypothesis> {
    if bits.len() != domain_size {
        return Err(Error::invalid(format!("table has {} entries, domain size is {domain_size}", bits.len())));
    }
    Ok(Hypothesis::Table(bits))
}

/// One realizable labeling of an unlabeled sample with its canonical concept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Candidate {
    pub labeling: Vec<bool>,
    pub concept: Concept,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CandidateSet {
    pub entries: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Weighted target for ERM: a point, the label it should receive and the
/// nonnegative price of getting it wrong.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoint {
    pub x: DomainPoint,
    pub target: bool,
    pub weight: Rational,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightedInstance {
    pub items: Vec<WeightedPoint>,
}

impl WeightedInstance {
    pub fn new(items: Vec<WeightedPoint>) -> Result<Self> {
        if items.iter().any(|i| i.weight.is_negative()) {
            return Err(Error::invalid("weights must be nonnegative"));
        }
        Ok(Self { items })
    }

    pub fn push(&mut self, x: usize, target: bool, weight: Rational) -> Result<()> {
        if weight.is_negative() {
            return Err(Error::invalid("weights must be nonnegative"));
        }
        self.items.push(WeightedPoint { x: DomainPoint(x), target, weight });
        Ok(())
    }
}

/// Integer per-point misclassification costs over the whole domain: the cost
/// of predicting `0` at `x` is `zero[x]`, of predicting `1` is `one[x]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainCosts {
    pub zero: Vec<i128>,
    pub one: Vec<i128>,
}

const INF: i128 = i128::MAX / 4;

impl DomainCosts {
    pub fn new(domain_size: usize) -> Self {
        Self { zero: vec![0; domain_size], one: vec![0; domain_size] }
    }

    /// Adds a mistake price `w` for target label `target` at `x`.
    pub fn add(&mut self, x: usize, target: bool, w: i128) {
        if target {
            self.zero[x] += w;
        } else {
            self.one[x] += w;
        }
    }

    pub fn cost_of(&self, c: &Concept) -> i128 {
        (0..self.zero.len()).map(|x| if c.eval(x) { self.one[x] } else { self.zero[x] }).sum()
    }
}

impl ConceptClass {
    pub fn new(kind: ClassKind, domain_size: usize) -> Result<Self> {
        if domain_size < 2 {
            return Err(Error::invalid(format!("domain size must be at least 2, got {domain_size}")));
        }
        if let ClassKind::UnionOfIntervals(0) = kind {
            return Err(Error::invalid("union of intervals needs k >= 1"));
        }
        Ok(Self { kind, domain_size })
    }

    pub fn points(n: usize) -> Result<Self> {
        Self::new(ClassKind::Points, n)
    }

    pub fn thresholds(n: usize) -> Result<Self> {
        Self::new(ClassKind::Thresholds, n)
    }

    pub fn intervals(n: usize) -> Result<Self> {
        Self::new(ClassKind::Intervals, n)
    }

    pub fn union_of_intervals(k: usize, n: usize) -> Result<Self> {
        Self::new(ClassKind::UnionOfIntervals(k), n)
    }

    pub fn kind(&self) -> ClassKind {
        self.kind
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn vc_dimension(&self) -> usize {
        match self.kind {
            ClassKind::Points | ClassKind::Thresholds => 1,
            ClassKind::Intervals => 2,
            ClassKind::UnionOfIntervals(k) => 2 * k,
        }
    }

    /// Whether `c` is a well-formed member of this class.
    pub fn contains(&self, c: &Concept) -> bool {
        let n = self.domain_size;
        match (self.kind, c) {
            (ClassKind::Points, Concept::Point(z)) => *z < n,
            (ClassKind::Thresholds, Concept::Threshold(t)) => *t <= n,
            (ClassKind::Intervals, Concept::Interval(a, b)) => a <= b && *b <= n,
            (ClassKind::UnionOfIntervals(k), Concept::Union(runs)) => {
                runs.len() <= k && runs.iter().all(|&(a, b)| a < b && b <= n) && runs.windows(2).all(|w| w[0].1 < w[1].0)
            }
            _ => false,
        }
    }

    /// Tie-breaking key. Union keys are front-padded with zeros to length `2k`,
    /// so concepts with fewer runs sort first.
    pub fn param_key(&self, c: &Concept) -> Vec<usize> {
        match (self.kind, c) {
            (ClassKind::UnionOfIntervals(k), Concept::Union(runs)) => {
                let mut key = vec![0; 2 * (k - runs.len().min(k))];
                key.extend(runs.iter().flat_map(|&(a, b)| [a, b]));
                key
            }
            _ => c.params(),
        }
    }

    /// The smallest concept of the class.
    pub fn minimal_concept(&self) -> Concept {
        match self.kind {
            ClassKind::Points => Concept::Point(0),
            ClassKind::Thresholds => Concept::Threshold(0),
            ClassKind::Intervals => Concept::Interval(0, 0),
            ClassKind::UnionOfIntervals(_) => Concept::Union(Vec::new()),
        }
    }

    pub(crate) fn check_point(&self, x: usize) -> Result<()> {
        if x >= self.domain_size {
            return Err(Error::invalid(format!("point {x} outside domain [0, {})", self.domain_size)));
        }
        Ok(())
    }

    pub(crate) fn check_points(&self, xs: impl IntoIterator<Item = usize>) -> Result<()> {
        xs.into_iter().try_for_each(|x| self.check_point(x))
    }

    fn max_runs(&self) -> usize {
        match self.kind {
            ClassKind::Intervals => 1,
            ClassKind::UnionOfIntervals(k) => k,
            _ => 0,
        }
    }

    /// Canonical concept for a labeling of sorted distinct points, or `None`
    /// if the labeling is not realizable.
    fn canonical_for_sorted(&self, points: &[usize], labels: &[bool]) -> Option<Concept> {
        let n = self.domain_size;
        match self.kind {
            ClassKind::Points => {
                let ones: Vec<usize> = points.iter().zip(labels).filter(|(_, &l)| l).map(|(&p, _)| p).collect();
                match ones.len() {
                    0 => {
                        // smallest domain point not in the sample
                        let mut z = 0;
                        for &p in points {
                            if p == z {
                                z += 1;
                            } else if p > z {
                                break;
                            }
                        }
                        (z < n).then_some(Concept::Point(z))
                    }
                    1 => Some(Concept::Point(ones[0])),
                    _ => None,
                }
            }
            ClassKind::Thresholds => {
                let first_one = labels.iter().position(|&l| l).unwrap_or(labels.len());
                if labels[first_one..].iter().any(|&l| !l) {
                    return None;
                }
                Some(Concept::Threshold(if first_one == 0 { 0 } else { points[first_one - 1] + 1 }))
            }
            ClassKind::Intervals | ClassKind::UnionOfIntervals(_) => {
                let mut runs = Vec::new();
                let mut i = 0;
                while i < labels.len() {
                    if labels[i] {
                        let start = i;
                        while i + 1 < labels.len() && labels[i + 1] {
                            i += 1;
                        }
                        runs.push((start, i));
                    }
                    i += 1;
                }
                if runs.len() > self.max_runs() {
                    return None;
                }
                Some(self.concept_from_runs(points, &runs))
            }
        }
    }

    /// Canonical concept whose runs cover the sorted-point index ranges
    /// `[i, j]` in `runs` and nothing else among `points`.
    fn concept_from_runs(&self, points: &[usize], runs: &[(usize, usize)]) -> Concept {
        let spans: Vec<(usize, usize)> = runs.iter().map(|&(i, j)| (if i == 0 { 0 } else { points[i - 1] + 1 }, points[j] + 1)).collect();
        match self.kind {
            ClassKind::Intervals => spans.first().map_or(Concept::Interval(0, 0), |&(a, b)| Concept::Interval(a, b)),
            _ => Concept::Union(spans),
        }
    }

    /// All labelings of `sx` realized by the class, one canonical concept each,
    /// ordered by parameter key.
    pub fn dichotomies(&self, sx: &UnlabeledDataset) -> Result<CandidateSet> {
        if sx.is_empty() {
            return Err(Error::invalid("dichotomies need a nonempty sample"));
        }
        self.check_points(sx.points.iter().map(|p| p.0))?;
        let points = sx.distinct_sorted();
        let m = points.len();
        let mut concepts = Vec::new();
        match self.kind {
            ClassKind::Points => {
                if let Some(c) = self.canonical_for_sorted(&points, &vec![false; m]) {
                    concepts.push(c);
                }
                concepts.extend(points.iter().map(|&p| Concept::Point(p)));
            }
            ClassKind::Thresholds => {
                concepts.extend((0..=m).map(|j| Concept::Threshold(if j == 0 { 0 } else { points[j - 1] + 1 })));
            }
            ClassKind::Intervals | ClassKind::UnionOfIntervals(_) => {
                let mut runs = Vec::new();
                self.enumerate_runs(&points, 0, self.max_runs(), &mut runs, &mut concepts);
            }
        }
        let mut entries: Vec<(Vec<usize>, Candidate)> = concepts
            .into_iter()
            .map(|c| {
                let labeling = sx.points.iter().map(|p| c.eval(p.0)).collect();
                (self.param_key(&c), Candidate { labeling, concept: c })
            })
            .collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(CandidateSet { entries: entries.into_iter().map(|(_, c)| c).collect() })
    }

    fn enumerate_runs(&self, points: &[usize], from: usize, remaining: usize, runs: &mut Vec<(usize, usize)>, out: &mut Vec<Concept>) {
        out.push(self.concept_from_runs(points, runs));
        if remaining == 0 {
            return;
        }
        for i in from..points.len() {
            for j in i..points.len() {
                runs.push((i, j));
                self.enumerate_runs(points, j + 2, remaining - 1, runs, out);
                runs.pop();
            }
        }
    }

    /// Every distinct function of the class on `[0, N)`.
    pub fn all_functions(&self) -> CandidateSet {
        self.dichotomies(&UnlabeledDataset::new(0..self.domain_size)).expect("domain is nonempty")
    }

    /// Canonical concept making no mistakes on `s`, if one exists.
    pub fn consistent_concept(&self, s: &Dataset) -> Result<Option<Concept>> {
        self.check_points(s.iter().map(|e| e.x.0))?;
        if s.is_empty() {
            return Ok(Some(self.minimal_concept()));
        }
        let mut labels: BTreeMap<usize, bool> = BTreeMap::new();
        for e in s.iter() {
            if let Some(&prev) = labels.get(&e.x.0) {
                if prev != e.y {
                    return Ok(None);
                }
            }
            labels.insert(e.x.0, e.y);
        }
        let points: Vec<usize> = labels.keys().copied().collect();
        let ls: Vec<bool> = labels.values().copied().collect();
        Ok(self.canonical_for_sorted(&points, &ls))
    }

    /// Exact minimizer of `Σ weight·I[c(x) ≠ target]` and its value.
    pub fn weighted_erm(&self, inst: &WeightedInstance) -> Result<(Concept, Rational)> {
        self.check_points(inst.items.iter().map(|i| i.x.0))?;
        let denom = lcm_of_denominators(inst.items.iter().map(|i| &i.weight));
        let mut costs = DomainCosts::new(self.domain_size);
        for item in &inst.items {
            if item.weight.is_zero() {
                continue;
            }
            let scaled = item.weight * Rational::from_integer(denom);
            costs.add(item.x.0, item.target, scaled.to_integer());
        }
        let (c, v) = self.erm_on_costs(&costs);
        Ok((c, Rational::new(v, denom)))
    }

    /// Canonical ERM over precomputed integer costs.
    pub fn erm_on_costs(&self, costs: &DomainCosts) -> (Concept, i128) {
        debug_assert_eq!(costs.zero.len(), self.domain_size);
        match self.kind {
            ClassKind::Points => erm_points(costs),
            ClassKind::Thresholds => erm_thresholds(costs),
            ClassKind::Intervals => erm_interval(costs),
            ClassKind::UnionOfIntervals(k) => erm_union(costs, k),
        }
    }
}

fn erm_points(c: &DomainCosts) -> (Concept, i128) {
    let base: i128 = c.zero.iter().sum();
    let mut best = (0, INF);
    for z in 0..c.zero.len() {
        let v = base - c.zero[z] + c.one[z];
        if v < best.1 {
            best = (z, v);
        }
    }
    (Concept::Point(best.0), best.1)
}

fn erm_thresholds(c: &DomainCosts) -> (Concept, i128) {
    let mut v: i128 = c.one.iter().sum();
    let mut best = (0, v);
    for t in 0..c.zero.len() {
        v += c.zero[t] - c.one[t];
        if v < best.1 {
            best = (t + 1, v);
        }
    }
    (Concept::Threshold(best.0), best.1)
}

fn erm_interval(c: &DomainCosts) -> (Concept, i128) {
    let n = c.zero.len();
    let base: i128 = c.zero.iter().sum();
    // cost(a, b) = base + prefix[b] - prefix[a]
    let mut prefix = vec![0i128; n + 1];
    for x in 0..n {
        prefix[x + 1] = prefix[x] + c.one[x] - c.zero[x];
    }
    let mut best_gain = 0i128;
    let mut running_max = prefix[0];
    for &p in &prefix[1..] {
        running_max = running_max.max(p);
        best_gain = best_gain.min(p - running_max);
    }
    let mut suffix_min = prefix.clone();
    for x in (0..n).rev() {
        suffix_min[x] = suffix_min[x].min(suffix_min[x + 1]);
    }
    for a in 0..=n {
        if suffix_min[a] - prefix[a] == best_gain {
            let b = (a..=n).find(|&b| prefix[b] - prefix[a] == best_gain).expect("suffix minimum is attained");
            return (Concept::Interval(a, b), base + best_gain);
        }
    }
    unreachable!("the empty interval is always admissible")
}

fn erm_union(c: &DomainCosts, k: usize) -> (Concept, i128) {
    let n = c.zero.len();
    // outside[j][p]: best cost of [p, N) when x = p-1 is labeled 0 and exactly j
    // more runs must start; inside[j][p]: same but x = p-1 is inside a run.
    let mut outside = vec![vec![INF; n + 1]; k + 1];
    let mut inside = vec![vec![INF; n + 1]; k + 1];
    outside[0][n] = 0;
    inside[0][n] = 0;
    for p in (0..n).rev() {
        for j in 0..=k {
            let stay = sat_add(c.zero[p], outside[j][p + 1]);
            let start = if j >= 1 { sat_add(c.one[p], inside[j - 1][p + 1]) } else { INF };
            outside[j][p] = stay.min(start);
            inside[j][p] = sat_add(c.one[p], inside[j][p + 1]).min(sat_add(c.zero[p], outside[j][p + 1]));
        }
    }
    let best = (0..=k).map(|r| outside[r][0]).min().expect("k >= 0");
    let runs_needed = (0..=k).find(|&r| outside[r][0] == best).expect("minimum is attained");

    let mut runs = Vec::new();
    let (mut j, mut in_run, mut start) = (runs_needed, false, 0);
    for p in 0..n {
        if in_run {
            if sat_add(c.zero[p], outside[j][p + 1]) == inside[j][p] {
                runs.push((start, p));
                in_run = false;
            }
        } else if j >= 1 && sat_add(c.one[p], inside[j - 1][p + 1]) == outside[j][p] {
            start = p;
            in_run = true;
            j -= 1;
        }
    }
    if in_run {
        runs.push((start, n));
    }
    (Concept::Union(runs), best)
}

fn sat_add(a: i128, b: i128) -> i128 {
    if a >= INF || b >= INF {
        INF
    } else {
        a + b
    }
}
