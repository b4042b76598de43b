//! Domain points, datasets, index sets and seeded random streams.

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A point of the finite domain `[0, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainPoint(pub usize);

impl DomainPoint {
    pub fn value(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabeledExample {
    pub x: DomainPoint,
    pub y: bool,
}

impl LabeledExample {
    pub fn new(x: usize, y: bool) -> Self {
        Self { x: DomainPoint(x), y }
    }
}

impl Serialize for LabeledExample {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.x.0, self.y as u8).serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabeledExample {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (x, y): (usize, u8) = Deserialize::deserialize(d)?;
        if y > 1 {
            return Err(serde::de::Error::custom(format!("label {y} is not 0 or 1")));
        }
        Ok(LabeledExample::new(x, y == 1))
    }
}

/// Ordered labeled dataset; repetitions allowed, order significant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dataset {
    pub examples: Vec<LabeledExample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnlabeledDataset {
    pub points: Vec<DomainPoint>,
}

impl UnlabeledDataset {
    pub fn new(points: impl IntoIterator<Item = usize>) -> Self {
        Self { points: points.into_iter().map(DomainPoint).collect() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distinct points in ascending order.
    pub fn distinct_sorted(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.points.iter().map(|p| p.0).collect();
        set.into_iter().collect()
    }
}

impl Dataset {
    pub fn new(examples: Vec<LabeledExample>) -> Self {
        Self { examples }
    }

    pub fn from_pairs(pairs: &[(usize, u8)]) -> Self {
        Self { examples: pairs.iter().map(|&(x, y)| LabeledExample::new(x, y == 1)).collect() }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &LabeledExample> {
        self.examples.iter()
    }

    pub fn unlabeled(&self) -> UnlabeledDataset {
        UnlabeledDataset { points: self.examples.iter().map(|e| e.x).collect() }
    }

    pub fn concat(&self, other: &Dataset) -> Dataset {
        let mut examples = self.examples.clone();
        examples.extend_from_slice(&other.examples);
        Dataset { examples }
    }

    pub fn max_point(&self) -> Option<usize> {
        self.examples.iter().map(|e| e.x.0).max()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Two-column CSV with header `x,y`.
    pub fn from_csv_reader(r: impl Read) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
        let headers = reader.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
            return Err(Error::invalid(format!("expected CSV header 'x,y', found '{}'", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut examples = Vec::new();
        for record in reader.deserialize::<(usize, u8)>() {
            let (x, y) = record?;
            if y > 1 {
                return Err(Error::invalid(format!("label {y} is not 0 or 1")));
            }
            examples.push(LabeledExample::new(x, y == 1));
        }
        Ok(Dataset { examples })
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut writer = csv::Writer::from_writer(w);
        writer.write_record(["x", "y"])?;
        for e in &self.examples {
            writer.write_record([e.x.0.to_string(), (e.y as u8).to_string()])?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Loads a dataset, choosing CSV for `.csv` paths and JSON otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            Self::from_csv_reader(file)
        } else {
            Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
        }
    }
}

impl FromIterator<LabeledExample> for Dataset {
    fn from_iter<I: IntoIterator<Item = LabeledExample>>(iter: I) -> Self {
        Dataset { examples: iter.into_iter().collect() }
    }
}

/// Sorted set of distinct indices into a dataset of length `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct IndexSet {
    indices: Vec<usize>,
    n: usize,
}

impl IndexSet {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("index set contains duplicates"));
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::invalid(format!("index {last} out of range for length {n}")));
            }
        }
        Ok(Self { indices, n })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn universe(&self) -> usize {
        self.n
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded, splittable random stream.
///
/// The draws depend only on `(seed, stream_id)` and the sequence of calls.
/// [`RandomStream::fork`] derives a child stream from the identity of the
/// parent (not its position), so sub-procedures get reproducible streams no
/// matter how much randomness their siblings consume.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn fork(&self, tag: u64) -> RandomStream {
        RandomStream::new(self.seed, mix64(self.stream_id ^ mix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D))))
    }

    /// Uniform draw from the open interval (0, 1).
    pub fn open_unit(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.rng.random::<f64>() < p
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn rng(&mut self) -> &mut impl RngCore {
        &mut self.rng
    }
}

/// Uniformly random `k`-subset of `[0, n)`.
pub fn subsample_uniform_indices(n: usize, k: usize, rng: &mut RandomStream) -> Result<IndexSet> {
    if k == 0 || k > n {
        return Err(Error::invalid(format!("subsample size {k} must be in [1, {n}]")));
    }
    let picked = index::sample(&mut rng.rng, n, k).into_vec();
    IndexSet::new(picked, n)
}

/// Splits `s` into the selected examples and the rest, both in index order.
pub fn split_by_index(s: &Dataset, idx: &IndexSet) -> Result<(Dataset, Dataset)> {
    if let Some(&last) = idx.indices().last() {
        if last >= s.len() {
            return Err(Error::invalid(format!("index {last} out of range for dataset of length {}", s.len())));
        }
    }
    let mut selected = Vec::with_capacity(idx.len());
    let mut rest = Vec::with_capacity(s.len().saturating_sub(idx.len()));
    let mut it = idx.indices().iter().peekable();
    for (i, e) in s.examples.iter().enumerate() {
        if it.peek() == Some(&&i) {
            selected.push(*e);
            it.next();
        } else {
            rest.push(*e);
        }
    }
    Ok((Dataset::new(selected), Dataset::new(rest)))
}

/// Inverse of [`split_by_index`].
pub fn merge_by_index(t: &Dataset, w: &Dataset, idx: &IndexSet) -> Result<Dataset> {
    let n = t.len() + w.len();
    if idx.len() != t.len() || idx.indices().last().is_some_and(|&l| l >= n) {
        return Err(Error::invalid("index set does not match the split sizes"));
    }
    let (mut ti, mut wi) = (t.examples.iter(), w.examples.iter());
    let examples = (0..n).map(|i| if idx.contains(i) { *ti.next().unwrap() } else { *wi.next().unwrap() }).collect();
    Ok(Dataset::new(examples))
}

/// `m` i.i.d. uniform draws (with replacement) from the entries of `s`.
pub fn resample_with_replacement(s: &Dataset, m: usize, rng: &mut RandomStream) -> Result<Dataset> {
    if s.is_empty() {
        return Err(Error::invalid("cannot resample from an empty dataset"));
    }
    if m == 0 {
        return Err(Error::invalid("resample size must be at least 1"));
    }
    Ok((0..m).map(|_| s.examples[rng.below(s.len())]).collect())
}

/// Copy of `s` with entry `i` replaced by `e`.
pub fn neighboring(s: &Dataset, i: usize, e: LabeledExample) -> Result<Dataset> {
    if i >= s.len() {
        return Err(Error::invalid(format!("index {i} out of range for dataset of length {}", s.len())));
    }
    let mut out = s.clone();
    out.examples[i] = e;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_set() -> Dataset {
        Dataset::from_pairs(&[(1, 0), (2, 1), (3, 0), (4, 1)])
    }

    #[test]
    fn full_subsample_is_everything() {
        let mut rng = RandomStream::from_seed(1);
        let idx = subsample_uniform_indices(10, 10, &mut rng).unwrap();
        assert_eq!(idx.indices(), (0..10).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn subsample_size_and_errors() {
        let mut rng = RandomStream::from_seed(2);
        let k = crate::rational::ceil_mul(&crate::rational::ratio(5, 100), 100) as usize;
        assert_eq!(subsample_uniform_indices(100, k, &mut rng).unwrap().len(), 5);
        assert!(subsample_uniform_indices(5, 0, &mut rng).is_err());
        assert!(subsample_uniform_indices(5, 6, &mut rng).is_err());
    }

    #[test]
    fn subsample_single_index_is_uniform() {
        let mut counts = [0usize; 3];
        let base = RandomStream::from_seed(3);
        let draws = 30_000;
        for t in 0..draws {
            let mut rng = base.fork(t);
            let idx = subsample_uniform_indices(3, 1, &mut rng).unwrap();
            counts[idx.indices()[0]] += 1;
        }
        for c in counts {
            let f = c as f64 / draws as f64;
            assert!((f - 1.0 / 3.0).abs() <= 0.02, "frequency {f}");
        }
    }

    #[test]
    fn split_definition() {
        let s = sample_set();
        let idx = IndexSet::new(vec![2, 0], 4).unwrap();
        let (t, w) = split_by_index(&s, &idx).unwrap();
        assert_eq!(t.examples, vec![s.examples[0], s.examples[2]]);
        assert_eq!(w.examples, vec![s.examples[1], s.examples[3]]);
        assert_eq!(merge_by_index(&t, &w, &idx).unwrap(), s);

        let all = IndexSet::new((0..4).collect(), 4).unwrap();
        let (t, w) = split_by_index(&s, &all).unwrap();
        assert_eq!(t, s);
        assert!(w.is_empty());
    }

    #[test]
    fn split_cardinalities() {
        let s: Dataset = (0..30).map(|i| LabeledExample::new(i % 7, i % 2 == 0)).collect();
        let mut rng = RandomStream::from_seed(4);
        let idx = subsample_uniform_indices(30, 10, &mut rng).unwrap();
        let (t, w) = split_by_index(&s, &idx).unwrap();
        assert_eq!((t.len(), w.len()), (10, 20));
    }

    #[test]
    fn split_rejects_out_of_range() {
        let s = sample_set();
        let idx = IndexSet::new(vec![0, 7], 8).unwrap();
        assert!(split_by_index(&s, &idx).is_err());
        assert!(IndexSet::new(vec![1, 1], 4).is_err());
    }

    #[test]
    fn resample_cases() {
        let mut rng = RandomStream::from_seed(5);
        let one = Dataset::from_pairs(&[(3, 1)]);
        let out = resample_with_replacement(&one, 5, &mut rng).unwrap();
        assert_eq!(out.examples, vec![one.examples[0]; 5]);
        assert!(resample_with_replacement(&Dataset::default(), 3, &mut rng).is_err());

        let s: Dataset = (0..30).map(|i| LabeledExample::new(i, false)).collect();
        let out = resample_with_replacement(&s, 30, &mut rng).unwrap();
        assert_eq!(out.len(), 30);
        assert!(out.iter().all(|e| s.examples.contains(e)));
    }

    #[test]
    fn resample_two_entries_is_fair() {
        let s = Dataset::from_pairs(&[(0, 0), (1, 1)]);
        let base = RandomStream::from_seed(6);
        let draws = 10_000;
        let ones = (0..draws).filter(|&t| resample_with_replacement(&s, 1, &mut base.fork(t)).unwrap().examples[0].x.0 == 1).count();
        assert!((ones as f64 / draws as f64 - 0.5).abs() <= 0.03);
    }

    #[test]
    fn neighboring_replaces_one_entry() {
        let s = sample_set();
        assert_eq!(neighboring(&s, 0, s.examples[0]).unwrap(), s);
        let t = neighboring(&s, 2, LabeledExample::new(9, true)).unwrap();
        assert_eq!(t.len(), s.len());
        let diff = s.iter().zip(t.iter()).filter(|(a, b)| a != b).count();
        assert!(diff <= 1);
        assert!(neighboring(&s, 4, s.examples[0]).is_err());
    }

    #[test]
    fn streams_are_reproducible_and_forks_independent_of_position() {
        let mut a = RandomStream::new(7, 3);
        let mut b = RandomStream::new(7, 3);
        let xs: Vec<f64> = (0..5).map(|_| a.open_unit()).collect();
        let ys: Vec<f64> = (0..5).map(|_| b.open_unit()).collect();
        assert_eq!(xs, ys);
        let fresh = RandomStream::new(7, 3);
        assert_eq!(a.fork(9).stream_id(), fresh.fork(9).stream_id());
        assert_ne!(fresh.fork(1).stream_id(), fresh.fork(2).stream_id());
    }

    #[test]
    fn json_and_csv_formats() {
        let s = Dataset::from_pairs(&[(1, 0), (5, 1)]);
        assert_eq!(s.to_json_string().unwrap(), "[[1,0],[5,1]]");
        assert_eq!(Dataset::from_json_str("[[1,0],[5,1]]").unwrap(), s);
        assert!(Dataset::from_json_str("[[1,2]]").is_err());
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "x,y\n1,0\n5,1\n");
        assert_eq!(Dataset::from_csv_reader(buf.as_slice()).unwrap(), s);
        assert!(Dataset::from_csv_reader("a,b\n1,0\n".as_bytes()).is_err());
    }
}
