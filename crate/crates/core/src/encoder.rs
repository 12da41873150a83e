//! Fixed-size encoding of variable pedigrees.
//!
//! Every family is mapped onto a reference structure: a fixed list of slots,
//! each holding one relative type. Slot 0 is the counselee; the remaining
//! types follow [`RelativeType::CANONICAL`], slots of one type contiguous.
//! Each slot carries six features plus an absence indicator.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pedigree::{classify_all, Member, Pedigree, RelativeType};
use crate::seed;

/// Features per slot: current age, breast status, ovarian status, breast onset,
/// ovarian onset, sex, absence indicator.
pub const FEATURES: usize = 7;

pub const FEATURE_NAMES: [&str; FEATURES] = [
    "current_age",
    "bc_status",
    "oc_status",
    "bc_onset_age",
    "oc_onset_age",
    "sex",
    "absent",
];

fn canonical_index(t: RelativeType) -> Option<usize> {
    RelativeType::CANONICAL.iter().position(|&c| c == t)
}

/// Slot counts per relative type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReferenceStructure {
    counts: [usize; 15],
    slot_types: Vec<RelativeType>,
    offsets: [usize; 15],
}

impl ReferenceStructure {
    /// Counts for the eight variable types, in the order maternal aunts,
    /// maternal uncles, paternal aunts, paternal uncles, sisters, brothers,
    /// daughters, sons. Parents and grandparents always get one slot each.
    pub fn new(variable: [usize; 8]) -> ReferenceStructure {
        let mut counts = [1usize; 15];
        counts[7..].copy_from_slice(&variable);
        let mut slot_types = Vec::new();
        let mut offsets = [0; 15];
        for (k, &t) in RelativeType::CANONICAL.iter().enumerate() {
            offsets[k] = slot_types.len();
            slot_types.extend(std::iter::repeat_n(t, counts[k]));
        }
        ReferenceStructure {
            counts,
            slot_types,
            offsets,
        }
    }

    /// The default simulation reference (26 slots).
    pub fn default_simulation() -> Self {
        Self::new([2, 3, 3, 2, 2, 3, 2, 2])
    }

    /// Two of each aunt, uncle and sibling type, no children (19 slots).
    pub fn data_application() -> Self {
        Self::new([2, 2, 2, 2, 2, 2, 0, 0])
    }

    /// Reference structures built from family-size quartiles: `Q1`, `Q1s`,
    /// `Q2`, `Q2s`, `Q3`, `Q3s`, `Q4` (case-insensitive).
    pub fn quartile(name: &str) -> Result<Self> {
        // sister, brother, daughter, son, mat aunt, mat uncle, pat aunt, pat uncle
        let row: [usize; 8] = match name.to_ascii_lowercase().as_str() {
            "q1" => [0, 0, 0, 0, 1, 1, 1, 1],
            "q1s" => [0, 1, 1, 1, 1, 2, 1, 0],
            "q2" => [1, 1, 1, 1, 2, 1, 1, 2],
            "q2s" => [1, 2, 1, 1, 1, 2, 2, 1],
            "q3" => [2, 2, 2, 2, 3, 3, 3, 3],
            "q3s" => [2, 3, 2, 2, 2, 3, 3, 2],
            "q4" => [5, 5, 5, 5, 5, 5, 5, 5],
            _ => return Err(Error::Config(format!("unknown reference preset {name}"))),
        };
        Ok(Self::new([
            row[4], row[5], row[6], row[7], row[0], row[1], row[2], row[3],
        ]))
    }

    /// Any named preset: `default`, `data`, or a quartile name.
    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "default" | "simulation" => Ok(Self::default_simulation()),
            "data" | "data_application" => Ok(Self::data_application()),
            other => Self::quartile(other),
        }
    }

    /// Number of slots including the counselee.
    pub fn size(&self) -> usize {
        self.slot_types.len()
    }

    /// Length of the flattened feature vector.
    pub fn input_len(&self) -> usize {
        self.size() * FEATURES
    }

    pub fn count(&self, t: RelativeType) -> usize {
        canonical_index(t).map_or(0, |k| self.counts[k])
    }

    pub fn slot_type(&self, slot: usize) -> RelativeType {
        self.slot_types[slot]
    }

    /// Slot indices holding relatives of type `t`.
    pub fn slots_of(&self, t: RelativeType) -> std::ops::Range<usize> {
        match canonical_index(t) {
            Some(k) => self.offsets[k]..self.offsets[k] + self.counts[k],
            None => 0..0,
        }
    }

    /// Stable content hash used to tie checkpoints to a reference.
    pub fn fingerprint(&self) -> String {
        self.counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("-")
    }

    /// Inverse of [`fingerprint`](Self::fingerprint).
    pub fn from_fingerprint(s: &str) -> Result<Self> {
        let counts: Vec<usize> = s
            .split('-')
            .map(|c| c.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("malformed reference fingerprint {s}")))?;
        if counts.len() != 15 || counts[..7].iter().any(|&c| c != 1) {
            return Err(Error::Config(format!("malformed reference fingerprint {s}")));
        }
        let mut variable = [0; 8];
        variable.copy_from_slice(&counts[7..]);
        Ok(Self::new(variable))
    }

    pub fn to_file(&self, neighborhood: NeighborhoodSizes) -> ReferenceFile {
        ReferenceFile {
            slots: RelativeType::CANONICAL[7..]
                .iter()
                .map(|&t| (t.name().to_string(), self.count(t)))
                .collect(),
            neighborhood,
        }
    }
}

/// Sizes of the sibling and child blocks of a neighborhood:
/// sisters, brothers, daughters, sons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborhoodSizes(pub [usize; 4]);

impl Default for NeighborhoodSizes {
    fn default() -> Self {
        NeighborhoodSizes([3, 3, 2, 2])
    }
}

impl NeighborhoodSizes {
    /// Neighborhood length: self, mother, father and the four blocks.
    pub fn u(&self) -> usize {
        3 + self.0.iter().sum::<usize>()
    }
}

/// JSON form of a reference structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFile {
    /// Relative type name to slot count; parents and grandparents are implicit.
    pub slots: BTreeMap<String, usize>,
    #[serde(default)]
    pub neighborhood: NeighborhoodSizes,
}

impl ReferenceFile {
    pub fn load(path: &Path) -> Result<ReferenceFile> {
        Ok(serde_json::from_reader(std::fs::File::open(path)?)?)
    }

    pub fn structure(&self) -> Result<ReferenceStructure> {
        let mut variable = [0usize; 8];
        for (name, &count) in &self.slots {
            let k = RelativeType::CANONICAL
                .iter()
                .position(|t| t.name() == name)
                .ok_or_else(|| Error::Config(format!("unknown relative type {name}")))?;
            if k < 7 {
                if count != 1 {
                    return Err(Error::Config(format!("{name} must have exactly one slot")));
                }
                continue;
            }
            variable[k - 7] = count;
        }
        Ok(ReferenceStructure::new(variable))
    }
}

/// One family mapped onto a reference structure.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardizedInput {
    /// Row-major slot features, `size * FEATURES` values.
    pub x: Vec<f64>,
    /// Members copied into a slot (the counselee included).
    pub mapped: usize,
    pub family_size: usize,
}

impl StandardizedInput {
    pub fn row(&self, slot: usize) -> &[f64] {
        &self.x[slot * FEATURES..(slot + 1) * FEATURES]
    }

    pub fn dropped_fraction(&self) -> f64 {
        (self.family_size - self.mapped) as f64 / self.family_size as f64
    }
}

fn member_features(m: &Member) -> [f64; FEATURES] {
    let onset = |d: crate::pedigree::Diagnosis| d.known_onset().unwrap_or(0) as f64;
    [
        m.current_age.unwrap_or(0) as f64,
        f64::from(u8::from(m.breast.affected)),
        f64::from(u8::from(m.ovarian.affected)),
        onset(m.breast),
        onset(m.ovarian),
        f64::from(m.sex.code()),
        0.0,
    ]
}

/// Members of each canonical type, in member-id order.
fn members_by_type(p: &Pedigree) -> [Vec<usize>; 15] {
    let mut out: [Vec<usize>; 15] = Default::default();
    for (r, t) in classify_all(p).into_iter().enumerate() {
        if let Some(k) = canonical_index(t) {
            out[k].push(r);
        }
    }
    out
}

/// Maps a pedigree onto `reference`. Types with more relatives than slots are
/// subsampled uniformly (kept in member-id order); unused slots are marked
/// absent with zero features.
pub fn standardize(p: &Pedigree, reference: &ReferenceStructure, seed: u64) -> StandardizedInput {
    let mut rng = seed::rng(seed);
    let mut x = vec![0.0; reference.input_len()];
    for slot in 0..reference.size() {
        x[slot * FEATURES + FEATURES - 1] = 1.0;
    }
    let mut mapped = 0;
    for (k, mut rs) in members_by_type(p).into_iter().enumerate() {
        let cap = reference.counts[k];
        if rs.len() > cap {
            let mut keep: Vec<usize> = sample(&mut rng, rs.len(), cap).into_iter().collect();
            keep.sort_unstable();
            rs = keep.into_iter().map(|i| rs[i]).collect();
        }
        for (j, &r) in rs.iter().enumerate() {
            let slot = reference.offsets[k] + j;
            x[slot * FEATURES..(slot + 1) * FEATURES].copy_from_slice(&member_features(&p.members[r]));
        }
        mapped += rs.len();
    }
    StandardizedInput {
        x,
        mapped,
        family_size: p.len(),
    }
}

/// Standardizes a cohort with per-family derived seeds.
pub fn standardize_cohort(
    peds: &[Pedigree],
    reference: &ReferenceStructure,
    master_seed: u64,
) -> Vec<StandardizedInput> {
    peds.par_iter()
        .enumerate()
        .map(|(i, p)| standardize(p, reference, seed::derive(master_seed, i as u64)))
        .collect()
}

/// Mean fraction of members that do not fit into `reference`.
pub fn summarize_loss(peds: &[Pedigree], reference: &ReferenceStructure) -> Result<f64> {
    if peds.is_empty() {
        return Err(Error::Config("summarize_loss needs at least one family".into()));
    }
    let total: f64 = peds
        .iter()
        .map(|p| {
            let mapped: usize = members_by_type(p)
                .iter()
                .enumerate()
                .map(|(k, rs)| rs.len().min(reference.counts[k]))
                .sum();
            (p.len() - mapped) as f64 / p.len() as f64
        })
        .sum();
    Ok(total / peds.len() as f64)
}

/// Per-slot neighborhoods over reference slots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborhoodMap {
    pub u: usize,
    pub slots: usize,
    /// `slots * u` entries; `sentinel()` marks padding.
    pub index: Vec<usize>,
}

impl NeighborhoodMap {
    /// Index of the virtual all-zero slot.
    pub fn sentinel(&self) -> usize {
        self.slots
    }

    pub fn of(&self, slot: usize) -> &[usize] {
        &self.index[slot * self.u..(slot + 1) * self.u]
    }
}

/// Parent, sibling and child slot types for a slot of type `t`, treating the
/// counselee as a daughter of the parents and a sibling of sisters/brothers.
struct Kin {
    mother: Option<RelativeType>,
    father: Option<RelativeType>,
    sisters: &'static [RelativeType],
    brothers: &'static [RelativeType],
    daughters: &'static [RelativeType],
    sons: &'static [RelativeType],
}

fn kin(t: RelativeType) -> Kin {
    use RelativeType::*;
    let k = |mother, father, sisters, brothers, daughters, sons| Kin {
        mother,
        father,
        sisters,
        brothers,
        daughters,
        sons,
    };
    match t {
        Counselee => k(Some(Mother), Some(Father), &[Sister], &[Brother], &[Daughter], &[Son]),
        Mother => k(
            Some(MaternalGrandmother),
            Some(MaternalGrandfather),
            &[MaternalAunt],
            &[MaternalUncle],
            &[Counselee, Sister],
            &[Brother],
        ),
        Father => k(
            Some(PaternalGrandmother),
            Some(PaternalGrandfather),
            &[PaternalAunt],
            &[PaternalUncle],
            &[Counselee, Sister],
            &[Brother],
        ),
        MaternalGrandmother | MaternalGrandfather => k(None, None, &[], &[], &[Mother, MaternalAunt], &[MaternalUncle]),
        PaternalGrandmother | PaternalGrandfather => k(None, None, &[], &[], &[PaternalAunt], &[Father, PaternalUncle]),
        MaternalAunt | MaternalUncle => k(
            Some(MaternalGrandmother),
            Some(MaternalGrandfather),
            &[Mother, MaternalAunt],
            &[MaternalUncle],
            &[],
            &[],
        ),
        PaternalAunt | PaternalUncle => k(
            Some(PaternalGrandmother),
            Some(PaternalGrandfather),
            &[PaternalAunt],
            &[Father, PaternalUncle],
            &[],
            &[],
        ),
        Sister | Brother => k(Some(Mother), Some(Father), &[Counselee, Sister], &[Brother], &[], &[]),
        Daughter | Son => k(Some(Counselee), None, &[Daughter], &[Son], &[], &[]),
        Other => k(None, None, &[], &[], &[], &[]),
    }
}

/// Builds the neighborhood of every reference slot. Blocks with more
/// candidates than positions are subsampled with `seed`; shorter blocks are
/// padded with the sentinel.
pub fn build_neighborhoods(reference: &ReferenceStructure, sizes: NeighborhoodSizes, seed: u64) -> NeighborhoodMap {
    let mut rng = seed::rng(seed);
    let n = reference.size();
    let u = sizes.u();
    let sentinel = n;
    let mut index = Vec::with_capacity(n * u);
    for slot in 0..n {
        let kin = kin(reference.slot_type(slot));
        let single = |t: Option<RelativeType>| t.and_then(|t| reference.slots_of(t).next()).unwrap_or(sentinel);
        index.push(slot);
        index.push(single(kin.mother));
        index.push(single(kin.father));
        let blocks = [kin.sisters, kin.brothers, kin.daughters, kin.sons];
        for (types, &m) in blocks.iter().zip(sizes.0.iter()) {
            let mut cand: Vec<usize> = types
                .iter()
                .flat_map(|&t| reference.slots_of(t))
                .filter(|&s| s != slot)
                .collect();
            cand.sort_unstable();
            if cand.len() > m {
                let mut keep: Vec<usize> = sample(&mut rng, cand.len(), m).into_iter().collect();
                keep.sort_unstable();
                cand = keep.into_iter().map(|i| cand[i]).collect();
            }
            index.extend(cand.iter().copied());
            index.extend(std::iter::repeat_n(sentinel, m - cand.len()));
        }
    }
    NeighborhoodMap { u, slots: n, index }
}

/// Per-column min-max scaling learned from training rows.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<FeatureScaler> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Config("cannot fit a scaler on no rows".into()))?
            .as_ref();
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for row in rows {
            let row = row.as_ref();
            if row.len() != min.len() {
                return Err(Error::Shape {
                    expected: min.len(),
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(FeatureScaler { min, max })
    }

    pub fn is_fitted(&self) -> bool {
        !self.min.is_empty()
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        if !self.is_fitted() {
            return Err(Error::Config("scaler applied before fit".into()));
        }
        if row.len() != self.min.len() {
            return Err(Error::Shape {
                expected: self.min.len(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect())
    }

    pub fn apply_all<R: AsRef<[f64]> + Sync>(&self, rows: &[R]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply(r.as_ref())).collect()
    }
}

/// Appends counselee-level covariates after the slot block.
pub fn append_extras(x: &[f64], extras: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() + extras.len());
    out.extend_from_slice(x);
    out.extend_from_slice(extras);
    out
}
