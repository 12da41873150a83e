//! Family data model, relative-type classification and validation.

mod io;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{parse_csv, read_pedigrees, write_csv, write_pedigrees, FileFormat, MemberRecord};

/// Oldest representable age. Onset support is 1..=MAX_AGE.
pub const MAX_AGE: u32 = 94;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub fn code(self) -> u8 {
        match self {
            Sex::Female => 0,
            Sex::Male => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Sex> {
        match code {
            0 => Some(Sex::Female),
            1 => Some(Sex::Male),
            _ => None,
        }
    }
}

/// Cancer history for one site.
///
/// An unaffected member has `onset_age == Some(0)`. An affected member with an
/// unknown diagnosis age has `onset_age == None`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub affected: bool,
    pub onset_age: Option<u32>,
}

impl Diagnosis {
    pub const UNAFFECTED: Diagnosis = Diagnosis {
        affected: false,
        onset_age: Some(0),
    };

    pub fn at(age: u32) -> Diagnosis {
        Diagnosis {
            affected: true,
            onset_age: Some(age),
        }
    }

    /// Known onset age of an affected member.
    pub fn known_onset(&self) -> Option<u32> {
        if self.affected {
            self.onset_age
        } else {
            None
        }
    }
}

impl Default for Diagnosis {
    fn default() -> Self {
        Diagnosis::UNAFFECTED
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    /// Position in the family's member list; the counselee is 0.
    pub id: usize,
    pub mother: Option<usize>,
    pub father: Option<usize>,
    pub sex: Sex,
    /// Current age if alive, age at death otherwise. `None` when unknown.
    pub current_age: Option<u32>,
    pub deceased: bool,
    pub breast: Diagnosis,
    pub ovarian: Diagnosis,
}

impl Member {
    pub fn new(id: usize, sex: Sex, current_age: u32) -> Member {
        Member {
            id,
            mother: None,
            father: None,
            sex,
            current_age: Some(current_age),
            deceased: false,
            breast: Diagnosis::UNAFFECTED,
            ovarian: Diagnosis::UNAFFECTED,
        }
    }

    pub fn with_parents(mut self, mother: Option<usize>, father: Option<usize>) -> Member {
        self.mother = mother;
        self.father = father;
        self
    }

    pub fn parents(&self) -> impl Iterator<Item = usize> {
        self.mother.into_iter().chain(self.father)
    }

    pub fn is_founder(&self) -> bool {
        self.mother.is_none() && self.father.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pedigree {
    pub family_id: String,
    pub members: Vec<Member>,
}

impl Pedigree {
    pub fn new(family_id: impl Into<String>, members: Vec<Member>) -> Pedigree {
        Pedigree {
            family_id: family_id.into(),
            members,
        }
    }

    /// Number of members other than the counselee.
    pub fn relatives(&self) -> usize {
        self.members.len().saturating_sub(1)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn counselee(&self) -> &Member {
        &self.members[0]
    }

    pub fn member(&self, r: usize) -> Result<&Member> {
        self.members.get(r).ok_or(Error::IndexOutOfRange {
            index: r,
            size: self.members.len(),
        })
    }

    pub fn children_of(&self, r: usize) -> impl Iterator<Item = usize> + '_ {
        self.members
            .iter()
            .filter(move |m| m.mother == Some(r) || m.father == Some(r))
            .map(|m| m.id)
    }

    /// Members other than `r` who share at least one known parent with `r`.
    pub fn siblings_of(&self, r: usize) -> impl Iterator<Item = usize> + '_ {
        let me = &self.members[r];
        self.members
            .iter()
            .filter(move |m| {
                m.id != r
                    && ((me.mother.is_some() && m.mother == me.mother)
                        || (me.father.is_some() && m.father == me.father))
            })
            .map(|m| m.id)
    }

    /// True when the individual/nuclear-family graph contains a cycle
    /// (consanguinity or marriage chains closing on themselves).
    pub fn has_loop(&self) -> bool {
        family_graph_has_cycle(self)
    }

    /// Removes the members for which `keep` is false (the counselee is always
    /// kept), renumbering the rest in order. Links to removed parents become
    /// unknown.
    pub fn retain_members(&self, mut keep: impl FnMut(&Member) -> bool) -> Pedigree {
        let mut new_index = vec![None; self.members.len()];
        let mut next = 0;
        for m in &self.members {
            if m.id == 0 || keep(m) {
                new_index[m.id] = Some(next);
                next += 1;
            }
        }
        let members = self
            .members
            .iter()
            .filter(|m| new_index[m.id].is_some())
            .map(|m| {
                let mut m2 = m.clone();
                m2.id = new_index[m.id].unwrap();
                m2.mother = m.mother.and_then(|p| new_index.get(p).copied().flatten());
                m2.father = m.father.and_then(|p| new_index.get(p).copied().flatten());
                m2
            })
            .collect();
        Pedigree::new(self.family_id.clone(), members)
    }
}

/// Relationship of a member to the counselee, up to second degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelativeType {
    Counselee,
    Mother,
    Father,
    MaternalGrandmother,
    MaternalGrandfather,
    PaternalGrandmother,
    PaternalGrandfather,
    MaternalAunt,
    MaternalUncle,
    PaternalAunt,
    PaternalUncle,
    Sister,
    Brother,
    Daughter,
    Son,
    Other,
}

impl RelativeType {
    /// Canonical order used for reference-structure slots.
    pub const CANONICAL: [RelativeType; 15] = [
        RelativeType::Counselee,
        RelativeType::Mother,
        RelativeType::Father,
        RelativeType::MaternalGrandmother,
        RelativeType::MaternalGrandfather,
        RelativeType::PaternalGrandmother,
        RelativeType::PaternalGrandfather,
        RelativeType::MaternalAunt,
        RelativeType::MaternalUncle,
        RelativeType::PaternalAunt,
        RelativeType::PaternalUncle,
        RelativeType::Sister,
        RelativeType::Brother,
        RelativeType::Daughter,
        RelativeType::Son,
    ];

    /// Genetic degree of relationship to the counselee (0 for the counselee,
    /// `None` for `Other`).
    pub fn degree(self) -> Option<u32> {
        use RelativeType::*;
        match self {
            Counselee => Some(0),
            Mother | Father | Sister | Brother | Daughter | Son => Some(1),
            MaternalGrandmother | MaternalGrandfather | PaternalGrandmother | PaternalGrandfather | MaternalAunt
            | MaternalUncle | PaternalAunt | PaternalUncle => Some(2),
            Other => None,
        }
    }

    /// Sex implied by the relationship, if any.
    pub fn implied_sex(self) -> Option<Sex> {
        use RelativeType::*;
        match self {
            Mother | MaternalGrandmother | PaternalGrandmother | MaternalAunt | PaternalAunt | Sister | Daughter => {
                Some(Sex::Female)
            }
            Father | MaternalGrandfather | PaternalGrandfather | MaternalUncle | PaternalUncle | Brother | Son => {
                Some(Sex::Male)
            }
            Counselee | Other => None,
        }
    }

    pub fn name(self) -> &'static str {
        use RelativeType::*;
        match self {
            Counselee => "counselee",
            Mother => "mother",
            Father => "father",
            MaternalGrandmother => "maternal_grandmother",
            MaternalGrandfather => "maternal_grandfather",
            PaternalGrandmother => "paternal_grandmother",
            PaternalGrandfather => "paternal_grandfather",
            MaternalAunt => "maternal_aunt",
            MaternalUncle => "maternal_uncle",
            PaternalAunt => "paternal_aunt",
            PaternalUncle => "paternal_uncle",
            Sister => "sister",
            Brother => "brother",
            Daughter => "daughter",
            Son => "son",
            Other => "other",
        }
    }
}

impl fmt::Display for RelativeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Classifies member `r` relative to the counselee from the parent graph.
pub fn classify_relative(p: &Pedigree, r: usize) -> Result<RelativeType> {
    use RelativeType::*;
    let member = p.member(r)?;
    if r == 0 {
        return Ok(Counselee);
    }
    let c = p.counselee();
    let by_sex = |f: RelativeType, m: RelativeType| match member.sex {
        Sex::Female => f,
        Sex::Male => m,
    };
    if c.mother == Some(r) {
        return Ok(Mother);
    }
    if c.father == Some(r) {
        return Ok(Father);
    }
    if let Some(mom) = c.mother {
        let mm = &p.members[mom];
        if mm.mother == Some(r) || mm.father == Some(r) {
            return Ok(by_sex(MaternalGrandmother, MaternalGrandfather));
        }
    }
    if let Some(dad) = c.father {
        let dm = &p.members[dad];
        if dm.mother == Some(r) || dm.father == Some(r) {
            return Ok(by_sex(PaternalGrandmother, PaternalGrandfather));
        }
    }
    if shares_parent(c, member) {
        return Ok(by_sex(Sister, Brother));
    }
    if member.mother == Some(0) || member.father == Some(0) {
        return Ok(by_sex(Daughter, Son));
    }
    if let Some(mom) = c.mother {
        if shares_parent(&p.members[mom], member) {
            return Ok(by_sex(MaternalAunt, MaternalUncle));
        }
    }
    if let Some(dad) = c.father {
        if shares_parent(&p.members[dad], member) {
            return Ok(by_sex(PaternalAunt, PaternalUncle));
        }
    }
    Ok(Other)
}

/// Classifies every member; index `i` holds the type of member `i`.
pub fn classify_all(p: &Pedigree) -> Vec<RelativeType> {
    (0..p.len())
        .map(|r| classify_relative(p, r).unwrap_or(RelativeType::Other))
        .collect()
}

fn shares_parent(a: &Member, b: &Member) -> bool {
    a.id != b.id && ((a.mother.is_some() && a.mother == b.mother) || (a.father.is_some() && a.father == b.father))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    MemberIndex,
    AgeRange,
    StatusOnsetMismatch,
    OnsetAfterCurrentAge,
    MaleOvarian,
    ParentOutOfRange,
    MotherNotFemale,
    FatherNotMale,
    OwnAncestor,
    Loop,
    NoCounselee,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub member: Option<usize>,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.member {
            Some(m) => write!(f, "member {m}: {:?}: {}", self.rule, self.detail),
            None => write!(f, "{:?}: {}", self.rule, self.detail),
        }
    }
}

/// Lists every invariant violation in `p`. Empty means valid.
pub fn validate(p: &Pedigree) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |member: Option<usize>, rule: Rule, detail: String| out.push(Violation { member, rule, detail });
    if p.members.is_empty() {
        push(None, Rule::NoCounselee, "pedigree has no members".into());
        return out;
    }
    let n = p.members.len();
    let mut parents_ok = true;
    for (i, m) in p.members.iter().enumerate() {
        let id = Some(m.id);
        if m.id != i {
            push(id, Rule::MemberIndex, format!("member at position {i} has id {}", m.id));
        }
        if let Some(a) = m.current_age {
            if a > MAX_AGE {
                push(id, Rule::AgeRange, format!("current age {a} exceeds {MAX_AGE}"));
            }
        }
        for (name, d) in [("breast", m.breast), ("ovarian", m.ovarian)] {
            if let Some(onset) = d.onset_age {
                if d.affected != (onset > 0) {
                    push(
                        id,
                        Rule::StatusOnsetMismatch,
                        format!("{name} status {} with onset age {onset}", d.affected as u8),
                    );
                }
                if let Some(a) = m.current_age {
                    if onset > a {
                        push(
                            id,
                            Rule::OnsetAfterCurrentAge,
                            format!("{name} onset {onset} after current age {a}"),
                        );
                    }
                }
                if onset > MAX_AGE {
                    push(id, Rule::AgeRange, format!("{name} onset {onset} exceeds {MAX_AGE}"));
                }
            }
        }
        if m.sex == Sex::Male && m.ovarian.affected {
            push(id, Rule::MaleOvarian, "male member with ovarian cancer".into());
        }
        for (role, parent, want) in [("mother", m.mother, Sex::Female), ("father", m.father, Sex::Male)] {
            let Some(pid) = parent else { continue };
            if pid >= n {
                parents_ok = false;
                push(id, Rule::ParentOutOfRange, format!("{role} index {pid} out of range"));
                continue;
            }
            if pid == i {
                parents_ok = false;
                push(id, Rule::OwnAncestor, format!("member is its own {role}"));
                continue;
            }
            if p.members[pid].sex != want {
                let rule = if want == Sex::Female {
                    Rule::MotherNotFemale
                } else {
                    Rule::FatherNotMale
                };
                push(id, rule, format!("{role} {pid} has sex {:?}", p.members[pid].sex));
            }
        }
    }
    if !parents_ok {
        return out;
    }
    let cycles = ancestor_cycles(p);
    let cyclic = !cycles.is_empty();
    for r in cycles {
        push(Some(r), Rule::OwnAncestor, "member is its own ancestor".into());
    }
    if !cyclic && p.has_loop() {
        push(
            None,
            Rule::Loop,
            "pedigree contains a marriage or consanguinity loop".into(),
        );
    }
    out
}

/// Members lying on a directed parent cycle.
fn ancestor_cycles(p: &Pedigree) -> Vec<usize> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let n = p.members.len();
    let mut state = vec![0u8; n];
    let mut on_cycle = vec![false; n];
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        state[start] = 1;
        while let Some(&mut (node, ref mut k)) = stack.last_mut() {
            let parents: Vec<usize> = p.members[node].parents().collect();
            if *k < parents.len() {
                let next = parents[*k];
                *k += 1;
                match state[next] {
                    0 => {
                        state[next] = 1;
                        stack.push((next, 0));
                    }
                    1 => {
                        let pos = stack.iter().position(|&(x, _)| x == next).unwrap();
                        for &(x, _) in &stack[pos..] {
                            on_cycle[x] = true;
                        }
                    }
                    _ => {}
                }
            } else {
                state[node] = 2;
                stack.pop();
            }
        }
    }
    (0..n).filter(|&i| on_cycle[i]).collect()
}

/// A factor in the individual/nuclear-family bipartite graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum FamilyUnit {
    /// Both parents known; children share this unit.
    Couple {
        mother: usize,
        father: usize,
        children: Vec<usize>,
    },
    /// Exactly one parent known.
    SingleParent { parent: usize, child: usize },
}

impl FamilyUnit {
    pub(crate) fn members(&self) -> Vec<usize> {
        match self {
            FamilyUnit::Couple {
                mother,
                father,
                children,
            } => {
                let mut v = vec![*mother, *father];
                v.extend(children);
                v
            }
            FamilyUnit::SingleParent { parent, child } => vec![*parent, *child],
        }
    }
}

/// Groups children into nuclear-family units. Assumes parent indices are in range.
pub(crate) fn family_units(p: &Pedigree) -> Vec<FamilyUnit> {
    let mut units: Vec<FamilyUnit> = Vec::new();
    for m in &p.members {
        match (m.mother, m.father) {
            (Some(mo), Some(fa)) => {
                let existing = units
                    .iter_mut()
                    .find(|u| matches!(u, FamilyUnit::Couple { mother, father, .. } if *mother == mo && *father == fa));
                match existing {
                    Some(FamilyUnit::Couple { children, .. }) => children.push(m.id),
                    _ => units.push(FamilyUnit::Couple {
                        mother: mo,
                        father: fa,
                        children: vec![m.id],
                    }),
                }
            }
            (Some(par), None) | (None, Some(par)) => units.push(FamilyUnit::SingleParent {
                parent: par,
                child: m.id,
            }),
            (None, None) => {}
        }
    }
    units
}

fn family_graph_has_cycle(p: &Pedigree) -> bool {
    let n = p.members.len();
    if p.members.iter().flat_map(|m| m.parents()).any(|x| x >= n) {
        return false;
    }
    let units = family_units(p);
    let mut parent: Vec<usize> = (0..n + units.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (k, u) in units.iter().enumerate() {
        let node = n + k;
        for v in u.members() {
            let a = find(&mut parent, node);
            let b = find(&mut parent, v);
            if a == b {
                return true;
            }
            parent[a] = b;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Three generations: grandparents 3,4 (maternal), 5,6 (paternal),
    /// parents 1,2, counselee 0, sister 7, maternal uncle 8, cousin 9
    /// (child of the uncle and an outside spouse 10).
    fn three_gen() -> Pedigree {
        let f = Sex::Female;
        let m = Sex::Male;
        let members = vec![
            Member::new(0, f, 40).with_parents(Some(1), Some(2)),
            Member::new(1, f, 65).with_parents(Some(3), Some(4)),
            Member::new(2, m, 67).with_parents(Some(5), Some(6)),
            Member::new(3, f, 88),
            Member::new(4, m, 90),
            Member::new(5, f, 85),
            Member::new(6, m, 86),
            Member::new(7, f, 38).with_parents(Some(1), Some(2)),
            Member::new(8, m, 60).with_parents(Some(3), Some(4)),
            Member::new(9, f, 30).with_parents(Some(10), Some(8)),
            Member::new(10, f, 58),
        ];
        Pedigree::new("f1", members)
    }

    #[test]
    fn classifies_two_degree_relatives() {
        let p = three_gen();
        let t = classify_all(&p);
        assert_eq!(t[0], RelativeType::Counselee);
        assert_eq!(t[1], RelativeType::Mother);
        assert_eq!(t[2], RelativeType::Father);
        assert_eq!(t[3], RelativeType::MaternalGrandmother);
        assert_eq!(t[4], RelativeType::MaternalGrandfather);
        assert_eq!(t[5], RelativeType::PaternalGrandmother);
        assert_eq!(t[6], RelativeType::PaternalGrandfather);
        assert_eq!(t[7], RelativeType::Sister);
        assert_eq!(t[8], RelativeType::MaternalUncle);
        assert_eq!(t[9], RelativeType::Other, "first cousin is degree 3");
        assert_eq!(t[10], RelativeType::Other);
    }

    #[test]
    fn classify_out_of_range() {
        let p = three_gen();
        assert!(matches!(
            classify_relative(&p, 11),
            Err(Error::IndexOutOfRange { index: 11, size: 11 })
        ));
    }

    #[test]
    fn half_sibling_is_a_sibling() {
        let mut p = three_gen();
        p.members[7].father = None;
        assert_eq!(classify_relative(&p, 7).unwrap(), RelativeType::Sister);
    }

    #[test]
    fn valid_family_has_no_violations() {
        assert!(validate(&three_gen()).is_empty());
    }

    #[test]
    fn status_without_onset_is_flagged() {
        let mut p = three_gen();
        p.members[7].breast = Diagnosis {
            affected: true,
            onset_age: Some(0),
        };
        let v = validate(&p);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].member, Some(7));
        assert_eq!(v[0].rule, Rule::StatusOnsetMismatch);
    }

    #[test]
    fn female_father_is_flagged() {
        let mut p = three_gen();
        p.members.push(Member::new(11, Sex::Female, 70));
        p.members[0].father = Some(11);
        let v = validate(&p);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].rule, Rule::FatherNotMale);
        assert_eq!(v[0].member, Some(0));
    }

    #[test]
    fn other_invariants_are_flagged() {
        let mut p = three_gen();
        p.members[2].ovarian = Diagnosis::at(50);
        p.members[3].breast = Diagnosis::at(89);
        p.members[4].current_age = Some(95);
        let rules: Vec<Rule> = validate(&p).into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&Rule::MaleOvarian));
        assert!(rules.contains(&Rule::OnsetAfterCurrentAge));
        assert!(rules.contains(&Rule::AgeRange));
    }

    #[test]
    fn ancestor_cycle_is_flagged() {
        let mut p = three_gen();
        p.members[3].mother = Some(7);
        let v = validate(&p);
        assert!(v.iter().any(|x| x.rule == Rule::OwnAncestor), "{v:?}");
    }

    #[test]
    fn consanguinity_is_a_loop() {
        let mut p = three_gen();
        // cousin 9 has a child with the counselee's brother 11
        p.members
            .push(Member::new(11, Sex::Male, 35).with_parents(Some(1), Some(2)));
        p.members
            .push(Member::new(12, Sex::Female, 5).with_parents(Some(9), Some(11)));
        assert!(p.has_loop());
        assert!(validate(&p).iter().any(|v| v.rule == Rule::Loop));
        assert!(!three_gen().has_loop());
    }

    #[test]
    fn retain_reroutes_parent_links() {
        let p = three_gen();
        let q = p.retain_members(|m| m.id != 1);
        assert_eq!(q.len(), 10);
        assert_eq!(q.members[0].mother, None);
        assert_eq!(q.members[0].father, Some(1));
        assert!(validate(&q).is_empty());
    }
}
