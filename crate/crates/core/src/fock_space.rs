//! Occupation-number determinants, fermionic sign bookkeeping and the
//! four-way spin-orbital partition that defines a complete active space.
//!
//! Orbital `p` is bit `p` of the occupation mask. Ladder operators pick up
//! `(-1)^n` where `n` counts occupied orbitals with a strictly smaller index
//! at the moment the operator acts; operator strings are applied right to
//! left, so `a†_a a_i |d⟩` first removes `i` and then adds `a`.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Largest number of spin-orbitals a basis may be built for.
pub const MAX_ORBITALS: usize = 16;

/// A Slater determinant over `n_orbitals` spin-orbitals.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Determinant {
    occupation: u32,
    n_orbitals: u8,
}

impl Determinant {
    pub fn new(occupation: u32, n_orbitals: usize) -> Result<Self> {
        if n_orbitals > MAX_ORBITALS {
            return Err(Error::InvalidDimension(format!(
                "{n_orbitals} spin-orbitals exceeds the limit of {MAX_ORBITALS}"
            )));
        }
        if n_orbitals < 32 && occupation >> n_orbitals != 0 {
            return Err(Error::InvalidInput(format!(
                "occupation {occupation:#b} sets bits beyond {n_orbitals} orbitals"
            )));
        }
        Ok(Self {
            occupation,
            n_orbitals: n_orbitals as u8,
        })
    }

    pub fn from_occupied(occupied: &[usize], n_orbitals: usize) -> Result<Self> {
        let mut occupation = 0u32;
        for &p in occupied {
            if p >= n_orbitals {
                return Err(Error::InvalidInput(format!(
                    "orbital {p} out of range for {n_orbitals} spin-orbitals"
                )));
            }
            if occupation & (1 << p) != 0 {
                return Err(Error::InvalidInput(format!("orbital {p} listed twice")));
            }
            occupation |= 1 << p;
        }
        Self::new(occupation, n_orbitals)
    }

    #[inline]
    pub fn occupation(&self) -> u32 {
        self.occupation
    }

    #[inline]
    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals as usize
    }

    #[inline]
    pub fn n_electrons(&self) -> usize {
        self.occupation.count_ones() as usize
    }

    #[inline]
    pub fn is_occupied(&self, p: usize) -> bool {
        self.occupation & (1 << p) != 0
    }

    pub fn occupied(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_orbitals()).filter(move |&p| self.is_occupied(p))
    }

    #[inline]
    fn sign_below(&self, p: usize) -> f64 {
        if (self.occupation & ((1u32 << p) - 1)).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// `a_p |self⟩`.
    pub fn annihilate(self, p: usize) -> Option<(Self, f64)> {
        if p >= self.n_orbitals() || !self.is_occupied(p) {
            return None;
        }
        let sign = self.sign_below(p);
        Some((
            Self {
                occupation: self.occupation & !(1 << p),
                ..self
            },
            sign,
        ))
    }

    /// `a†_p |self⟩`.
    pub fn create(self, p: usize) -> Option<(Self, f64)> {
        if p >= self.n_orbitals() || self.is_occupied(p) {
            return None;
        }
        let sign = self.sign_below(p);
        Some((
            Self {
                occupation: self.occupation | (1 << p),
                ..self
            },
            sign,
        ))
    }
}

impl fmt::Debug for Determinant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Determinant {
    /// Ket notation with orbital 0 leftmost, e.g. `|1100⟩`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for p in 0..self.n_orbitals() {
            write!(f, "{}", if self.is_occupied(p) { '1' } else { '0' })?;
        }
        write!(f, "⟩")
    }
}

/// A single creation or annihilation operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LadderOp {
    Create(usize),
    Annihilate(usize),
}

/// Applies an operator product written left to right (`ops[0]` is the
/// leftmost factor) to `d`. Returns `None` when the product annihilates `d`.
pub fn apply_string(ops: &[LadderOp], d: Determinant) -> Option<(Determinant, f64)> {
    let mut det = d;
    let mut phase = 1.0;
    for op in ops.iter().rev() {
        let (next, sign) = match *op {
            LadderOp::Create(p) => det.create(p)?,
            LadderOp::Annihilate(p) => det.annihilate(p)?,
        };
        det = next;
        phase *= sign;
    }
    Some((det, phase))
}

/// Occupied/virtual index tuples of an excitation `a†_{a1}…a†_{ak} a_{ik}…a_{i1}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct ExcitationSignature {
    occ: Vec<usize>,
    virt: Vec<usize>,
}

fn strictly_ascending(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl ExcitationSignature {
    pub fn new(occ: Vec<usize>, virt: Vec<usize>) -> Result<Self> {
        if occ.len() != virt.len() {
            return Err(Error::InvalidInput(format!(
                "occupied tuple {occ:?} and virtual tuple {virt:?} differ in length"
            )));
        }
        if !strictly_ascending(&occ) || !strictly_ascending(&virt) {
            return Err(Error::InvalidInput(format!(
                "index tuples must be strictly ascending: {occ:?} -> {virt:?}"
            )));
        }
        if occ.iter().any(|i| virt.contains(i)) {
            return Err(Error::InvalidInput(format!(
                "orbital appears as both hole and particle: {occ:?} -> {virt:?}"
            )));
        }
        Ok(Self { occ, virt })
    }

    /// The rank-0 (scalar) signature.
    pub fn identity() -> Self {
        Self {
            occ: Vec::new(),
            virt: Vec::new(),
        }
    }

    /// Holes and particles of `d` relative to `reference`.
    pub fn between(reference: Determinant, d: Determinant) -> Self {
        let holes = reference.occupation() & !d.occupation();
        let particles = d.occupation() & !reference.occupation();
        let bits = |mask: u32| (0..32).filter(|p| mask & (1 << p) != 0).collect::<Vec<_>>();
        Self {
            occ: bits(holes),
            virt: bits(particles),
        }
    }

    pub fn occ(&self) -> &[usize] {
        &self.occ
    }

    pub fn virt(&self) -> &[usize] {
        &self.virt
    }

    pub fn rank(&self) -> usize {
        self.occ.len()
    }

    /// True when every hole is occupied and every particle empty in `reference`.
    pub fn is_excitation_of(&self, reference: Determinant) -> bool {
        let m = reference.n_orbitals();
        self.occ.iter().all(|&i| i < m && reference.is_occupied(i))
            && self.virt.iter().all(|&a| a < m && !reference.is_occupied(a))
    }

    /// `a†_{a1}…a†_{ak} a_{ik}…a_{i1}` as a left-to-right product.
    pub fn excitation_ops(&self) -> Vec<LadderOp> {
        let mut ops: Vec<LadderOp> = self.virt.iter().map(|&a| LadderOp::Create(a)).collect();
        ops.extend(self.occ.iter().rev().map(|&i| LadderOp::Annihilate(i)));
        ops
    }

    /// Adjoint string `a†_{i1}…a†_{ik} a_{ak}…a_{a1}`.
    pub fn deexcitation_ops(&self) -> Vec<LadderOp> {
        let mut ops: Vec<LadderOp> = self.occ.iter().map(|&i| LadderOp::Create(i)).collect();
        ops.extend(self.virt.iter().rev().map(|&a| LadderOp::Annihilate(a)));
        ops
    }
}

impl fmt::Display for ExcitationSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}->{:?}", self.occ, self.virt)
    }
}

/// Applies the excitation string of `sig` to `d`.
pub fn apply_excitation(sig: &ExcitationSignature, d: Determinant) -> Option<(Determinant, f64)> {
    apply_string(&sig.excitation_ops(), d)
}

/// Applies the adjoint (de-excitation) string of `sig` to `d`.
pub fn apply_deexcitation(
    sig: &ExcitationSignature,
    d: Determinant,
) -> Option<(Determinant, f64)> {
    apply_string(&sig.deexcitation_ops(), d)
}

/// All determinants with fixed `(M, N)`, ordered by ascending bitmask value.
#[derive(Clone, Debug)]
pub struct FockBasis {
    n_orbitals: usize,
    n_electrons: usize,
    determinants: Vec<Determinant>,
    index: HashMap<u32, usize>,
}

pub fn build_basis(n_orbitals: usize, n_electrons: usize) -> Result<FockBasis> {
    if n_orbitals > MAX_ORBITALS {
        return Err(Error::InvalidDimension(format!(
            "{n_orbitals} spin-orbitals exceeds the limit of {MAX_ORBITALS}"
        )));
    }
    if n_electrons > n_orbitals {
        return Err(Error::InvalidDimension(format!(
            "{n_electrons} electrons do not fit in {n_orbitals} spin-orbitals"
        )));
    }
    let determinants: Vec<Determinant> = (0u32..(1u32 << n_orbitals))
        .filter(|m| m.count_ones() as usize == n_electrons)
        .map(|occupation| Determinant {
            occupation,
            n_orbitals: n_orbitals as u8,
        })
        .collect();
    let index = determinants
        .iter()
        .enumerate()
        .map(|(i, d)| (d.occupation(), i))
        .collect();
    Ok(FockBasis {
        n_orbitals,
        n_electrons,
        determinants,
        index,
    })
}

impl FockBasis {
    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn len(&self) -> usize {
        self.determinants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.determinants.is_empty()
    }

    pub fn determinants(&self) -> &[Determinant] {
        &self.determinants
    }

    pub fn get(&self, i: usize) -> Determinant {
        self.determinants[i]
    }

    pub fn index_of(&self, d: Determinant) -> Option<usize> {
        if d.n_orbitals() != self.n_orbitals {
            return None;
        }
        self.index.get(&d.occupation()).copied()
    }

    /// The determinant with the lowest `N` spin-orbitals occupied.
    pub fn aufbau_reference(&self) -> Determinant {
        let occupation = if self.n_electrons == 32 {
            u32::MAX
        } else {
            (1u32 << self.n_electrons) - 1
        };
        Determinant {
            occupation,
            n_orbitals: self.n_orbitals as u8,
        }
    }
}

/// Index class of a spin-orbital.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrbitalClass {
    OccInactive,
    OccActive,
    VirtActive,
    VirtInactive,
}

/// Split of the spin-orbitals into occupied-inactive, occupied-active,
/// virtual-active and virtual-inactive sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinOrbitalPartition {
    n_orbitals: usize,
    occ_inactive: Vec<usize>,
    occ_active: Vec<usize>,
    virt_active: Vec<usize>,
    virt_inactive: Vec<usize>,
    classes: Vec<OrbitalClass>,
}

impl SpinOrbitalPartition {
    /// Contiguous ascending blocks `μ < I < A < α` covering `0..n_orbitals`.
    pub fn new(
        n_orbitals: usize,
        occ_inactive: Vec<usize>,
        occ_active: Vec<usize>,
        virt_active: Vec<usize>,
        virt_inactive: Vec<usize>,
    ) -> Result<Self> {
        let part = Self::new_unordered(
            n_orbitals,
            occ_inactive,
            occ_active,
            virt_active,
            virt_inactive,
        )?;
        let concatenated: Vec<usize> = part
            .occ_inactive
            .iter()
            .chain(&part.occ_active)
            .chain(&part.virt_active)
            .chain(&part.virt_inactive)
            .copied()
            .collect();
        if concatenated != (0..n_orbitals).collect::<Vec<_>>() {
            return Err(Error::InvalidInput(
                "partition blocks must be contiguous and ordered occ-inactive < occ-active < virt-active < virt-inactive; use new_unordered for arbitrary sets".into(),
            ));
        }
        Ok(part)
    }

    /// Arbitrary disjoint sets covering `0..n_orbitals`.
    pub fn new_unordered(
        n_orbitals: usize,
        mut occ_inactive: Vec<usize>,
        mut occ_active: Vec<usize>,
        mut virt_active: Vec<usize>,
        mut virt_inactive: Vec<usize>,
    ) -> Result<Self> {
        if n_orbitals > MAX_ORBITALS {
            return Err(Error::InvalidDimension(format!(
                "{n_orbitals} spin-orbitals exceeds the limit of {MAX_ORBITALS}"
            )));
        }
        for set in [
            &mut occ_inactive,
            &mut occ_active,
            &mut virt_active,
            &mut virt_inactive,
        ] {
            set.sort_unstable();
        }
        let mut classes = vec![None; n_orbitals];
        for (set, class) in [
            (&occ_inactive, OrbitalClass::OccInactive),
            (&occ_active, OrbitalClass::OccActive),
            (&virt_active, OrbitalClass::VirtActive),
            (&virt_inactive, OrbitalClass::VirtInactive),
        ] {
            for &p in set.iter() {
                if p >= n_orbitals {
                    return Err(Error::InvalidInput(format!(
                        "orbital {p} out of range for {n_orbitals} spin-orbitals"
                    )));
                }
                if classes[p].is_some() {
                    return Err(Error::InvalidInput(format!(
                        "orbital {p} assigned to more than one class"
                    )));
                }
                classes[p] = Some(class);
            }
        }
        let classes = classes
            .into_iter()
            .enumerate()
            .map(|(p, c)| {
                c.ok_or_else(|| Error::InvalidInput(format!("orbital {p} not assigned to a class")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_orbitals,
            occ_inactive,
            occ_active,
            virt_active,
            virt_inactive,
            classes,
        })
    }

    /// Active window around the Fermi level: the highest `n_occ_active`
    /// occupied and the lowest `n_virt_active` virtual spin-orbitals of the
    /// aufbau reference.
    pub fn auto_homo_lumo(
        n_orbitals: usize,
        n_electrons: usize,
        n_occ_active: usize,
        n_virt_active: usize,
    ) -> Result<Self> {
        if n_electrons > n_orbitals
            || n_occ_active > n_electrons
            || n_virt_active > n_orbitals - n_electrons
        {
            return Err(Error::InvalidInput(format!(
                "active window ({n_occ_active}, {n_virt_active}) incompatible with M={n_orbitals}, N={n_electrons}"
            )));
        }
        let split_occ = n_electrons - n_occ_active;
        let split_virt = n_electrons + n_virt_active;
        Self::new(
            n_orbitals,
            (0..split_occ).collect(),
            (split_occ..n_electrons).collect(),
            (n_electrons..split_virt).collect(),
            (split_virt..n_orbitals).collect(),
        )
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn occ_inactive(&self) -> &[usize] {
        &self.occ_inactive
    }

    pub fn occ_active(&self) -> &[usize] {
        &self.occ_active
    }

    pub fn virt_active(&self) -> &[usize] {
        &self.virt_active
    }

    pub fn virt_inactive(&self) -> &[usize] {
        &self.virt_inactive
    }

    pub fn class_of(&self, p: usize) -> OrbitalClass {
        self.classes[p]
    }

    pub fn n_electrons(&self) -> usize {
        self.occ_inactive.len() + self.occ_active.len()
    }

    /// The reference determinant implied by the occupied classes.
    pub fn reference(&self) -> Determinant {
        let occupied: Vec<usize> = self
            .occ_inactive
            .iter()
            .chain(&self.occ_active)
            .copied()
            .collect();
        Determinant::from_occupied(&occupied, self.n_orbitals)
            .expect("partition indices validated at construction")
    }

    /// All holes in occ-active and all particles in virt-active.
    pub fn is_internal(&self, sig: &ExcitationSignature) -> bool {
        sig.occ()
            .iter()
            .all(|&i| i < self.n_orbitals && self.classes[i] == OrbitalClass::OccActive)
            && sig
                .virt()
                .iter()
                .all(|&a| a < self.n_orbitals && self.classes[a] == OrbitalClass::VirtActive)
    }

    /// Lowest occupied-inactive hole of `sig`, if any.
    pub fn lowest_inactive_hole(&self, sig: &ExcitationSignature) -> Option<usize> {
        sig.occ()
            .iter()
            .copied()
            .find(|&i| self.classes[i] == OrbitalClass::OccInactive)
    }

    /// Highest virtual-inactive particle of `sig`, if any.
    pub fn highest_inactive_particle(&self, sig: &ExcitationSignature) -> Option<usize> {
        sig.virt()
            .iter()
            .rev()
            .copied()
            .find(|&a| self.classes[a] == OrbitalClass::VirtInactive)
    }
}

/// Where a determinant sits relative to the complete active space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DeterminantClass {
    Reference,
    Internal,
    External,
}

pub fn classify_determinant(
    d: Determinant,
    reference: Determinant,
    part: &SpinOrbitalPartition,
) -> Result<DeterminantClass> {
    if d.n_orbitals() != reference.n_orbitals() || d.n_orbitals() != part.n_orbitals() {
        return Err(Error::InvalidInput(format!(
            "orbital count mismatch between {d}, {reference} and the partition"
        )));
    }
    if d.n_electrons() != reference.n_electrons() {
        return Err(Error::InvalidInput(format!(
            "particle-number mismatch: {d} has {} electrons, reference {reference} has {}",
            d.n_electrons(),
            reference.n_electrons()
        )));
    }
    if reference != part.reference() {
        return Err(Error::InvalidInput(format!(
            "reference {reference} does not match the partition's occupied classes {}",
            part.reference()
        )));
    }
    if d == reference {
        return Ok(DeterminantClass::Reference);
    }
    if part.is_internal(&ExcitationSignature::between(reference, d)) {
        Ok(DeterminantClass::Internal)
    } else {
        Ok(DeterminantClass::External)
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of determinants in a basis of `m` orbitals and `n` electrons.
pub fn sector_size(m: usize, n: usize) -> usize {
    binomial(m, n)
}
