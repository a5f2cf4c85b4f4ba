//! Many-body space of spinless fermionic orbitals, optionally tensored with
//! one truncated harmonic mode.
//!
//! Basis ordering: index = occ · B + n, where `occ` is the occupation
//! bitstring (bit j set when `register[j]` is occupied), n = 0..B−1 is the
//! boson number and B = max(boson_levels, 1). Jordan–Wigner strings run over
//! the orbitals that precede the target orbital in the register.

use std::fmt;

use faer::Mat;

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Site {
    D = 1,
    B = 2,
    A = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Homo = 1,
    Lumo = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrbitalId {
    pub site: Site,
    pub level: Level,
}

impl OrbitalId {
    pub const fn new(site: Site, level: Level) -> Self {
        OrbitalId { site, level }
    }
}

impl Site {
    pub fn name(self) -> &'static str {
        match self {
            Site::D => "D",
            Site::B => "B",
            Site::A => "A",
        }
    }
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::Homo => "HOMO",
            Level::Lumo => "LUMO",
        }
    }
}

impl fmt::Display for OrbitalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.site.name(), self.level.name())
    }
}

/// (D,HOMO), (D,LUMO), (B,HOMO), (B,LUMO), (A,HOMO), (A,LUMO).
pub const FULL_REGISTER: [OrbitalId; 6] = [
    OrbitalId::new(Site::D, Level::Homo),
    OrbitalId::new(Site::D, Level::Lumo),
    OrbitalId::new(Site::B, Level::Homo),
    OrbitalId::new(Site::B, Level::Lumo),
    OrbitalId::new(Site::A, Level::Homo),
    OrbitalId::new(Site::A, Level::Lumo),
];

/// (D,HOMO), (D,LUMO), (B,LUMO), (A,LUMO).
pub const REDUCED_REGISTER: [OrbitalId; 4] = [
    OrbitalId::new(Site::D, Level::Homo),
    OrbitalId::new(Site::D, Level::Lumo),
    OrbitalId::new(Site::B, Level::Lumo),
    OrbitalId::new(Site::A, Level::Lumo),
];

/// Largest register accepted; keeps `dim` within dense-matrix reach.
pub const MAX_ORBITALS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockSpace {
    register: Vec<OrbitalId>,
    boson_levels: usize,
    dim: usize,
    tag: u64,
}

pub fn build_space(orbitals: &[OrbitalId], boson_levels: usize) -> Result<FockSpace> {
    if orbitals.is_empty() {
        return Err(Error::InvalidRegister("register is empty".into()));
    }
    if orbitals.len() > MAX_ORBITALS {
        return Err(Error::InvalidRegister(format!(
            "{} orbitals exceeds the limit of {MAX_ORBITALS}",
            orbitals.len()
        )));
    }
    for (i, o) in orbitals.iter().enumerate() {
        if orbitals[..i].contains(o) {
            return Err(Error::InvalidRegister(format!("duplicate orbital {o}")));
        }
    }
    let dim = (1usize << orbitals.len()) * boson_levels.max(1);
    // FNV-1a over the register encoding and the ladder size.
    let mut tag: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |b: u64| {
        tag ^= b;
        tag = tag.wrapping_mul(0x0100_0000_01b3);
    };
    for o in orbitals {
        feed(o.site as u64 * 4 + o.level as u64);
    }
    feed(0xff);
    feed(boson_levels as u64);
    Ok(FockSpace {
        register: orbitals.to_vec(),
        boson_levels,
        dim,
        tag,
    })
}

impl FockSpace {
    pub fn register(&self) -> &[OrbitalId] {
        &self.register
    }

    pub fn boson_levels(&self) -> usize {
        self.boson_levels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_orbitals(&self) -> usize {
        self.register.len()
    }

    pub fn tag(&self) -> u64 {
        self.tag
    }

    fn ladder(&self) -> usize {
        self.boson_levels.max(1)
    }

    pub fn position(&self, orb: OrbitalId) -> Option<usize> {
        self.register.iter().position(|&o| o == orb)
    }

    /// Basis index of an occupation bitstring and boson number.
    pub fn index(&self, occupation: usize, boson: usize) -> usize {
        occupation * self.ladder() + boson
    }

    /// Occupation bitstring and boson number of a basis index.
    pub fn decompose(&self, index: usize) -> (usize, usize) {
        (index / self.ladder(), index % self.ladder())
    }

    pub fn particle_number(&self, index: usize) -> usize {
        self.decompose(index).0.count_ones() as usize
    }

    /// Basis indices grouped by electron number 0..=M_orb, ascending within each group.
    pub fn sectors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_orbitals() + 1];
        for i in 0..self.dim {
            out[self.particle_number(i)].push(i);
        }
        out
    }

    fn operator(&self, matrix: Mat<C64>) -> ManyBodyOperator {
        ManyBodyOperator {
            matrix,
            tag: self.tag,
        }
    }

    pub fn zero_operator(&self) -> ManyBodyOperator {
        self.operator(Mat::zeros(self.dim, self.dim))
    }

    pub fn identity(&self) -> ManyBodyOperator {
        self.operator(Mat::identity(self.dim, self.dim))
    }

    /// Wraps an external matrix as an operator of this space.
    pub fn wrap(&self, matrix: Mat<C64>) -> Result<ManyBodyOperator> {
        if matrix.nrows() != self.dim || matrix.ncols() != self.dim {
            return Err(Error::InvalidOperand(format!(
                "matrix is {}x{}, space dimension is {}",
                matrix.nrows(),
                matrix.ncols(),
                self.dim
            )));
        }
        Ok(self.operator(matrix))
    }
}

/// Dense operator tied to the space it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ManyBodyOperator {
    matrix: Mat<C64>,
    tag: u64,
}

impl ManyBodyOperator {
    pub fn matrix(&self) -> &Mat<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn space_tag(&self) -> u64 {
        self.tag
    }

    pub fn check_same_space(&self, other: &ManyBodyOperator) -> Result<()> {
        if self.tag != other.tag || self.dim() != other.dim() {
            return Err(Error::InvalidOperand(format!(
                "operators from different spaces (dims {} and {})",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }

    /// A new operator on the same space as `self`.
    pub fn with_matrix(&self, matrix: Mat<C64>) -> Result<ManyBodyOperator> {
        if matrix.nrows() != self.dim() || matrix.ncols() != self.dim() {
            return Err(Error::InvalidOperand(format!(
                "matrix is {}x{}, operator dimension is {}",
                matrix.nrows(),
                matrix.ncols(),
                self.dim()
            )));
        }
        Ok(ManyBodyOperator { matrix, tag: self.tag })
    }

    pub fn adjoint(&self) -> ManyBodyOperator {
        ManyBodyOperator {
            matrix: self.matrix.adjoint().to_owned(),
            tag: self.tag,
        }
    }

    pub fn mul(&self, other: &ManyBodyOperator) -> Result<ManyBodyOperator> {
        self.check_same_space(other)?;
        Ok(ManyBodyOperator {
            matrix: &self.matrix * &other.matrix,
            tag: self.tag,
        })
    }

    pub fn add(&self, other: &ManyBodyOperator) -> Result<ManyBodyOperator> {
        self.check_same_space(other)?;
        Ok(ManyBodyOperator {
            matrix: &self.matrix + &other.matrix,
            tag: self.tag,
        })
    }

    pub fn sub(&self, other: &ManyBodyOperator) -> Result<ManyBodyOperator> {
        self.check_same_space(other)?;
        Ok(ManyBodyOperator {
            matrix: &self.matrix - &other.matrix,
            tag: self.tag,
        })
    }

    pub fn scale(&self, s: C64) -> ManyBodyOperator {
        ManyBodyOperator {
            matrix: Mat::from_fn(self.dim(), self.dim(), |i, j| self.matrix[(i, j)] * s),
            tag: self.tag,
        }
    }

    /// [self, other]
    pub fn commutator(&self, other: &ManyBodyOperator) -> Result<ManyBodyOperator> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// {self, other}
    pub fn anticommutator(&self, other: &ManyBodyOperator) -> Result<ManyBodyOperator> {
        self.mul(other)?.add(&other.mul(self)?)
    }

    pub fn norm_fro(&self) -> f64 {
        self.matrix.norm_l2()
    }

    /// ‖self − self†‖_F
    pub fn hermiticity_defect(&self) -> f64 {
        crate::linalg::hermiticity_defect(self.matrix.as_ref())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).sum()
    }
}

/// Matrix of d_orb.
pub fn annihilator(space: &FockSpace, orb: OrbitalId) -> Result<ManyBodyOperator> {
    let j = space
        .position(orb)
        .ok_or_else(|| Error::InvalidOrbital(orb.to_string()))?;
    let bit = 1usize << j;
    let below = bit - 1;
    let mut m = Mat::<C64>::zeros(space.dim, space.dim);
    for col in 0..space.dim {
        let (occ, n) = space.decompose(col);
        if occ & bit != 0 {
            let sign = if (occ & below).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[(space.index(occ ^ bit, n), col)] = C64::new(sign, 0.0);
        }
    }
    Ok(space.operator(m))
}

pub fn creator(space: &FockSpace, orb: OrbitalId) -> Result<ManyBodyOperator> {
    Ok(annihilator(space, orb)?.adjoint())
}

/// Matrix of c on the truncated ladder, identity on the fermions.
pub fn boson_annihilator(space: &FockSpace) -> Result<ManyBodyOperator> {
    if space.boson_levels < 2 {
        return Err(Error::NoBosonMode(space.boson_levels));
    }
    let mut m = Mat::<C64>::zeros(space.dim, space.dim);
    for col in 0..space.dim {
        let (occ, n) = space.decompose(col);
        if n > 0 {
            m[(space.index(occ, n - 1), col)] = C64::new((n as f64).sqrt(), 0.0);
        }
    }
    Ok(space.operator(m))
}

/// d†_orb d_orb, built directly as a diagonal.
pub fn orbital_number(space: &FockSpace, orb: OrbitalId) -> Result<ManyBodyOperator> {
    let j = space
        .position(orb)
        .ok_or_else(|| Error::InvalidOrbital(orb.to_string()))?;
    let mut m = Mat::<C64>::zeros(space.dim, space.dim);
    for i in 0..space.dim {
        if space.decompose(i).0 & (1 << j) != 0 {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
    }
    Ok(space.operator(m))
}

/// Total electron number Σ d†d.
pub fn number_operator(space: &FockSpace) -> ManyBodyOperator {
    let mut m = Mat::<C64>::zeros(space.dim, space.dim);
    for i in 0..space.dim {
        m[(i, i)] = C64::new(space.particle_number(i) as f64, 0.0);
    }
    space.operator(m)
}

/// c†c
pub fn boson_number(space: &FockSpace) -> Result<ManyBodyOperator> {
    if space.boson_levels < 2 {
        return Err(Error::NoBosonMode(space.boson_levels));
    }
    let mut m = Mat::<C64>::zeros(space.dim, space.dim);
    for i in 0..space.dim {
        m[(i, i)] = C64::new(space.decompose(i).1 as f64, 0.0);
    }
    Ok(space.operator(m))
}
