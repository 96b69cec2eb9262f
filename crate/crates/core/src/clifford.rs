//! The 24-element single-qubit Clifford group as signed permutations of the
//! Pauli axes.
//!
//! Each element is stored by its SO(3) action on `(x, y, z)`, so composition
//! and inversion are exact integer operations. Global phase is dropped.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::Matrix3;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Number of single-qubit Cliffords.
pub const GROUP_ORDER: usize = 24;

/// Integer rotation matrix with entries in `{-1, 0, 1}`.
pub type SignedPermutation = [[i8; 3]; 3];

/// A Clifford identified by its index in [`enumerate_group`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CliffordElement(u8);

struct Tables {
    rots: Vec<SignedPermutation>,
    product: [[u8; GROUP_ORDER]; GROUP_ORDER],
    inverse: [u8; GROUP_ORDER],
}

fn det3(m: &SignedPermutation) -> i32 {
    let m = |r: usize, c: usize| m[r][c] as i32;
    m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
        + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
}

fn matmul(a: &SignedPermutation, b: &SignedPermutation) -> SignedPermutation {
    let mut out = [[0i8; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

fn transpose(a: &SignedPermutation) -> SignedPermutation {
    let mut out = [[0i8; 3]; 3];
    for (r, row) in a.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            out[c][r] = *v;
        }
    }
    out
}

const IDENTITY: SignedPermutation = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut rots = vec![IDENTITY];
        for perm in perms {
            for signs in 0..8u8 {
                let mut m = [[0i8; 3]; 3];
                for (row, &col) in perm.iter().enumerate() {
                    m[row][col] = if signs & (1 << row) != 0 { -1 } else { 1 };
                }
                if det3(&m) == 1 && m != IDENTITY {
                    rots.push(m);
                }
            }
        }
        assert_eq!(rots.len(), GROUP_ORDER);
        let find = |m: &SignedPermutation| rots.iter().position(|r| r == m).expect("group is closed") as u8;
        let mut product = [[0u8; GROUP_ORDER]; GROUP_ORDER];
        let mut inverse = [0u8; GROUP_ORDER];
        for a in 0..GROUP_ORDER {
            for b in 0..GROUP_ORDER {
                product[a][b] = find(&matmul(&rots[a], &rots[b]));
            }
            inverse[a] = find(&transpose(&rots[a]));
        }
        Tables { rots, product, inverse }
    })
}

impl CliffordElement {
    pub const IDENTITY: CliffordElement = CliffordElement(0);

    pub fn from_index(index: usize) -> Option<Self> {
        (index < GROUP_ORDER).then_some(Self(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Looks up the element with the given SO(3) action.
    pub fn from_rot(rot: &SignedPermutation) -> Option<Self> {
        tables().rots.iter().position(|r| r == rot).map(|i| Self(i as u8))
    }

    pub fn rot(self) -> &'static SignedPermutation {
        &tables().rots[self.index()]
    }

    pub fn matrix(self) -> Matrix3<f64> {
        let r = self.rot();
        Matrix3::from_fn(|i, j| r[i][j] as f64)
    }

    /// π rotation about x.
    pub fn x_pi() -> Self {
        Self::from_rot(&[[1, 0, 0], [0, -1, 0], [0, 0, -1]]).unwrap()
    }

    /// +π/2 rotation about x.
    pub fn x_half() -> Self {
        Self::from_rot(&[[1, 0, 0], [0, 0, -1], [0, 1, 0]]).unwrap()
    }

    /// +π/2 rotation about y.
    pub fn y_half() -> Self {
        Self::from_rot(&[[0, 0, 1], [0, 1, 0], [-1, 0, 0]]).unwrap()
    }

    /// +π/2 rotation about z.
    pub fn z_half() -> Self {
        Self::from_rot(&[[0, -1, 0], [1, 0, 0], [0, 0, 1]]).unwrap()
    }
}

impl fmt::Display for CliffordElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

/// All 24 elements; index 0 is the identity.
pub fn enumerate_group() -> Vec<CliffordElement> {
    (0..GROUP_ORDER as u8).map(CliffordElement).collect()
}

/// Element whose rotation is `rot(a)·rot(b)` (apply `b` first).
pub fn compose(a: CliffordElement, b: CliffordElement) -> CliffordElement {
    CliffordElement(tables().product[a.index()][b.index()])
}

pub fn inverse(g: CliffordElement) -> CliffordElement {
    CliffordElement(tables().inverse[g.index()])
}

/// Net element `g_m ⋯ g_1` of a sequence applied first-to-last.
pub fn sequence_product(seq: &[CliffordElement]) -> CliffordElement {
    seq.iter().fold(CliffordElement::IDENTITY, |acc, &g| compose(g, acc))
}

/// Measurement basis selected by the compiled inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    /// Rotation that carries the z axis onto this basis axis:
    /// identity, +π/2 about y, and −π/2 about x respectively.
    pub fn rotation(self) -> CliffordElement {
        match self {
            Basis::Z => CliffordElement::IDENTITY,
            Basis::X => CliffordElement::y_half(),
            Basis::Y => inverse(CliffordElement::x_half()),
        }
    }
}

/// The single element `R_basis · X_π^flip · (g_m ⋯ g_1)⁻¹` that undoes the
/// sequence and rotates into the requested measurement basis.
pub fn compile_inverse(seq: &[CliffordElement], basis: Basis, flip: bool) -> CliffordElement {
    let undo = inverse(sequence_product(seq));
    let undo = if flip { compose(CliffordElement::x_pi(), undo) } else { undo };
    compose(basis.rotation(), undo)
}

/// `m` i.i.d. uniform Cliffords.
pub fn sample_uniform<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<CliffordElement> {
    (0..m).map(|_| CliffordElement(rng.random_range(0..GROUP_ORDER as u8))).collect()
}

/// Random gates followed by their compiled inverse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSequence {
    pub gates: Vec<CliffordElement>,
    pub inverse_element: CliffordElement,
}

impl GateSequence {
    pub fn new(gates: Vec<CliffordElement>, basis: Basis, flip: bool) -> Self {
        let inverse_element = compile_inverse(&gates, basis, flip);
        Self { gates, inverse_element }
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Net ideal rotation of the whole sequence including the inverse.
    pub fn net(&self) -> CliffordElement {
        compose(self.inverse_element, sequence_product(&self.gates))
    }

    /// Gates in execution order, inverse last.
    pub fn iter_all(&self) -> impl Iterator<Item = CliffordElement> + '_ {
        self.gates.iter().copied().chain(std::iter::once(self.inverse_element))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    #[test]
    fn brute_force_count() {
        // Every 3×3 matrix with one ±1 per row and column.
        let mut all = 0;
        let mut proper = 0;
        for code in 0..3usize.pow(9) {
            let mut m = [[0i8; 3]; 3];
            let mut c = code;
            for v in m.iter_mut().flatten() {
                *v = (c % 3) as i8 - 1;
                c /= 3;
            }
            let ok_rows = m.iter().all(|row| row.iter().filter(|v| **v != 0).count() == 1);
            let ok_cols = (0..3).all(|k| m.iter().filter(|row| row[k] != 0).count() == 1);
            if ok_rows && ok_cols {
                all += 1;
                if det3(&m) == 1 {
                    proper += 1;
                    assert!(CliffordElement::from_rot(&m).is_some());
                }
            }
        }
        assert_eq!(all, 48);
        assert_eq!(proper, 24);
        assert_eq!(enumerate_group().len(), 24);
    }

    #[test]
    fn identity_first_and_distinct() {
        let g = enumerate_group();
        assert_eq!(*g[0].rot(), IDENTITY);
        for a in &g {
            let r = a.rot();
            assert_eq!(matmul(&transpose(r), r), IDENTITY);
            assert_eq!(det3(r), 1);
        }
        for i in 0..24 {
            for j in (i + 1)..24 {
                assert_ne!(g[i].rot(), g[j].rot());
            }
        }
    }

    #[test]
    fn compose_examples() {
        for g in enumerate_group() {
            assert_eq!(compose(g, inverse(g)), CliffordElement::IDENTITY);
            assert_eq!(compose(CliffordElement::IDENTITY, g), g);
            assert_eq!(inverse(inverse(g)), g);
        }
        assert_eq!(compose(CliffordElement::x_pi(), CliffordElement::x_pi()), CliffordElement::IDENTITY);
        assert_eq!(inverse(CliffordElement::IDENTITY), CliffordElement::IDENTITY);
        let z_minus = CliffordElement::from_rot(&[[0, 1, 0], [-1, 0, 0], [0, 0, 1]]).unwrap();
        assert_eq!(inverse(CliffordElement::z_half()), z_minus);
    }

    #[test]
    fn compose_matches_matrix_product() {
        for a in enumerate_group() {
            for b in enumerate_group() {
                assert_eq!(compose(a, b).matrix(), a.matrix() * b.matrix());
            }
        }
    }

    #[test]
    fn associativity_exhaustive() {
        let g = enumerate_group();
        for &a in &g {
            for &b in &g {
                for &c in &g {
                    assert_eq!(compose(compose(a, b), c), compose(a, compose(b, c)));
                }
            }
        }
    }

    #[test]
    fn empty_sequence_compiles_to_identity() {
        assert_eq!(compile_inverse(&[], Basis::Z, false), CliffordElement::IDENTITY);
    }

    #[test]
    fn basis_rotations_map_z_axis() {
        let z = nalgebra::Vector3::z();
        assert_eq!(Basis::X.rotation().matrix() * z, nalgebra::Vector3::x());
        assert_eq!(Basis::Y.rotation().matrix() * z, nalgebra::Vector3::y());
        assert_eq!(Basis::Z.rotation().matrix() * z, z);
    }

    #[test]
    fn compiled_sequences_map_z_to_measurement_axis() {
        let mut rng = stream(3, Domain::Aux, &[1]);
        let z = nalgebra::Vector3::z();
        for m in [0, 1, 2, 7, 50] {
            let gates = sample_uniform(&mut rng, m);
            for (basis, axis) in [
                (Basis::Z, nalgebra::Vector3::z()),
                (Basis::X, nalgebra::Vector3::x()),
                (Basis::Y, nalgebra::Vector3::y()),
            ] {
                let seq = GateSequence::new(gates.clone(), basis, false);
                assert_eq!(seq.net().matrix() * z, axis);
            }
            let flipped = GateSequence::new(gates.clone(), Basis::Z, true);
            assert_eq!(flipped.net().matrix() * z, -z);
        }
    }

    #[test]
    fn sampling_is_seeded() {
        assert!(sample_uniform(&mut stream(1, Domain::Aux, &[]), 0).is_empty());
        let a = sample_uniform(&mut stream(5, Domain::Aux, &[]), 100);
        let b = sample_uniform(&mut stream(5, Domain::Aux, &[]), 100);
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_counts_within_bounds() {
        let mut rng = stream(11, Domain::Aux, &[2]);
        let mut counts = [0usize; 24];
        for g in sample_uniform(&mut rng, 24_000) {
            counts[g.index()] += 1;
        }
        assert!(counts.iter().all(|&c| (800..=1200).contains(&c)), "{counts:?}");
    }
}
