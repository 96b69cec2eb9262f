//! Single-qubit states and channels in the affine Bloch representation.
//!
//! A state is the real vector of Pauli expectations `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)`;
//! a channel acts on it as `α ↦ Mα + t`. Kraus operators appear only in the
//! test oracles.

use nalgebra::{Complex, Matrix2, Matrix3, Matrix4, SymmetricEigen, Vector3};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on `|α| ≤ 1` before a state counts as non-physical.
pub const PHYSICAL_TOL: f64 = 1e-9;

/// Default slack on Choi eigenvalues for the complete-positivity check.
pub const CP_TOL: f64 = 1e-9;

/// Bloch vector of a qubit state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector(pub Vector3<f64>);

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }

    /// Validating constructor.
    pub fn physical(x: f64, y: f64, z: f64) -> Result<Self> {
        let v = Self::new(x, y, z);
        if v.is_physical() {
            Ok(v)
        } else {
            Err(Error::NonPhysical { norm: v.norm() })
        }
    }

    pub fn maximally_mixed() -> Self {
        Self(Vector3::zeros())
    }

    /// Pure state along a unit axis.
    pub fn along(axis: &Vector3<f64>) -> Self {
        Self(*axis)
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }

    pub fn z(&self) -> f64 {
        self.0.z
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_physical(&self) -> bool {
        self.norm_squared() <= 1.0 + PHYSICAL_TOL
    }

    pub fn is_pure(&self) -> bool {
        (self.norm_squared() - 1.0).abs() <= PHYSICAL_TOL
    }
}

/// `Tr(ρ²) = (1 + |α|²)/2`.
pub fn purity(state: &BlochVector) -> f64 {
    0.5 * (1.0 + state.norm_squared())
}

/// Purity with the identity part removed: `|α|²`.
pub fn purity_metric(state: &BlochVector) -> f64 {
    state.norm_squared()
}

/// Probability of projecting onto the pure state along `target_axis`.
pub fn survival_probability(state: &BlochVector, target_axis: &Vector3<f64>) -> f64 {
    debug_assert!((target_axis.norm() - 1.0).abs() < 1e-9, "target axis must be a unit vector");
    0.5 * (1.0 + state.0.dot(target_axis))
}

/// Affine action of a qubit channel on Bloch vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliTransferMap {
    /// Unital block.
    pub m: Matrix3<f64>,
    /// Non-unital shift.
    pub t: Vector3<f64>,
}

impl Default for PauliTransferMap {
    fn default() -> Self {
        Self::identity()
    }
}

impl PauliTransferMap {
    pub fn new(m: Matrix3<f64>, t: Vector3<f64>) -> Self {
        Self { m, t }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    /// Depolarizing channel that shrinks every Bloch vector by `p`.
    pub fn depolarizing(p: f64) -> Self {
        Self::new(Matrix3::identity() * p, Vector3::zeros())
    }

    /// Amplitude damping with decay probability `gamma` towards the ground
    /// state at `-z`.
    pub fn amplitude_damping(gamma: f64) -> Self {
        let s = (1.0 - gamma).sqrt();
        Self::new(Matrix3::from_diagonal(&Vector3::new(s, s, 1.0 - gamma)), Vector3::new(0.0, 0.0, -gamma))
    }

    /// Pure dephasing: transverse components scaled by `lambda`.
    pub fn dephasing(lambda: f64) -> Self {
        Self::new(Matrix3::from_diagonal(&Vector3::new(lambda, lambda, 1.0)), Vector3::zeros())
    }

    /// Rotation by `angle` (right-handed) about `axis`. The axis is normalized.
    pub fn rotation(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.normalize();
        let (s, c) = angle.sin_cos();
        let k = Matrix3::new(0.0, -n.z, n.y, n.z, 0.0, -n.x, -n.y, n.x, 0.0);
        let m = Matrix3::identity() * c + k * s + n * n.transpose() * (1.0 - c);
        Self::new(m, Vector3::zeros())
    }

    /// Channel realizing an exact SO(3) matrix.
    pub fn unitary(rot: &Matrix3<f64>) -> Self {
        Self::new(*rot, Vector3::zeros())
    }

    /// `self ∘ inner`: apply `inner` first, then `self`.
    pub fn after(&self, inner: &PauliTransferMap) -> PauliTransferMap {
        PauliTransferMap::new(self.m * inner.m, self.m * inner.t + self.t)
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &PauliTransferMap) -> PauliTransferMap {
        next.after(self)
    }

    /// Applies the map without the physicality check.
    #[inline]
    pub fn act(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.m * v + self.t
    }

    /// Choi matrix `Σ_ij E(|i⟩⟨j|) ⊗ |i⟩⟨j|` (4×4, Hermitian).
    pub fn choi(&self) -> Matrix4<Complex<f64>> {
        let zero = Complex::new(0.0, 0.0);
        let mut choi = Matrix4::from_element(zero);
        for i in 0..2 {
            for j in 0..2 {
                let mut unit = Matrix2::from_element(zero);
                unit[(i, j)] = Complex::new(1.0, 0.0);
                let out = self.act_on_operator(&unit);
                for a in 0..2 {
                    for b in 0..2 {
                        choi[(2 * a + i, 2 * b + j)] = out[(a, b)];
                    }
                }
            }
        }
        choi
    }

    /// Linear extension of the channel to arbitrary 2×2 operators.
    fn act_on_operator(&self, op: &Matrix2<Complex<f64>>) -> Matrix2<Complex<f64>> {
        let [sx, sy, sz] = paulis();
        let trace = op.trace();
        let coeff = |s: &Matrix2<Complex<f64>>| (s * op).trace();
        let c = [coeff(&sx), coeff(&sy), coeff(&sz)];
        let mut out_c = [Complex::new(0.0, 0.0); 3];
        for (k, slot) in out_c.iter_mut().enumerate() {
            let mut acc = Complex::new(self.t[k], 0.0) * trace;
            for (l, cl) in c.iter().enumerate() {
                acc += Complex::new(self.m[(k, l)], 0.0) * cl;
            }
            *slot = acc;
        }
        let id = Matrix2::identity();
        (id * trace + sx * out_c[0] + sy * out_c[1] + sz * out_c[2]) * Complex::new(0.5, 0.0)
    }

    /// Eigenvalues of the Choi matrix, ascending.
    pub fn choi_eigenvalues(&self) -> [f64; 4] {
        let eig = SymmetricEigen::new(self.choi());
        let mut ev = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2], eig.eigenvalues[3]];
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Complete positivity with the given eigenvalue slack.
    pub fn is_cp_with(&self, tol: f64) -> bool {
        self.choi_eigenvalues()[0] >= -tol
    }

    pub fn is_cp(&self) -> bool {
        self.is_cp_with(CP_TOL)
    }

    /// Largest image norm over a deterministic grid of `samples` unit vectors.
    pub fn max_image_norm(&self, samples: usize) -> f64 {
        fibonacci_sphere(samples)
            .map(|v| self.act(&v).norm())
            .fold(0.0, f64::max)
    }
}

/// Evenly spread unit vectors.
pub fn fibonacci_sphere(samples: usize) -> impl Iterator<Item = Vector3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let n = samples.max(2);
    (0..n).map(move |i| {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = golden * i as f64;
        Vector3::new(r * phi.cos(), r * phi.sin(), z)
    })
}

fn paulis() -> [Matrix2<Complex<f64>>; 3] {
    let o = Complex::new(0.0, 0.0);
    let l = Complex::new(1.0, 0.0);
    let i = Complex::new(0.0, 1.0);
    [
        Matrix2::new(o, l, l, o),
        Matrix2::new(o, -i, i, o),
        Matrix2::new(l, o, o, -l),
    ]
}

/// `α ↦ Mα + t`, rejecting outputs outside the Bloch ball.
pub fn apply_map(map: &PauliTransferMap, state: &BlochVector) -> Result<BlochVector> {
    let out = BlochVector(map.act(&state.0));
    if out.is_physical() {
        Ok(out)
    } else {
        Err(Error::NonPhysical { norm: out.norm() })
    }
}

/// Unitarity `Tr(MᵀM)/3`.
pub fn channel_unitarity(map: &PauliTransferMap) -> f64 {
    (map.m.transpose() * map.m).trace() / 3.0
}

/// Average gate infidelity `(3 − Tr M)/6`.
pub fn channel_avg_infidelity(map: &PauliTransferMap) -> f64 {
    (3.0 - map.m.trace()) / 6.0
}

/// Finite-shot outcome of one measurement setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotCounts {
    pub shots: u32,
    /// Outcomes that projected onto the target axis.
    pub ones: u32,
}

impl ShotCounts {
    pub fn new(shots: u32, ones: u32) -> Result<Self> {
        if shots == 0 {
            return Err(Error::InvalidArgument("shots must be positive".into()));
        }
        if ones > shots {
            return Err(Error::InvalidArgument(format!("ones {ones} exceeds shots {shots}")));
        }
        Ok(Self { shots, ones })
    }

    pub fn frequency(&self) -> f64 {
        self.ones as f64 / self.shots as f64
    }

    /// `2·ones/shots − 1`.
    pub fn expectation(&self) -> f64 {
        2.0 * self.frequency() - 1.0
    }
}

/// Draws `Binomial(shots, prob)`.
pub fn sample_counts<R: Rng + ?Sized>(prob: f64, shots: u32, rng: &mut R) -> Result<ShotCounts> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    if !(-PHYSICAL_TOL..=1.0 + PHYSICAL_TOL).contains(&prob) || prob.is_nan() {
        return Err(Error::InvalidArgument(format!("probability {prob} outside [0, 1]")));
    }
    let p = prob.clamp(0.0, 1.0);
    let ones = Binomial::new(shots as u64, p)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .sample(rng) as u32;
    ShotCounts::new(shots, ones)
}
