//! Qubit measurement algebra: Pauli matrices, Bloch-parametrized binary
//! POVMs, dichotomic observables, and joint-measurability checks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{herm_eigenvalues, ComplexMatrix, PSD_TOL};

// ---------------------------------------------------------------------------
// Pauli matrices and Bloch vectors
// ---------------------------------------------------------------------------

/// Pauli matrix by index: 1 = x, 2 = y, 3 = z.
pub fn pauli(j: usize) -> Result<ComplexMatrix> {
    let c = Complex64::new;
    let entries = match j {
        1 => vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        2 => vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
        3 => vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
        _ => return Err(Error::Parameter(format!("pauli index {} not in 1..=3", j))),
    };
    ComplexMatrix::from_vec(2, 2, entries)
}

/// Real three-vector on (or inside) the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector(pub [f64; 3]);

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self([x, y, z])
    }

    pub fn zero() -> Self {
        Self([0.0; 3])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self([
            self.0[0] + other.0[0],
            self.0[1] + other.0[1],
            self.0[2] + other.0[2],
        ])
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self([
            self.0[0] - other.0[0],
            self.0[1] - other.0[1],
            self.0[2] - other.0[2],
        ])
    }

    pub fn scale(&self, f: f64) -> Self {
        Self([self.0[0] * f, self.0[1] * f, self.0[2] * f])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// The operator `r . sigma`.
    pub fn dot_sigma(&self) -> ComplexMatrix {
        let c = Complex64::new;
        let [x, y, z] = self.0;
        ComplexMatrix::from_vec(
            2,
            2,
            vec![c(z, 0.0), c(x, -y), c(x, y), c(-z, 0.0)],
        )
        .expect("2x2 construction cannot fail")
    }
}

// ---------------------------------------------------------------------------
// Binary POVMs and dichotomic observables
// ---------------------------------------------------------------------------

/// Two-outcome qubit POVM parametrized by a bias `k` and a Bloch vector `r`:
/// `M0 = [(1 + k) I + r . sigma] / 2`, `M1 = I - M0`. Both effects are
/// positive iff `|k| <= 1` and `||r|| <= 1 - |k|`.
#[derive(Debug, Clone)]
pub struct QubitBinaryPOVM {
    k: f64,
    r: BlochVector,
    effects: [ComplexMatrix; 2],
}

/// Construct a binary POVM from its `(k, r)` parameters, validating that
/// both effects are positive semidefinite.
pub fn povm_from_bloch(k: f64, r: BlochVector) -> Result<QubitBinaryPOVM> {
    if !k.is_finite() || !r.is_finite() {
        return Err(Error::InvalidPovm("non-finite POVM parameters".into()));
    }
    if k.abs() > 1.0 + 1e-12 {
        return Err(Error::InvalidPovm(format!("bias k = {} outside [-1, 1]", k)));
    }
    let n = r.norm();
    if n > 1.0 + k + 1e-9 {
        return Err(Error::InvalidPovm(format!(
            "||r|| = {:.6} exceeds 1 + k = {:.6}; effect M0 is not PSD",
            n,
            1.0 + k
        )));
    }
    if n > 1.0 - k + 1e-9 {
        return Err(Error::InvalidPovm(format!(
            "||r|| = {:.6} exceeds 1 - k = {:.6}; effect M1 is not PSD",
            n,
            1.0 - k
        )));
    }
    let id = ComplexMatrix::identity(2);
    let m0 = id
        .scale_re(1.0 + k)
        .add(&r.dot_sigma())
        .expect("shape fixed")
        .scale_re(0.5);
    let m1 = id.sub(&m0).expect("shape fixed");
    Ok(QubitBinaryPOVM {
        k,
        r,
        effects: [m0, m1],
    })
}

impl QubitBinaryPOVM {
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn r(&self) -> BlochVector {
        self.r
    }

    pub fn effect(&self, outcome: usize) -> &ComplexMatrix {
        &self.effects[outcome]
    }

    pub fn effects(&self) -> &[ComplexMatrix; 2] {
        &self.effects
    }

    /// Projective measurement along a unit Bloch direction.
    pub fn projective(r: BlochVector) -> Result<Self> {
        if (r.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidPovm(
                "projective measurement needs a unit Bloch vector".into(),
            ));
        }
        povm_from_bloch(0.0, r)
    }
}

/// The +/-1-valued observable `M0 - M1` of a binary POVM.
#[derive(Debug, Clone)]
pub struct DichotomicObservable {
    op: ComplexMatrix,
}

impl DichotomicObservable {
    /// Wrap an arbitrary Hermitian operator after checking its spectrum
    /// lies inside [-1, 1].
    pub fn from_operator(op: ComplexMatrix) -> Result<Self> {
        let vals = herm_eigenvalues(&op)?;
        let lo = vals.first().copied().unwrap_or(0.0);
        let hi = vals.last().copied().unwrap_or(0.0);
        if lo < -1.0 - 1e-9 || hi > 1.0 + 1e-9 {
            return Err(Error::Parameter(format!(
                "observable spectrum [{:.6}, {:.6}] exceeds [-1, 1]",
                lo, hi
            )));
        }
        Ok(Self { op })
    }

    pub fn op(&self) -> &ComplexMatrix {
        &self.op
    }
}

/// Dichotomic observable `A = M0 - M1 = k I + r . sigma` of a binary POVM.
pub fn observable(povm: &QubitBinaryPOVM) -> DichotomicObservable {
    let op = povm.effects[0].sub(&povm.effects[1]).expect("shape fixed");
    DichotomicObservable { op }
}

// ---------------------------------------------------------------------------
// Joint measurability of unbiased pairs
// ---------------------------------------------------------------------------

/// Compatibility test for an unbiased (k = 0) pair of binary POVMs with
/// Bloch vectors `r1`, `r2`. Returns `(compatible, margin)` with
/// `margin = 2 - ||r1 + r2|| - ||r1 - r2||`; the pair is jointly measurable
/// iff the margin is non-negative.
pub fn jm_pair_check(r1: &BlochVector, r2: &BlochVector) -> Result<(bool, f64)> {
    for r in [r1, r2] {
        if !r.is_finite() {
            return Err(Error::Parameter("non-finite Bloch vector".into()));
        }
        if r.norm() > 1.0 + 1e-9 {
            return Err(Error::Parameter(format!(
                "unbiased-pair check needs ||r|| <= 1, got {:.6}",
                r.norm()
            )));
        }
    }
    let margin = 2.0 - r1.add(r2).norm() - r1.sub(r2).norm();
    Ok((margin >= -1e-12, margin))
}

/// Joint-measurement decomposition of a compatible pair:
/// `(r1 + r2)/2 = cos^2(omega) s` and `(r1 - r2)/2 = sin^2(omega) t`
/// with `||s|| <= 1`, `||t|| <= 1`.
#[derive(Debug, Clone, Copy)]
pub struct JmDecomposition {
    pub omega: f64,
    pub s: BlochVector,
    pub t: BlochVector,
}

impl JmDecomposition {
    /// Recompose `(r1, r2)` from the decomposition.
    pub fn reconstruct(&self) -> (BlochVector, BlochVector) {
        let cw = self.omega.cos().powi(2);
        let sw = self.omega.sin().powi(2);
        let half_sum = self.s.scale(cw);
        let half_diff = self.t.scale(sw);
        (half_sum.add(&half_diff), half_sum.sub(&half_diff))
    }
}

/// Split a compatible pair into its joint-measurement decomposition. Any
/// slack below the compatibility boundary is shared evenly between the two
/// branches, which keeps the map deterministic and continuous and bounds
/// `||s||, ||t||` by 1.
pub fn jm_decompose(r1: &BlochVector, r2: &BlochVector) -> Result<JmDecomposition> {
    let (compatible, margin) = jm_pair_check(r1, r2)?;
    if !compatible {
        return Err(Error::IncompatiblePair { margin });
    }
    let sum = r1.add(r2);
    let diff = r1.sub(r2);
    let u = sum.norm() / 2.0;
    let v = diff.norm() / 2.0;
    let slack = (1.0 - u - v).max(0.0);

    let cos2 = u + slack / 2.0;
    let sin2 = 1.0 - cos2;
    let s = if cos2 > 1e-15 {
        sum.scale(1.0 / (2.0 * cos2))
    } else {
        BlochVector::zero()
    };
    let t = if sin2 > 1e-15 {
        diff.scale(1.0 / (2.0 * sin2))
    } else {
        BlochVector::zero()
    };
    Ok(JmDecomposition {
        omega: cos2.clamp(0.0, 1.0).sqrt().acos(),
        s,
        t,
    })
}

/// PSD check helper used by POVM consumers: smallest eigenvalue above the
/// toolkit floor.
pub fn is_psd(m: &ComplexMatrix) -> Result<bool> {
    let vals = herm_eigenvalues(m)?;
    Ok(vals.first().is_none_or(|&v| v >= PSD_TOL))
}

/// Uniformly random unit Bloch vector (rejection sampling from the cube).
pub fn random_unit_bloch(rng: &mut impl rand::Rng) -> BlochVector {
    loop {
        let v = BlochVector::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v.scale(1.0 / n);
        }
    }
}

/// Random orthonormal pair of Bloch directions.
pub fn random_orthonormal_axes(rng: &mut impl rand::Rng) -> (BlochVector, BlochVector) {
    loop {
        let a = random_unit_bloch(rng);
        let raw = random_unit_bloch(rng);
        let b = raw.sub(&a.scale(raw.dot(&a)));
        let n = b.norm();
        if n > 1e-3 {
            return (a, b.scale(1.0 / n));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pauli_z_is_diag() {
        let sz = pauli(3).unwrap();
        assert_eq!(sz.get(0, 0), Complex64::new(1.0, 0.0));
        assert_eq!(sz.get(1, 1), Complex64::new(-1.0, 0.0));
        assert_eq!(sz.get(0, 1), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn pauli_algebra_xy_is_iz() {
        let prod = pauli(1).unwrap().matmul(&pauli(2).unwrap()).unwrap();
        let iz = pauli(3).unwrap().scale(Complex64::new(0.0, 1.0));
        assert!(prod.max_abs_diff(&iz) < 1e-15);
    }

    #[test]
    fn paulis_traceless() {
        for j in 1..=3 {
            assert!(pauli(j).unwrap().trace().norm() < 1e-15);
        }
    }

    #[test]
    fn pauli_index_out_of_range() {
        assert!(pauli(0).is_err());
        assert!(pauli(4).is_err());
    }

    #[test]
    fn projective_z_povm() {
        let p = povm_from_bloch(0.0, BlochVector::new(0.0, 0.0, 1.0)).unwrap();
        let expected0 = ComplexMatrix::identity(2)
            .add(&pauli(3).unwrap())
            .unwrap()
            .scale_re(0.5);
        assert!(p.effect(0).max_abs_diff(&expected0) < 1e-15);
        let sum = p.effect(0).add(p.effect(1)).unwrap();
        assert!(sum.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn povm_rejects_oversized_bloch_vector() {
        let r = BlochVector::new(0.0, 0.0, 2.0);
        assert!(matches!(
            povm_from_bloch(0.5, r),
            Err(Error::InvalidPovm(_))
        ));
    }

    #[test]
    fn povm_rejects_bias_overflow() {
        // ||r|| <= 1 + k holds but M1 = I - M0 would dip negative
        let r = BlochVector::new(0.8, 0.0, 0.0);
        assert!(povm_from_bloch(0.5, r).is_err());
    }

    #[test]
    fn unit_bloch_gives_rank_one_effect() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p = povm_from_bloch(0.0, BlochVector::new(s, 0.0, s)).unwrap();
        let vals = herm_eigenvalues(p.effect(0)).unwrap();
        assert!(vals[0].abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn observable_examples() {
        let p = povm_from_bloch(0.0, BlochVector::new(1.0, 0.0, 0.0)).unwrap();
        assert!(observable(&p).op().max_abs_diff(&pauli(1).unwrap()) < 1e-15);

        let p = povm_from_bloch(0.2, BlochVector::new(0.0, 0.0, 0.5)).unwrap();
        let expected = ComplexMatrix::identity(2)
            .scale_re(0.2)
            .add(&pauli(3).unwrap().scale_re(0.5))
            .unwrap();
        assert!(observable(&p).op().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn observable_trace_is_twice_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let k: f64 = rng.gen_range(-0.5..0.5);
            let max_r = 1.0 - k.abs();
            let dir = random_unit(&mut rng);
            let r = dir.scale(rng.gen_range(0.0..max_r));
            let p = povm_from_bloch(k, r).unwrap();
            let tr = observable(&p).op().trace();
            assert!((tr.re - 2.0 * k).abs() < 1e-12);
            assert!(tr.im.abs() < 1e-15);
        }
    }

    #[test]
    fn povm_effects_always_psd_and_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..100 {
            let k: f64 = rng.gen_range(-0.9..0.9);
            let dir = random_unit(&mut rng);
            let r = dir.scale(rng.gen_range(0.0..(1.0 - k.abs())));
            let p = povm_from_bloch(k, r).unwrap();
            for outcome in 0..2 {
                assert!(is_psd(p.effect(outcome)).unwrap());
            }
            let sum = p.effect(0).add(p.effect(1)).unwrap();
            assert!(sum.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-12);
        }
    }

    #[test]
    fn jm_check_examples() {
        let ex = BlochVector::new(1.0, 0.0, 0.0);
        let (ok, margin) = jm_pair_check(&ex, &ex).unwrap();
        assert!(ok);
        assert!(margin.abs() < 1e-12);

        let ez = BlochVector::new(0.0, 0.0, 1.0);
        let (ok, margin) = jm_pair_check(&ex, &ez).unwrap();
        assert!(!ok);
        assert!((margin - (2.0 - 2.0 * 2.0_f64.sqrt())).abs() < 1e-12);

        let half = BlochVector::new(0.0, 0.0, 0.5);
        let (ok, margin) = jm_pair_check(&half, &half).unwrap();
        assert!(ok);
        assert!((margin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jm_check_symmetric_and_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let r1 = random_unit(&mut rng).scale(rng.gen_range(0.0..1.0));
            let r2 = random_unit(&mut rng).scale(rng.gen_range(0.0..1.0));
            let (_, m12) = jm_pair_check(&r1, &r2).unwrap();
            let (_, m21) = jm_pair_check(&r2, &r1).unwrap();
            assert!((m12 - m21).abs() < 1e-14);

            let rot = random_rotation(&mut rng);
            let (_, mr) = jm_pair_check(&apply(&rot, &r1), &apply(&rot, &r2)).unwrap();
            assert!((m12 - mr).abs() < 1e-10);
        }
    }

    #[test]
    fn jm_decompose_forced_split() {
        let r1 = BlochVector::new(0.5, 0.0, 0.5);
        let r2 = BlochVector::new(0.5, 0.0, -0.5);
        let d = jm_decompose(&r1, &r2).unwrap();
        assert!((d.omega.cos().powi(2) - 0.5).abs() < 1e-12);
        assert!((d.s.0[0] - 1.0).abs() < 1e-12);
        assert!((d.t.0[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jm_decompose_degenerate_zero_pair() {
        let z = BlochVector::zero();
        let d = jm_decompose(&z, &z).unwrap();
        assert!((d.omega - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert_eq!(d.s.norm(), 0.0);
        assert_eq!(d.t.norm(), 0.0);
    }

    #[test]
    fn jm_decompose_round_trip_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let mut tested = 0;
        while tested < 200 {
            let r1 = random_unit(&mut rng).scale(rng.gen_range(0.0..1.0));
            let r2 = random_unit(&mut rng).scale(rng.gen_range(0.0..1.0));
            let (ok, _) = jm_pair_check(&r1, &r2).unwrap();
            if !ok {
                continue;
            }
            tested += 1;
            let d = jm_decompose(&r1, &r2).unwrap();
            assert!(d.s.norm() <= 1.0 + 1e-9);
            assert!(d.t.norm() <= 1.0 + 1e-9);
            let (b1, b2) = d.reconstruct();
            assert!(b1.sub(&r1).norm() < 1e-9);
            assert!(b2.sub(&r2).norm() < 1e-9);
        }
    }

    #[test]
    fn jm_decompose_rejects_incompatible() {
        let r1 = BlochVector::new(1.0, 0.0, 0.0);
        let r2 = BlochVector::new(0.0, 0.0, 1.0);
        assert!(matches!(
            jm_decompose(&r1, &r2),
            Err(Error::IncompatiblePair { .. })
        ));
    }

    fn random_unit(rng: &mut ChaCha8Rng) -> BlochVector {
        loop {
            let v = BlochVector::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 1e-3 {
                return v.scale(1.0 / n);
            }
        }
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
        // Gram-Schmidt on random vectors; third axis from the cross product.
        let a = random_unit(rng);
        let mut b = random_unit(rng);
        let proj = b.dot(&a);
        b = b.sub(&a.scale(proj));
        let bn = b.norm();
        if bn < 1e-6 {
            return random_rotation(rng);
        }
        b = b.scale(1.0 / bn);
        let c = BlochVector::new(
            a.0[1] * b.0[2] - a.0[2] * b.0[1],
            a.0[2] * b.0[0] - a.0[0] * b.0[2],
            a.0[0] * b.0[1] - a.0[1] * b.0[0],
        );
        [a.0, b.0, c.0]
    }

    fn apply(rot: &[[f64; 3]; 3], v: &BlochVector) -> BlochVector {
        BlochVector::new(
            rot[0][0] * v.0[0] + rot[0][1] * v.0[1] + rot[0][2] * v.0[2],
            rot[1][0] * v.0[0] + rot[1][1] * v.0[1] + rot[1][2] * v.0[2],
            rot[2][0] * v.0[0] + rot[2][1] * v.0[1] + rot[2][2] * v.0[2],
        )
    }
}
