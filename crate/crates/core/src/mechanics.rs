//! Symmetric second-order tensors, rotations, invariants and the von Mises
//! yield function.
//!
//! Tensors store only their independent components (3 in 2D, 6 in 3D), so
//! symmetry holds by construction. All operations are pure functions of value
//! inputs and are safe to call concurrently.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric second-order tensor in 2D (strain or stress).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymTensor2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

/// Symmetric second-order tensor in 3D.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymTensor3 {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub yz: f64,
    pub xz: f64,
}

/// Pair of principal stresses (MPa). The yield function is symmetric in the
/// two components, so no ordering is imposed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrincipalStress2 {
    pub s1: f64,
    pub s2: f64,
}

/// How a 2D tensor is embedded into 3D before taking the deviator.
///
/// Both embeddings set the out-of-plane normal component to zero; they differ
/// only in which field (strain vs. stress) the stored components represent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Embedding {
    /// In-plane strain components with `zz = 0` (plane-strain kinematics).
    PlaneStrain,
    /// In-plane stress components with `zz = 0` (plane-stress loading).
    PlaneStress,
}

/// In-plane rotation by an angle, expanded to a matrix on demand.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation2 {
    pub angle: f64,
}

/// 3D rotation parameterized by a polar/azimuthal angle pair,
/// `Q = Rz(phi) * Ry(theta)`. The identity is `(0, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation3 {
    pub theta: f64,
    pub phi: f64,
}

impl Rotation2 {
    pub fn new(angle: f64) -> Self {
        assert!(angle.is_finite(), "rotation angle must be finite");
        Rotation2 { angle }
    }

    pub fn identity() -> Self {
        Rotation2 { angle: 0.0 }
    }

    /// 2x2 rotation matrix, column-major as `[[r11, r21], [r12, r22]]`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.angle.sin_cos();
        [[c, s], [-s, c]]
    }
}

impl Rotation3 {
    pub fn new(theta: f64, phi: f64) -> Self {
        assert!(
            theta.is_finite() && phi.is_finite(),
            "rotation angles must be finite"
        );
        Rotation3 { theta, phi }
    }

    pub fn identity() -> Self {
        Rotation3 {
            theta: 0.0,
            phi: 0.0,
        }
    }

    /// Rotation matrix `Q = Rz(phi) * Ry(theta)`, rows of Q.
    ///
    /// `Q * e3` is the unit direction with polar angle `theta` and azimuth
    /// `phi`, so sweeping `(theta, phi)` with the `sin(theta)` surface
    /// measure moves the third axis uniformly over the sphere.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [
            [cp * ct, -sp, cp * st],
            [sp * ct, cp, sp * st],
            [-st, 0.0, ct],
        ]
    }
}

impl SymTensor2 {
    pub fn new(xx: f64, yy: f64, xy: f64) -> Self {
        let t = SymTensor2 { xx, yy, xy };
        assert!(t.is_finite(), "tensor components must be finite");
        t
    }

    pub fn zero() -> Self {
        SymTensor2::default()
    }

    pub fn diag(xx: f64, yy: f64) -> Self {
        SymTensor2::new(xx, yy, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.yy.is_finite() && self.xy.is_finite()
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Embeds into 3D with a zero out-of-plane normal component.
    pub fn embed(&self, _embedding: Embedding) -> SymTensor3 {
        SymTensor3 {
            xx: self.xx,
            yy: self.yy,
            zz: 0.0,
            xy: self.xy,
            yz: 0.0,
            xz: 0.0,
        }
    }

    /// 3D deviator of the embedded tensor.
    pub fn deviator(&self, embedding: Embedding) -> SymTensor3 {
        self.embed(embedding).deviator()
    }

    /// Frobenius norm of the 3D deviator of the embedded tensor.
    pub fn dev_norm(&self, embedding: Embedding) -> f64 {
        self.deviator(embedding).frobenius_norm()
    }

    /// Similarity transform `Q^T * T * Q`.
    pub fn rotate(&self, r: &Rotation2) -> SymTensor2 {
        let (s, c) = r.angle.sin_cos();
        let (c2, s2, sc) = (c * c, s * s, s * c);
        SymTensor2 {
            xx: c2 * self.xx + 2.0 * sc * self.xy + s2 * self.yy,
            yy: s2 * self.xx - 2.0 * sc * self.xy + c2 * self.yy,
            xy: sc * (self.yy - self.xx) + (c2 - s2) * self.xy,
        }
    }

    pub fn scale(&self, factor: f64) -> SymTensor2 {
        SymTensor2 {
            xx: factor * self.xx,
            yy: factor * self.yy,
            xy: factor * self.xy,
        }
    }

    pub fn add(&self, other: &SymTensor2) -> SymTensor2 {
        SymTensor2 {
            xx: self.xx + other.xx,
            yy: self.yy + other.yy,
            xy: self.xy + other.xy,
        }
    }
}

impl SymTensor3 {
    #[allow(clippy::too_many_arguments)]
    pub fn new(xx: f64, yy: f64, zz: f64, xy: f64, yz: f64, xz: f64) -> Self {
        let t = SymTensor3 {
            xx,
            yy,
            zz,
            xy,
            yz,
            xz,
        };
        assert!(t.is_finite(), "tensor components must be finite");
        t
    }

    pub fn zero() -> Self {
        SymTensor3::default()
    }

    pub fn diag(xx: f64, yy: f64, zz: f64) -> Self {
        SymTensor3::new(xx, yy, zz, 0.0, 0.0, 0.0)
    }

    pub fn identity() -> Self {
        SymTensor3::diag(1.0, 1.0, 1.0)
    }

    pub fn is_finite(&self) -> bool {
        [self.xx, self.yy, self.zz, self.xy, self.yz, self.xz]
            .iter()
            .all(|c| c.is_finite())
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    /// `T - (tr(T)/3) * I`; the result is traceless.
    pub fn deviator(&self) -> SymTensor3 {
        let p = self.trace() / 3.0;
        SymTensor3 {
            xx: self.xx - p,
            yy: self.yy - p,
            zz: self.zz - p,
            xy: self.xy,
            yz: self.yz,
            xz: self.xz,
        }
    }

    /// Frobenius norm; off-diagonal components count twice.
    pub fn frobenius_norm(&self) -> f64 {
        (self.xx * self.xx
            + self.yy * self.yy
            + self.zz * self.zz
            + 2.0 * (self.xy * self.xy + self.yz * self.yz + self.xz * self.xz))
            .sqrt()
    }

    /// Frobenius norm of the deviator; zero iff the tensor is spherical.
    pub fn dev_norm(&self) -> f64 {
        self.deviator().frobenius_norm()
    }

    pub fn det(&self) -> f64 {
        self.xx * (self.yy * self.zz - self.yz * self.yz)
            - self.xy * (self.xy * self.zz - self.yz * self.xz)
            + self.xz * (self.xy * self.yz - self.yy * self.xz)
    }

    /// Principal invariants `(I1, I2, I3)`:
    /// `I1 = tr T`, `I2 = (tr^2 T - tr T^2) / 2`, `I3 = det T`.
    pub fn invariants(&self) -> (f64, f64, f64) {
        let i1 = self.trace();
        let tr_sq = self.xx * self.xx
            + self.yy * self.yy
            + self.zz * self.zz
            + 2.0 * (self.xy * self.xy + self.yz * self.yz + self.xz * self.xz);
        let i2 = 0.5 * (i1 * i1 - tr_sq);
        (i1, i2, self.det())
    }

    /// Similarity transform `Q^T * T * Q`.
    pub fn rotate(&self, r: &Rotation3) -> SymTensor3 {
        let q = r.matrix();
        let t = [
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ];
        // m = T * Q
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = (0..3).map(|k| t[i][k] * q[k][j]).sum();
            }
        }
        // out = Q^T * m, symmetrized against rounding drift
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| q[k][i] * m[k][j]).sum();
            }
        }
        SymTensor3 {
            xx: out[0][0],
            yy: out[1][1],
            zz: out[2][2],
            xy: 0.5 * (out[0][1] + out[1][0]),
            yz: 0.5 * (out[1][2] + out[2][1]),
            xz: 0.5 * (out[0][2] + out[2][0]),
        }
    }

    pub fn scale(&self, factor: f64) -> SymTensor3 {
        SymTensor3 {
            xx: factor * self.xx,
            yy: factor * self.yy,
            zz: factor * self.zz,
            xy: factor * self.xy,
            yz: factor * self.yz,
            xz: factor * self.xz,
        }
    }

    pub fn add(&self, other: &SymTensor3) -> SymTensor3 {
        SymTensor3 {
            xx: self.xx + other.xx,
            yy: self.yy + other.yy,
            zz: self.zz + other.zz,
            xy: self.xy + other.xy,
            yz: self.yz + other.yz,
            xz: self.xz + other.xz,
        }
    }

    pub fn sub(&self, other: &SymTensor3) -> SymTensor3 {
        self.add(&other.scale(-1.0))
    }
}

impl PrincipalStress2 {
    pub fn new(s1: f64, s2: f64) -> Self {
        assert!(
            s1.is_finite() && s2.is_finite(),
            "principal stresses must be finite"
        );
        PrincipalStress2 { s1, s2 }
    }
}

/// Von Mises yield function in principal-stress space:
/// `phi = sqrt(s1^2 + s2^2 - s1*s2) - sigma_y`.
///
/// `phi <= 0` labels an elastic state, `phi > 0` an inadmissible one.
pub fn von_mises_phi(s: PrincipalStress2, sigma_y: f64) -> Result<f64> {
    if sigma_y.is_nan() || sigma_y <= 0.0 {
        return Err(Error::invalid(
            "sigma_y",
            format!("yield stress must be positive, got {sigma_y}"),
        ));
    }
    Ok(dev_stress_norm(s) - sigma_y)
}

/// Scalar stress statistic `sqrt(s1^2 + s2^2 - s1*s2)`, the effective stress
/// driving shear-dominated yielding. Absolutely homogeneous and symmetric in
/// its arguments. Under a Frobenius deviator convention the statistic would
/// carry a constant extra factor; any fixed positive rescaling induces the
/// same level sets, so binning and averaging are unaffected.
pub fn dev_stress_norm(s: PrincipalStress2) -> f64 {
    (s.s1 * s.s1 + s.s2 * s.s2 - s.s1 * s.s2).sqrt()
}
