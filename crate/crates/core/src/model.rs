//! Interaction operators of the Ising model with competing XY couplings.
//!
//! Every vertex `u` of the binary tree carries the three-site operator
//! `A = K_{u,(u,1)} K_{u,(u,2)} L_{(u,1),(u,2)}` on the ordered sites
//! `(u, (u,1), (u,2))`. Contracting `A (a ⊗ b1 ⊗ b2) A*` over the two
//! successors is the basic step of every state evaluation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::{c, kron_all, re, ComplexMatrix, SiteOperator, C64};
use crate::tree::TreeCoord;
use crate::{Error, Result};

/// Tolerance for the structure check in [`transfer_coeffs_numeric`], relative to `max(1, C1)`.
pub const EXTRACTION_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl FromStr for Pauli {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "i" => Ok(Pauli::I),
            "X" | "x" => Ok(Pauli::X),
            "Y" | "y" => Ok(Pauli::Y),
            "Z" | "z" => Ok(Pauli::Z),
            other => Err(Error::Format(format!("unknown Pauli label {other:?}"))),
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pauli::I => "I",
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        };
        f.write_str(s)
    }
}

pub fn pauli(p: Pauli) -> ComplexMatrix {
    let z = C64::default();
    let one = re(1.0);
    let rows = match p {
        Pauli::I => [[one, z], [z, one]],
        Pauli::X => [[z, one], [one, z]],
        Pauli::Y => [[z, c(0.0, -1.0)], [c(0.0, 1.0), z]],
        Pauli::Z => [[one, z], [z, -one]],
    };
    ComplexMatrix::from_fn(2, |i, j| rows[i][j])
}

/// Matrix unit `e_ij` (0-based), e.g. `e(0,0) = |0><0|`.
pub fn matrix_unit(i: usize, j: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(2, |r, s| if r == i && s == j { re(1.0) } else { C64::default() })
}

/// Couplings and inverse temperature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub j0: f64,
    pub j: f64,
    pub beta: f64,
    pub k: usize,
}

impl ModelParams {
    /// Binary-tree parameters; `beta` must be positive and all values finite.
    pub fn new(j0: f64, j: f64, beta: f64) -> Result<Self> {
        Self::with_order(j0, j, beta, 2)
    }

    pub fn with_order(j0: f64, j: f64, beta: f64, k: usize) -> Result<Self> {
        if !(j0.is_finite() && j.is_finite() && beta.is_finite()) {
            return Err(Error::domain("parameters must be finite"));
        }
        if beta <= 0.0 {
            return Err(Error::domain(format!("beta must be positive, got {beta}")));
        }
        if k == 0 {
            return Err(Error::domain("tree order must be at least 1"));
        }
        Ok(ModelParams { j0, j, beta, k })
    }

    /// `θ = exp(2β)`.
    pub fn theta(&self) -> f64 {
        (2.0 * self.beta).exp()
    }

    pub(crate) fn require_binary(&self) -> Result<()> {
        if self.k != 2 {
            return Err(Error::UnsupportedOrder(self.k));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorCoeffs {
    pub k0: f64,
    pub k3: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub delta1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferCoeffs {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl TransferCoeffs {
    /// Largest magnitude among the three, floored at one; the natural scale for tolerances.
    pub fn scale(&self) -> f64 {
        1f64.max(self.c1.abs()).max(self.c2.abs()).max(self.c3.abs())
    }

    pub fn max_rel_diff(&self, other: &TransferCoeffs) -> f64 {
        let d = (self.c1 - other.c1)
            .abs()
            .max((self.c2 - other.c2).abs())
            .max((self.c3 - other.c3).abs());
        d / self.scale().max(other.scale())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XYOnlyCoeffs {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

pub fn operator_coeffs(p: &ModelParams) -> OperatorCoeffs {
    let e = (p.j0 * p.beta).exp();
    let e2 = (2.0 * p.j0 * p.beta).exp();
    let (ch, sh) = ((p.j * p.beta).cosh(), (p.j * p.beta).sinh());
    OperatorCoeffs {
        k0: (e + 1.0) / 2.0,
        k3: (e - 1.0) / 2.0,
        gamma1: 0.25 * (e2 + 1.0 + 2.0 * e * ch),
        gamma2: 0.5 * e * sh,
        gamma3: 0.25 * (e2 + 1.0 - 2.0 * e * ch),
        delta1: 0.25 * (e2 - 1.0),
    }
}

fn kron2(a: Pauli, b: Pauli) -> ComplexMatrix {
    pauli(a).kron(&pauli(b))
}

fn kron3(a: Pauli, b: Pauli, c: Pauli) -> ComplexMatrix {
    kron_all([&pauli(a), &pauli(b), &pauli(c)])
}

/// `½(1⊗1 + σz⊗σz)`, the projection onto aligned spins.
pub fn ising_generator() -> ComplexMatrix {
    (&kron2(Pauli::I, Pauli::I) + &kron2(Pauli::Z, Pauli::Z)).scale_re(0.5)
}

/// `½(σx⊗σx + σy⊗σy)`, the flip-flop coupling.
pub fn xy_generator() -> ComplexMatrix {
    (&kron2(Pauli::X, Pauli::X) + &kron2(Pauli::Y, Pauli::Y)).scale_re(0.5)
}

/// `K = K0·1⊗1 + K3·σz⊗σz`.
pub fn ising_bond(p: &ModelParams) -> ComplexMatrix {
    let oc = operator_coeffs(p);
    &kron2(Pauli::I, Pauli::I).scale_re(oc.k0) + &kron2(Pauli::Z, Pauli::Z).scale_re(oc.k3)
}

/// `exp(J0 β H)` through the spectral exponential.
pub fn ising_bond_exp(p: &ModelParams) -> Result<ComplexMatrix> {
    ising_generator().scale_re(p.j0 * p.beta).herm_exp()
}

/// `L = 1 + sinh(Jβ) H + (cosh(Jβ) − 1) H²`, using `H³ = H`.
pub fn xy_bond(p: &ModelParams) -> ComplexMatrix {
    let h = xy_generator();
    let h2 = &h * &h;
    let x = p.j * p.beta;
    let lin = &ComplexMatrix::identity(4) + &h.scale_re(x.sinh());
    &lin + &h2.scale_re(x.cosh() - 1.0)
}

pub fn xy_bond_exp(p: &ModelParams) -> Result<ComplexMatrix> {
    xy_generator().scale_re(p.j * p.beta).herm_exp()
}

fn vertex_sites() -> [TreeCoord; 3] {
    [TreeCoord::root(), TreeCoord::from_digits(&[1]), TreeCoord::from_digits(&[2])]
}

/// Embeds a two-site operator on the pair `(s, t)` of the vertex triple.
fn embed_pair(m: &ComplexMatrix, s: usize, t: usize) -> Result<ComplexMatrix> {
    let sites = vertex_sites();
    let op = SiteOperator::new(vec![sites[s].clone(), sites[t].clone()], m.clone())?;
    op.embed(&sites)
}

/// `A = K_{u,(u,1)} · K_{u,(u,2)} · L_{(u,1),(u,2)}` on `(u, (u,1), (u,2))`.
pub fn vertex_operator(p: &ModelParams) -> Result<ComplexMatrix> {
    p.require_binary()?;
    let k = ising_bond(p);
    let l = xy_bond(p);
    let k1 = embed_pair(&k, 0, 1)?;
    let k2 = embed_pair(&k, 0, 2)?;
    let l12 = embed_pair(&l, 1, 2)?;
    Ok(&(&k1 * &k2) * &l12)
}

/// The six-term Pauli expansion of `A`.
pub fn vertex_operator_closed(p: &ModelParams) -> Result<ComplexMatrix> {
    use Pauli::*;
    p.require_binary()?;
    let oc = operator_coeffs(p);
    let terms = [
        (oc.gamma1, kron3(I, I, I)),
        (oc.gamma2, kron3(I, X, X)),
        (oc.gamma2, kron3(I, Y, Y)),
        (oc.gamma3, kron3(I, Z, Z)),
        (oc.delta1, kron3(Z, I, Z)),
        (oc.delta1, kron3(Z, Z, I)),
    ];
    Ok(terms
        .iter()
        .fold(ComplexMatrix::zeros(8), |acc, (w, m)| &acc + &m.scale_re(*w)))
}

/// Normalized partial trace of an 8×8 operator over its last two factors.
pub fn trace_successors(m: &ComplexMatrix) -> ComplexMatrix {
    debug_assert_eq!(m.dim(), 8);
    ComplexMatrix::from_fn(2, |i, j| {
        (0..4).map(|t| m.get(4 * i + t, 4 * j + t)).sum::<C64>() * 0.25
    })
}

/// `Tr_{(u,1),(u,2)} A (a ⊗ b1 ⊗ b2) A*` for a precomputed vertex operator `A`.
pub fn vertex_map(vertex: &ComplexMatrix, a: &ComplexMatrix, b1: &ComplexMatrix, b2: &ComplexMatrix) -> ComplexMatrix {
    let inner = kron_all([a, b1, b2]);
    trace_successors(&(&(vertex * &inner) * &vertex.adjoint()))
}

/// `Φ(h1, h2) = Tr_{(u,1),(u,2)} A (1 ⊗ h1 ⊗ h2) A*`.
pub fn transfer_map(p: &ModelParams, h1: &ComplexMatrix, h2: &ComplexMatrix) -> Result<ComplexMatrix> {
    let a = vertex_operator(p)?;
    Ok(vertex_map(&a, &ComplexMatrix::identity(2), h1, h2))
}

pub fn transfer_coeffs(p: &ModelParams) -> TransferCoeffs {
    let e2 = (2.0 * p.j0 * p.beta).exp();
    let e4 = (4.0 * p.j0 * p.beta).exp();
    let ch = (2.0 * p.j * p.beta).cosh();
    TransferCoeffs {
        c1: 0.25 * (e4 + 1.0) + 0.5 * e2 * ch,
        c2: 0.25 * (e4 + 1.0) - 0.5 * e2 * ch,
        c3: 0.5 * (e4 - 1.0),
    }
}

/// `Φ(h1, h2)` for diagonal `h`'s through the closed-form coefficients:
/// `[C1 t1 t2 + C2 s1 s2] 1 + (C3/2)(t1 s2 + s1 t2) σz` with `t = Tr h`, `s = Tr σz h`.
pub fn transfer_map_closed(tc: &TransferCoeffs, h1: &ComplexMatrix, h2: &ComplexMatrix) -> ComplexMatrix {
    let z = pauli(Pauli::Z);
    let (t1, s1) = (h1.normalized_trace(), (&z * h1).normalized_trace());
    let (t2, s2) = (h2.normalized_trace(), (&z * h2).normalized_trace());
    let id_part = t1 * t2 * tc.c1 + s1 * s2 * tc.c2;
    let z_part = (t1 * s2 + s1 * t2) * (tc.c3 / 2.0);
    &ComplexMatrix::identity(2).scale(id_part) + &z.scale(z_part)
}

/// Extracts `(C1, C2, C3)` from the product operator by partial traces:
/// `Φ(1) = C1·1` and `Φ(1+σz) = (C1+C2)·1 + C3·σz`.
pub fn transfer_coeffs_numeric(p: &ModelParams) -> Result<TransferCoeffs> {
    let a = vertex_operator(p)?;
    let id = ComplexMatrix::identity(2);
    let up = &id + &pauli(Pauli::Z);
    let phi_i = vertex_map(&a, &id, &id, &id);
    let phi_up = vertex_map(&a, &id, &up, &up);

    let c1 = phi_i.normalized_trace().re;
    let sum = phi_up.normalized_trace().re;
    let c3 = (&pauli(Pauli::Z) * &phi_up).normalized_trace().re;
    let tc = TransferCoeffs { c1, c2: sum - c1, c3 };

    // Φ(1) must be scalar and Φ(1+σz) diagonal with real entries
    let scale = 1f64.max(c1.abs());
    let residual = [
        (phi_i.get(0, 0) - phi_i.get(1, 1)).norm(),
        phi_i.get(0, 1).norm(),
        phi_i.get(1, 0).norm(),
        phi_i.get(0, 0).im.abs(),
        phi_up.get(0, 1).norm(),
        phi_up.get(1, 0).norm(),
        phi_up.get(0, 0).im.abs(),
        phi_up.get(1, 1).im.abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
        / scale;
    if residual > EXTRACTION_TOL {
        return Err(Error::ModelInconsistency {
            what: "transfer map is not of the expected diagonal form".into(),
            residual,
        });
    }
    Ok(tc)
}

/// The constants `R1 = (cosh Jβ + 1)/4`, `R2 = sinh(Jβ)/2`, `R3 = (1 − cosh Jβ)/2` of the `J0 = 0` model.
pub fn xy_only_coeffs(p: &ModelParams) -> Result<XYOnlyCoeffs> {
    if p.j0 != 0.0 {
        return Err(Error::domain(format!("xy-only coefficients need j0 = 0, got {}", p.j0)));
    }
    let x = p.j * p.beta;
    Ok(XYOnlyCoeffs {
        r1: (x.cosh() + 1.0) / 4.0,
        r2: x.sinh() / 2.0,
        r3: (1.0 - x.cosh()) / 2.0,
    })
}

/// Pauli decomposition of `L`: `L = R1'·1⊗1 + R2(σx⊗σx + σy⊗σy) + R3·σz⊗σz`,
/// where `R1' = (cosh Jβ + 1)/2`.
pub fn xy_bond_pauli_coeffs(p: &ModelParams) -> [f64; 3] {
    let x = p.j * p.beta;
    [(x.cosh() + 1.0) / 2.0, x.sinh() / 2.0, (1.0 - x.cosh()) / 2.0]
}
