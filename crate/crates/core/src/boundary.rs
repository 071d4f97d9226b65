//! Translation-invariant diagonal solutions of the boundary equations
//! `Tr(ω0 h) = 1` and `Φ(h, h) = h`, and the phase classification by `Δ(θ)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::ComplexMatrix;
use crate::model::{transfer_coeffs, transfer_coeffs_numeric, transfer_map, xy_bond_pauli_coeffs, xy_only_coeffs, ModelParams, Pauli};
use crate::{Error, Result};

/// `|Δ| ≤ DELTA_TOL` is classified as the boundary of the ordered region.
pub const DELTA_TOL: f64 = 1e-12;
/// `|R(J)|` below this is treated as the excluded line `J = ±J0`.
pub const SINGULAR_TOL: f64 = 1e-14;
/// Accepted Frobenius residual of `Φ(h) − h`.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Disordered,
    OrderedPlus,
    OrderedMinus,
    XyOnly,
}

impl Branch {
    pub fn is_ordered(self) -> bool {
        matches!(self, Branch::OrderedPlus | Branch::OrderedMinus)
    }
}

impl FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disordered" | "alpha" => Ok(Branch::Disordered),
            "plus" | "ordered_plus" | "ordered-plus" => Ok(Branch::OrderedPlus),
            "minus" | "ordered_minus" | "ordered-minus" => Ok(Branch::OrderedMinus),
            "xy" | "xy_only" | "xy-only" => Ok(Branch::XyOnly),
            other => Err(Error::Format(format!("unknown branch {other:?}"))),
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Disordered => "disordered",
            Branch::OrderedPlus => "ordered_plus",
            Branch::OrderedMinus => "ordered_minus",
            Branch::XyOnly => "xy_only",
        })
    }
}

/// A solved boundary pair `(ω0, h)`; both matrices are diagonal and stored by their diagonals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySolution {
    pub branch: Branch,
    pub h: [f64; 2],
    pub omega0: [f64; 2],
    pub xi0: Option<f64>,
    pub xi3: Option<f64>,
    pub alpha: Option<f64>,
    pub residual: f64,
}

impl BoundarySolution {
    pub fn h_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::real_diag(&self.h)
    }

    pub fn omega0_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::real_diag(&self.omega0)
    }

    /// `Tr(ω0 h)`, which the construction pins to one.
    pub fn normalization(&self) -> f64 {
        0.5 * (self.omega0[0] * self.h[0] + self.omega0[1] * self.h[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Unique,
    PhaseTransition,
    Boundary,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Unique => "unique",
            Classification::PhaseTransition => "phase_transition",
            Classification::Boundary => "boundary",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRegion {
    pub delta: f64,
    pub classification: Classification,
    /// The critical `J0` for this `(J, β)`, relevant when `|J| < J0`.
    pub threshold: f64,
    /// Classification from the threshold inequality alone.
    pub threshold_classification: Classification,
}

impl PhaseRegion {
    /// True when the sign of `Δ` and the threshold inequality agree; boundary points agree with anything.
    pub fn agrees(&self) -> bool {
        self.classification == Classification::Boundary
            || self.classification == self.threshold_classification
    }
}

/// `R(J) = (θ^{J0−J} − 1)(θ^{J0+J} − 1)`, evaluated with `expm1` for accuracy.
pub fn r_factor(p: &ModelParams) -> f64 {
    (2.0 * p.beta * (p.j0 - p.j)).exp_m1() * (2.0 * p.beta * (p.j0 + p.j)).exp_m1()
}

/// `Δ(θ) = (R − 4)/R = 1 − 4/R`.
pub fn delta_theta(p: &ModelParams) -> Result<f64> {
    let r = r_factor(p);
    if !(r.abs() >= SINGULAR_TOL) {
        return Err(Error::SingularParameter(format!(
            "J = ±J0 is excluded (j0 = {}, j = {}, R = {r:.3e})",
            p.j0, p.j
        )));
    }
    Ok((r - 4.0) / r)
}

/// `(1/2β) ln(cosh(2Jβ) + sqrt(cosh²(2Jβ) + 3))`: for `|J| < J0` the ordered
/// region is `J0` above this value.
pub fn critical_j0(j: f64, beta: f64) -> f64 {
    let ch = (2.0 * j * beta).cosh();
    (ch + (ch * ch + 3.0).sqrt()).ln() / (2.0 * beta)
}

fn classify(delta: f64) -> Classification {
    if delta.abs() <= DELTA_TOL {
        Classification::Boundary
    } else if delta > 0.0 {
        Classification::PhaseTransition
    } else {
        Classification::Unique
    }
}

pub fn phase_region(p: &ModelParams) -> Result<PhaseRegion> {
    let delta = delta_theta(p)?;
    let threshold = critical_j0(p.j, p.beta);
    let threshold_classification = if (p.j0 - p.j) * (p.j0 + p.j) < 0.0 {
        // R < 0 so Δ = 1 − 4/R > 1
        Classification::PhaseTransition
    } else if p.j0 > threshold {
        Classification::PhaseTransition
    } else if p.j0 < threshold {
        Classification::Unique
    } else {
        Classification::Boundary
    };
    Ok(PhaseRegion {
        delta,
        classification: classify(delta),
        threshold,
        threshold_classification,
    })
}

/// `‖Φ(h, h) − h‖_F` with `Φ` built from the product vertex operator.
pub fn fixed_point_residual(p: &ModelParams, h: &ComplexMatrix) -> Result<f64> {
    Ok((&transfer_map(p, h, h)? - h).frobenius_norm())
}

fn checked(p: &ModelParams, sol: BoundarySolution) -> Result<BoundarySolution> {
    let residual = fixed_point_residual(p, &sol.h_matrix())?;
    if !(residual < RESIDUAL_TOL) {
        return Err(Error::ModelInconsistency {
            what: format!("{} boundary fails the fixed-point equation", sol.branch),
            residual,
        });
    }
    Ok(BoundarySolution { residual, ..sol })
}

/// `h = α·1` with `α = 1/C1`, `ω0 = C1·1`.
pub fn solve_disordered(p: &ModelParams) -> Result<BoundarySolution> {
    p.require_binary()?;
    let c1 = transfer_coeffs(p).c1;
    let alpha = 1.0 / c1;
    checked(
        p,
        BoundarySolution {
            branch: Branch::Disordered,
            h: [alpha, alpha],
            omega0: [c1, c1],
            xi0: None,
            xi3: None,
            alpha: Some(alpha),
            residual: f64::NAN,
        },
    )
}

/// The two ordered solutions `h = ξ0·1 ± ξ3·σz`, `ω0 = ξ0⁻¹·1`, with
/// `ξ0 = 1/C3` and `ξ3 = sqrt(Δ)/C3`.
///
/// Returns `None` when `Δ ≤ 0`, and also for `J0 = 0` where `C3 = 0` and no
/// ordered root exists. When `|J| > J0` the roots exist algebraically but
/// `ξ3 > ξ0`, so `h` is indefinite and a [`Error::SolutionNotPositive`] is returned.
pub fn solve_ordered(p: &ModelParams) -> Result<Option<(BoundarySolution, BoundarySolution)>> {
    p.require_binary()?;
    if p.j0 < 0.0 {
        return Err(Error::domain(format!("ordered solver needs j0 >= 0, got {}", p.j0)));
    }
    let delta = delta_theta(p)?;
    if p.j0 == 0.0 || delta <= 0.0 {
        return Ok(None);
    }
    let tc = transfer_coeffs(p);
    let xi0 = 1.0 / tc.c3;
    let xi3 = delta.sqrt() / tc.c3;
    if xi3 > xi0 {
        return Err(Error::SolutionNotPositive { xi0, xi3 });
    }
    let make = |branch, s: f64| BoundarySolution {
        branch,
        h: [xi0 + s * xi3, xi0 - s * xi3],
        omega0: [tc.c3, tc.c3],
        xi0: Some(xi0),
        xi3: Some(xi3),
        alpha: None,
        residual: f64::NAN,
    };
    let plus = checked(p, make(Branch::OrderedPlus, 1.0))?;
    let minus = checked(p, make(Branch::OrderedMinus, -1.0))?;
    Ok(Some((plus, minus)))
}

/// The `J0 = 0` solution `h = α·1`, with `α⁻¹` the scalar `c` of `Φ(1) = c·1`
/// extracted numerically from the product operator.
pub fn solve_xy_only(p: &ModelParams) -> Result<BoundarySolution> {
    p.require_binary()?;
    if p.j0 != 0.0 {
        return Err(Error::domain(format!("xy-only solver needs j0 = 0, got {}", p.j0)));
    }
    let c = xy_only_alpha_inverse(p)?;
    let alpha = 1.0 / c;
    checked(
        p,
        BoundarySolution {
            branch: Branch::XyOnly,
            h: [alpha, alpha],
            omega0: [c, c],
            xi0: None,
            xi3: None,
            alpha: Some(alpha),
            residual: f64::NAN,
        },
    )
}

fn xy_only_alpha_inverse(p: &ModelParams) -> Result<f64> {
    let id = ComplexMatrix::identity(2);
    let phi = transfer_map(p, &id, &id)?;
    let c = phi.normalized_trace().re;
    let residual = (&phi - &id.scale_re(c)).max_abs() / c.abs().max(1.0);
    if residual > 1e-10 {
        return Err(Error::ModelInconsistency {
            what: "Φ(1) is not a multiple of the identity".into(),
            residual,
        });
    }
    Ok(c)
}

/// Comparison of the `J0 = 0` normalization against closed-form candidates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XyOnlyAlphaCheck {
    /// `c` in `Φ(1) = c·1`, from the operator.
    pub oracle_alpha_inv: f64,
    /// `R1 + 2R1² + R3²` with the listed `R`'s.
    pub displayed_alpha_inv: f64,
    /// `R1'² + 2R2² + R3²` from the Pauli decomposition of `L`.
    pub pauli_alpha_inv: f64,
    /// `cosh²(Jβ)`, the value of `Tr(L²)`.
    pub cosh_squared: f64,
    pub displayed_matches: bool,
}

pub fn xy_only_alpha_check(p: &ModelParams) -> Result<XyOnlyAlphaCheck> {
    let r = xy_only_coeffs(p)?;
    let oracle = xy_only_alpha_inverse(p)?;
    let displayed = r.r1 + 2.0 * r.r1 * r.r1 + r.r3 * r.r3;
    let [q1, q2, q3] = xy_bond_pauli_coeffs(p);
    let pauli_form = q1 * q1 + 2.0 * q2 * q2 + q3 * q3;
    Ok(XyOnlyAlphaCheck {
        oracle_alpha_inv: oracle,
        displayed_alpha_inv: displayed,
        pauli_alpha_inv: pauli_form,
        cosh_squared: (p.j * p.beta).cosh().powi(2),
        displayed_matches: (displayed - oracle).abs() <= 1e-10 * oracle.abs().max(1.0),
    })
}

/// A diagonal fixed point `h = t·1 + s·σz` of `Φ(h, h) = h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalFixedPoint {
    pub t: f64,
    pub s: f64,
}

/// Every nonzero positive semidefinite diagonal fixed point, using the
/// numerically extracted coefficients. On the diagonal class the equation
/// reduces to `t = C1 t² + C2 s²`, `s = C3 t s`.
pub fn diagonal_fixed_points(p: &ModelParams) -> Result<Vec<DiagonalFixedPoint>> {
    let tc = transfer_coeffs_numeric(p)?;
    let scale = tc.scale();
    let mut out = Vec::new();
    if tc.c1 > 0.0 {
        out.push(DiagonalFixedPoint { t: 1.0 / tc.c1, s: 0.0 });
    }
    if tc.c3.abs() > 1e-14 * scale && tc.c2.abs() > 1e-14 * scale {
        let t = 1.0 / tc.c3;
        let s2 = (t - tc.c1 * t * t) / tc.c2;
        if s2 > 0.0 {
            let s = s2.sqrt();
            out.push(DiagonalFixedPoint { t, s });
            out.push(DiagonalFixedPoint { t, s: -s });
        }
    }
    out.retain(|f| f.t > 0.0 && f.t >= f.s.abs());
    Ok(out)
}

/// `Tr(σz h)` for a diagonal `h`; `+ξ3` on the plus branch.
pub fn magnetization(sol: &BoundarySolution) -> f64 {
    let z = crate::model::pauli(Pauli::Z);
    (&z * &sol.h_matrix()).normalized_trace().re
}
