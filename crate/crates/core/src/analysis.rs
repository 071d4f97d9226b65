//! Closed-form quantities of the ordered phase and their numeric counterparts.
//!
//! All per-branch formulas are written in terms of `s = Tr(σz h)`, so
//! `s = +ξ3` on [`Branch::OrderedPlus`] and `s = −ξ3` on [`Branch::OrderedMinus`].

use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{critical_j0, delta_theta, phase_region, solve_ordered, BoundarySolution, Branch, Classification};
use crate::linalg::{ComplexMatrix, C64};
use crate::model::{matrix_unit, operator_coeffs, pauli, transfer_coeffs, ModelParams, Pauli, TransferCoeffs};
use crate::state::{eval_recursive, EvalContext, Observable};
use crate::tree::{ball_vertices, TreeCoord};
use crate::{Error, Result};

/// Denominators below this (relative to the coefficient scale) are treated as singular.
const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Projector {
    /// `e11` at every site of the ball.
    P,
    /// `e22` at every site of the ball.
    Q,
}

/// The ordered solution on the requested branch.
pub fn ordered_solution(p: &ModelParams, branch: Branch) -> Result<BoundarySolution> {
    if !branch.is_ordered() {
        return Err(Error::domain(format!("{branch} is not an ordered branch")));
    }
    match solve_ordered(p)? {
        Some((plus, minus)) => Ok(if branch == Branch::OrderedPlus { plus } else { minus }),
        None => Err(Error::NoOrderedPhase { delta: delta_theta(p).unwrap_or(f64::NAN) }),
    }
}

fn branch_sign(branch: Branch) -> f64 {
    if branch == Branch::OrderedMinus {
        -1.0
    } else {
        1.0
    }
}

pub fn projector_observable(n: usize, kind: Projector) -> Observable {
    let e = match kind {
        Projector::P => matrix_unit(0, 0),
        Projector::Q => matrix_unit(1, 1),
    };
    Observable::product(ball_vertices(n, 2).into_iter().map(|x| (x, e.clone())).collect())
        .expect("distinct sites")
}

/// `(1/2ξ0) (ξ0 ± ξ3)^{2^n} ((C1+C2+C3)/4)^{2^n − 1}`, with `+` when the
/// projector is aligned with the branch (P on plus, Q on minus).
pub fn projector_expectation_closed(p: &ModelParams, n: usize, branch: Branch, kind: Projector) -> Result<f64> {
    let sol = ordered_solution(p, branch)?;
    let (xi0, xi3) = (sol.xi0.unwrap(), sol.xi3.unwrap());
    let aligned = matches!((branch, kind), (Branch::OrderedPlus, Projector::P) | (Branch::OrderedMinus, Projector::Q));
    let base = if aligned { xi0 + xi3 } else { xi0 - xi3 };
    let tc = transfer_coeffs(p);
    let m = 2f64.powi(n as i32);
    let per_vertex = (tc.c1 + tc.c2 + tc.c3) / 4.0;
    Ok(base.powf(m) * per_vertex.powf(m - 1.0) / (2.0 * xi0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProjectorScanRow {
    pub beta: f64,
    pub value: f64,
    pub distance_from_one: f64,
}

/// Closed-form projector expectations along a `β` grid.
pub fn projector_limit_scan(j0: f64, j: f64, betas: &[f64], n: usize, branch: Branch, kind: Projector) -> Result<Vec<ProjectorScanRow>> {
    betas
        .iter()
        .map(|&beta| {
            let p = ModelParams::new(j0, j, beta)?;
            let value = projector_expectation_closed(&p, n, branch, kind)?;
            Ok(ProjectorScanRow { beta, value, distance_from_one: (value - 1.0).abs() })
        })
        .collect()
}

/// Constants of the hat/check series `ψ̂_n = ρ̂1 + ρ̂2 λ^n`, `ψ̌_n = ρ̌1 + ρ̌2 λ^n`
/// (plus branch) and `π̂, π̌` (minus branch).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransferSeries {
    pub rho1_hat: f64,
    pub rho2_hat: f64,
    pub rho1_check: f64,
    pub rho2_check: f64,
    pub pi1_hat: f64,
    pub pi2_hat: f64,
    pub pi1_check: f64,
    pub pi2_check: f64,
    pub lambda: f64,
    pub xi0: f64,
    pub xi3: f64,
    pub coeffs: TransferCoeffs,
}

impl TransferSeries {
    /// `(hat_n, check_n)` in closed form on the given branch.
    pub fn closed(&self, branch: Branch, n: usize) -> (f64, f64) {
        let l = self.lambda.powi(n as i32);
        if branch == Branch::OrderedMinus {
            (self.pi1_hat + self.pi2_hat * l, self.pi1_check + self.pi2_check * l)
        } else {
            (self.rho1_hat + self.rho2_hat * l, self.rho1_check + self.rho2_check * l)
        }
    }

    /// `N = [[C1 ξ0, C3 s/2], [C2 s, 1/2]]` with `s = ±ξ3`.
    pub fn matrix_n(&self, branch: Branch) -> [[f64; 2]; 2] {
        let s = branch_sign(branch) * self.xi3;
        let tc = &self.coeffs;
        [[tc.c1 * self.xi0, tc.c3 * s / 2.0], [tc.c2 * s, 0.5]]
    }

    /// `N^n (1/ξ0, 0)` by direct iteration.
    pub fn iterate(&self, branch: Branch, n: usize) -> (f64, f64) {
        let m = self.matrix_n(branch);
        let mut v = (1.0 / self.xi0, 0.0);
        for _ in 0..n {
            v = (m[0][0] * v.0 + m[0][1] * v.1, m[1][0] * v.0 + m[1][1] * v.1);
        }
        v
    }
}

pub fn transfer_series(p: &ModelParams) -> Result<TransferSeries> {
    let sol = ordered_solution(p, Branch::OrderedPlus)?;
    let (xi0, xi3) = (sol.xi0.unwrap(), sol.xi3.unwrap());
    let tc = transfer_coeffs(p);
    let (c1, c2, c3) = (tc.c1, tc.c2, tc.c3);
    let den = 3.0 * c3 - 2.0 * c1;
    if c3.abs() <= DEGENERATE_TOL * tc.scale() || den.abs() <= DEGENERATE_TOL * tc.scale() {
        return Err(Error::SingularParameter(format!("degenerate series: C3 = {c3}, 3C3 - 2C1 = {den}")));
    }
    let rho1_hat = c3 * c3 / den;
    let rho2_hat = 2.0 * c3 * (c3 - c1) / den;
    let rho1_check = 2.0 * c2 * c3 * c3 * xi3 / den;
    Ok(TransferSeries {
        rho1_hat,
        rho2_hat,
        rho1_check,
        rho2_check: -rho1_check,
        pi1_hat: rho1_hat,
        pi2_hat: rho2_hat,
        pi1_check: -rho1_check,
        pi2_check: rho1_check,
        lambda: c1 / c3 - 0.5,
        xi0,
        xi3,
        coeffs: tc,
    })
}

/// `e11` at the first vertex `(1, …, 1)` of level `n`.
pub fn marker_observable(n: usize) -> Observable {
    Observable::single(TreeCoord::from_digits(&vec![1; n]), matrix_unit(0, 0)).expect("2x2")
}

/// `½ (ξ0+s)(C1 ξ0 + C2 s) hat_{n−1} + (C3/4)(ξ0+s)² check_{n−1}`.
pub fn marker_expectation_closed(p: &ModelParams, n: usize, branch: Branch) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("marker depth must be at least 1"));
    }
    if !branch.is_ordered() {
        return Err(Error::domain(format!("{branch} is not an ordered branch")));
    }
    let ts = transfer_series(p)?;
    let s = branch_sign(branch) * ts.xi3;
    let (hat, check) = ts.closed(branch, n - 1);
    let tc = &ts.coeffs;
    let up = ts.xi0 + s;
    Ok(0.5 * up * (tc.c1 * ts.xi0 + tc.c2 * s) * hat + tc.c3 / 4.0 * up * up * check)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuasiGap {
    /// Constant part of `φ1(E_n) − φ2(E_n)`.
    pub i1: f64,
    /// Magnitude of the `λ^{n−1}` coefficient.
    pub i2: f64,
    /// `C3 ξ3 (2C2 + C3) / (3C3 − 2C1)`.
    pub i1_closed: f64,
    /// The constant part when the check terms carry `C3/2` instead of `C3/4`.
    pub i1_with_full_c3: f64,
    pub i2_with_full_c3: f64,
    pub lam: f64,
}

impl QuasiGap {
    /// `I1 − I2 |λ|^{n−1}`.
    pub fn lower_bound(&self, n: usize) -> f64 {
        self.i1 - self.i2 * self.lam.abs().powi(n as i32 - 1)
    }
}

/// Gap constants for `|φ1(E_n) − φ2(E_n)| ≥ I1 − I2 |λ|^{n−1}`; needs `|J| < J0` and `Δ > 0`.
pub fn quasi_gap(p: &ModelParams) -> Result<QuasiGap> {
    if !(p.j.abs() < p.j0) {
        return Err(Error::domain(format!("quasi gap needs |J| < J0, got j = {}, j0 = {}", p.j, p.j0)));
    }
    let ts = transfer_series(p)?;
    let tc = &ts.coeffs;
    let (xi0, xi3) = (ts.xi0, ts.xi3);
    let den = 3.0 * tc.c3 - 2.0 * tc.c1;
    // difference of the plus and minus marker brackets with check weight w
    let diff = |hat_p: f64, check_p: f64, hat_m: f64, check_m: f64, w: f64| {
        let plus = 0.5 * (xi0 + xi3) * (tc.c1 * xi0 + tc.c2 * xi3) * hat_p + w * (xi0 + xi3).powi(2) * check_p;
        let minus = 0.5 * (xi0 - xi3) * (tc.c1 * xi0 - tc.c2 * xi3) * hat_m + w * (xi0 - xi3).powi(2) * check_m;
        plus - minus
    };
    let q = tc.c3 / 4.0;
    let full = tc.c3 / 2.0;
    Ok(QuasiGap {
        i1: diff(ts.rho1_hat, ts.rho1_check, ts.pi1_hat, ts.pi1_check, q).abs(),
        i2: diff(ts.rho2_hat, ts.rho2_check, ts.pi2_hat, ts.pi2_check, q).abs(),
        i1_closed: tc.c3 * xi3 * (2.0 * tc.c2 + tc.c3) / den,
        i1_with_full_c3: diff(ts.rho1_hat, ts.rho1_check, ts.pi1_hat, ts.pi1_check, full).abs(),
        i2_with_full_c3: diff(ts.rho2_hat, ts.rho2_check, ts.pi2_hat, ts.pi2_check, full).abs(),
        lam: ts.lambda,
    })
}

/// Smallest `β` on the grid from which `|λ| ≤ 1/2` holds for the rest of the grid.
pub fn lambda_threshold_scan(j0: f64, j: f64, betas: &[f64]) -> Result<Option<f64>> {
    let mut first_good: Option<f64> = None;
    for &b in betas {
        let tc = transfer_coeffs(&ModelParams::new(j0, j, b)?);
        let lam = tc.c1 / tc.c3 - 0.5;
        if lam.abs() <= 0.5 {
            first_good.get_or_insert(b);
        } else {
            first_good = None;
        }
    }
    Ok(first_good)
}

/// The 2×2 transfer of the `(1, σz)` components along a path of identity vertices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClusteringTransfer {
    /// `[[C1 ξ0, C2 s], [(C3/2) s, (C3/2) ξ0]]`.
    pub matrix_a: [[f64; 2]; 2],
    pub eigenvalues: [f64; 2],
    /// Eigenvector `(ξ0, s)` for eigenvalue one.
    pub fixed_vector: [f64; 2],
    /// Columns are the eigenvectors for `1` and `λ`.
    pub p: [[f64; 2]; 2],
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub eta1: f64,
    pub eta1_hat: f64,
    pub eta2: f64,
    pub eta2_hat: f64,
    pub xi0: f64,
    pub s: f64,
}

impl ClusteringTransfer {
    /// `A^k` as `[[η1 + η̂1 μ, η2 − η2 μ], [η̂2 − η̂2 μ, η̂1 + η1 μ]]` with `μ = λ^k`.
    pub fn power_closed(&self, k: usize) -> [[f64; 2]; 2] {
        let mu = self.eigenvalues[1].powi(k as i32);
        [
            [self.eta1 + self.eta1_hat * mu, self.eta2 - self.eta2 * mu],
            [self.eta2_hat - self.eta2_hat * mu, self.eta1_hat + self.eta1 * mu],
        ]
    }

    /// `E(f) = Tr_{S(x)} A (f ⊗ h ⊗ h) A*` written as `α1 f + α2 (fσz + σz f) + α3 σz f σz`.
    pub fn leaf_map(&self, f: &ComplexMatrix) -> ComplexMatrix {
        let z = pauli(Pauli::Z);
        let a = f.scale_re(self.alpha1);
        let b = (&(f * &z) + &(&z * f)).scale_re(self.alpha2);
        let c = (&(&z * f) * &z).scale_re(self.alpha3);
        &(&a + &b) + &c
    }
}

pub fn clustering_transfer(p: &ModelParams, branch: Branch) -> Result<ClusteringTransfer> {
    let sol = ordered_solution(p, branch)?;
    let xi0 = sol.xi0.unwrap();
    let s = branch_sign(branch) * sol.xi3.unwrap();
    let tc = transfer_coeffs(p);
    let (c1, c2, c3) = (tc.c1, tc.c2, tc.c3);
    let d1 = operator_coeffs(p).delta1;
    let lam = (c1 - c3 / 2.0) * xi0;
    let den = 3.0 - 2.0 * c1 * xi0;
    let scale = tc.scale();
    if (c1 * xi0 - 1.0).abs() <= DEGENERATE_TOL || den.abs() <= DEGENERATE_TOL || (c2 * s).abs() <= DEGENERATE_TOL * scale {
        return Err(Error::SingularParameter("clustering transfer is not diagonalizable here".into()));
    }
    Ok(ClusteringTransfer {
        matrix_a: [[c1 * xi0, c2 * s], [c3 / 2.0 * s, c3 / 2.0 * xi0]],
        eigenvalues: [1.0, lam],
        fixed_vector: [xi0, s],
        p: [[-c2 * s / (c1 * xi0 - 1.0), -2.0 * c2 * s], [1.0, 1.0]],
        alpha1: xi0 - 2.0 * d1 * d1 * (xi0 * xi0 + s * s),
        alpha2: c3 / 2.0 * xi0 * s,
        alpha3: 2.0 * d1 * d1 * (xi0 * xi0 + s * s),
        eta1: 1.0 / den,
        eta1_hat: 2.0 * (1.0 - c1 * xi0) / den,
        eta2: 2.0 * c2 * s / den,
        eta2_hat: -(c1 * xi0 - 1.0) / (c2 * s * den),
        xi0,
        s,
    })
}

/// Limit coefficients of a deep single-site observable `f`, compared with the closed displays.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClusteringLimit {
    /// `η1 v1 + η2 v1'` from the transfer.
    pub limit_identity: f64,
    /// `η̂2 v1 + η̂1 v1'`.
    pub limit_sigma: f64,
    /// `ξ0² / (6 − 4 C1 ξ0) [(4C3 − 2C1) Tr f + √Δ (4C2 + C3) Tr(σz f)·sign]`.
    pub displayed_identity: f64,
    /// `C3 · limit_identity`, the limiting expectation of `f`.
    pub limit_expectation: f64,
    /// `s C3 · limit_identity`, the value the eigenvector forces on `limit_sigma`.
    pub eigen_sigma: f64,
}

/// For real-diagonal `f`; off-diagonal parts do not reach the root.
pub fn clustering_limit(p: &ModelParams, branch: Branch, f: &ComplexMatrix) -> Result<ClusteringLimit> {
    let ct = clustering_transfer(p, branch)?;
    let tc = transfer_coeffs(p);
    let delta = delta_theta(p)?;
    let z = pauli(Pauli::Z);
    let g = ct.leaf_map(f);
    let (tg, sg) = (g.normalized_trace().re, (&z * &g).normalized_trace().re);
    // one identity vertex above the leaf
    let v1 = tc.c1 * tg * ct.xi0 + tc.c2 * sg * ct.s;
    let v1p = tc.c3 / 2.0 * (sg * ct.xi0 + tg * ct.s);
    let limit_identity = ct.eta1 * v1 + ct.eta2 * v1p;
    let limit_sigma = ct.eta2_hat * v1 + ct.eta1_hat * v1p;
    let (tf, sf) = (f.normalized_trace().re, (&z * f).normalized_trace().re);
    let sign = ct.s.signum();
    let displayed_identity = ct.xi0 * ct.xi0 / (6.0 - 4.0 * tc.c1 * ct.xi0)
        * ((4.0 * tc.c3 - 2.0 * tc.c1) * tf + sign * delta.sqrt() * (4.0 * tc.c2 + tc.c3) * sf);
    Ok(ClusteringLimit {
        limit_identity,
        limit_sigma,
        displayed_identity,
        limit_expectation: tc.c3 * limit_identity,
        eigen_sigma: ct.s * tc.c3 * limit_identity,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterRow {
    pub level: usize,
    pub correlation: C64,
    pub product: C64,
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterDecay {
    pub rows: Vec<ClusterRow>,
    /// `exp` of the least-squares slope of `ln(deviation)` against level.
    pub fitted_ratio: f64,
    pub lambda: f64,
}

/// `|φ(a τ_g f) − φ(a) φ(τ_g f)|` for `g = (1, …, 1)` at each level.
pub fn clustering_decay(ctx: &EvalContext, a: &Observable, f: &Observable, levels: &[usize]) -> ClusterDecay {
    let pa = eval_recursive(ctx, a);
    let rows: Vec<ClusterRow> = levels
        .iter()
        .map(|&l| {
            let g = TreeCoord::from_digits(&vec![1; l]);
            let tf = f.translate(&g);
            let correlation = eval_recursive(ctx, &a.mul(&tf));
            let product = pa * eval_recursive(ctx, &tf);
            ClusterRow { level: l, correlation, product, deviation: (correlation - product).norm() }
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.deviation > 0.0)
        .map(|r| (r.level as f64, r.deviation.ln()))
        .collect();
    let fitted_ratio = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxy / sxx).exp()
    } else {
        f64::NAN
    };
    let tc = transfer_coeffs(&ctx.params);
    ClusterDecay { rows, fitted_ratio, lambda: tc.c1 / tc.c3 - 0.5 }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseRow {
    pub j: f64,
    pub j0: f64,
    /// `None` on the excluded lines `J = ±J0`.
    pub delta: Option<f64>,
    pub classification: Option<Classification>,
    pub threshold: f64,
    pub agrees: bool,
}

/// `lo + (hi − lo) i/(n−1)` written so that a symmetric range yields an exactly symmetric grid.
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let d = (n - 1) as f64;
            (0..n).map(|i| (lo * (n - 1 - i) as f64 + hi * i as f64) / d).collect()
        }
    }
}

/// `Δ` and its classification on a `resolution × resolution` grid, `J0` outer and `J` inner.
pub fn phase_diagram_scan(j_range: (f64, f64), j0_range: (f64, f64), beta: f64, resolution: usize) -> Result<Vec<PhaseRow>> {
    ModelParams::new(0.0, 0.0, beta)?;
    let js = grid(j_range.0, j_range.1, resolution);
    let j0s = grid(j0_range.0, j0_range.1, resolution);
    let rows: Vec<Vec<PhaseRow>> = j0s
        .par_iter()
        .map(|&j0| {
            js.iter()
                .map(|&j| {
                    let p = ModelParams::new(j0, j, beta).expect("finite grid");
                    let threshold = critical_j0(j, beta);
                    match phase_region(&p) {
                        Ok(r) => PhaseRow {
                            j,
                            j0,
                            delta: Some(r.delta),
                            classification: Some(r.classification),
                            threshold,
                            agrees: r.agrees(),
                        },
                        Err(_) => PhaseRow { j, j0, delta: None, classification: None, threshold, agrees: true },
                    }
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}
