//! Evaluation of the chain state on local observables.
//!
//! Two independent routes are provided. The dense route builds the weight
//! `W_{n+1]} = K*K` with `K = ω0^{1/2} K_{[0,1]} ⋯ K_{[n,n+1]} h^{1/2}` and
//! takes `Tr(W (a ⊗ 1))`. The recursive route contracts vertex by vertex from
//! the deepest support level upwards and never leaves 2×2 matrices.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{fixed_point_residual, BoundarySolution, Branch, RESIDUAL_TOL};
use crate::linalg::{c, kron_all, ComplexMatrix, SiteOperator, C64};
use crate::model::{pauli, vertex_map, vertex_operator, ModelParams, Pauli};
use crate::tree::{ball_size, ball_vertices, concat, level_vertices, TreeCoord};
use crate::{Error, Result};

/// Largest number of sites a dense weight matrix may span (`2^7 = 128` rows).
pub const MAX_DENSE_SITES: usize = 7;
/// Terms above this count are contracted in parallel.
const PAR_TERMS: usize = 16;

/// One site-factorized summand `coeff · ⊗_x a_x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coeff: C64,
    pub factors: BTreeMap<TreeCoord, ComplexMatrix>,
}

impl Term {
    /// Builds a term; a repeated site is rejected.
    pub fn new(coeff: C64, factors: Vec<(TreeCoord, ComplexMatrix)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (site, m) in factors {
            if m.dim() != 2 {
                return Err(Error::domain(format!("factor at {site} is not 2x2")));
            }
            if map.insert(site.clone(), m).is_some() {
                return Err(Error::domain(format!("site {site} repeated in one term")));
            }
        }
        Ok(Term { coeff, factors: map })
    }

    pub fn max_level(&self) -> usize {
        self.factors.keys().map(TreeCoord::level).max().unwrap_or(0)
    }

    fn factor(&self, x: &TreeCoord) -> Option<&ComplexMatrix> {
        self.factors.get(x)
    }
}

/// A finite sum of site-factorized terms; absent sites act as the identity.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Observable {
    pub terms: Vec<Term>,
}

impl Observable {
    pub fn identity() -> Self {
        Observable { terms: vec![Term { coeff: c(1.0, 0.0), factors: BTreeMap::new() }] }
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        Observable { terms }
    }

    pub fn single(site: TreeCoord, m: ComplexMatrix) -> Result<Self> {
        Ok(Observable { terms: vec![Term::new(c(1.0, 0.0), vec![(site, m)])?] })
    }

    pub fn single_pauli(site: TreeCoord, p: Pauli) -> Self {
        Observable::single(site, pauli(p)).expect("2x2 factor")
    }

    pub fn product(factors: Vec<(TreeCoord, ComplexMatrix)>) -> Result<Self> {
        Ok(Observable { terms: vec![Term::new(c(1.0, 0.0), factors)?] })
    }

    /// Union of the sites carrying a factor.
    pub fn support(&self) -> BTreeSet<TreeCoord> {
        self.terms.iter().flat_map(|t| t.factors.keys().cloned()).collect()
    }

    pub fn max_level(&self) -> usize {
        self.terms.iter().map(Term::max_level).max().unwrap_or(0)
    }

    pub fn scale(&self, s: C64) -> Self {
        Observable {
            terms: self.terms.iter().map(|t| Term { coeff: t.coeff * s, ..t.clone() }).collect(),
        }
    }

    pub fn add(&self, other: &Observable) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Observable { terms }
    }

    /// Product `self · other`; on shared sites the factors multiply in that order.
    pub fn mul(&self, other: &Observable) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut factors = a.factors.clone();
                for (site, m) in &b.factors {
                    let merged = match factors.get(site) {
                        Some(prev) => prev * m,
                        None => m.clone(),
                    };
                    factors.insert(site.clone(), merged);
                }
                terms.push(Term { coeff: a.coeff * b.coeff, factors });
            }
        }
        Observable { terms }
    }

    pub fn adjoint(&self) -> Self {
        Observable {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff.conj(),
                    factors: t.factors.iter().map(|(s, m)| (s.clone(), m.adjoint())).collect(),
                })
                .collect(),
        }
    }

    /// `τ_g`: every factor at `x` moves to `g ∘ x`.
    pub fn translate(&self, g: &TreeCoord) -> Self {
        Observable {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff,
                    factors: t.factors.iter().map(|(s, m)| (concat(g, s), m.clone())).collect(),
                })
                .collect(),
        }
    }

    /// Dense matrix on the ordered volume `sites`, which must contain the support.
    pub fn dense_on(&self, sites: &[TreeCoord]) -> Result<ComplexMatrix> {
        let dim = 1usize << sites.len();
        let id = pauli(Pauli::I);
        let mut acc = ComplexMatrix::zeros(dim);
        for t in &self.terms {
            for s in t.factors.keys() {
                if !sites.contains(s) {
                    return Err(Error::domain(format!("site {s} lies outside the volume")));
                }
            }
            let m = kron_all(sites.iter().map(|s| t.factor(s).unwrap_or(&id)));
            acc = &acc + &m.scale(t.coeff);
        }
        Ok(acc)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ObservableJson = serde_json::from_str(text)?;
        raw.try_into()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ObservableJson::from(self))?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservableJson {
    terms: Vec<TermJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermJson {
    coeff: [f64; 2],
    factors: Vec<FactorJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorJson {
    site: TreeCoord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pauli: Option<Pauli>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<Vec<[f64; 2]>>>,
}

impl TryFrom<ObservableJson> for Observable {
    type Error = Error;
    fn try_from(raw: ObservableJson) -> Result<Self> {
        let mut terms = Vec::with_capacity(raw.terms.len());
        for t in raw.terms {
            let mut factors = Vec::with_capacity(t.factors.len());
            for f in t.factors {
                if f.site.max_digit() > 2 {
                    return Err(Error::Format(format!("site {} has a digit above 2", f.site)));
                }
                let m = match (f.pauli, f.matrix) {
                    (Some(p), None) => pauli(p),
                    (None, Some(rows)) => {
                        if rows.len() != 2 || rows.iter().any(|r| r.len() != 2) {
                            return Err(Error::Format(format!("matrix at {} must be 2x2", f.site)));
                        }
                        ComplexMatrix::from_fn(2, |i, j| c(rows[i][j][0], rows[i][j][1]))
                    }
                    _ => {
                        return Err(Error::Format(format!(
                            "factor at {} needs exactly one of \"pauli\" or \"matrix\"",
                            f.site
                        )))
                    }
                };
                factors.push((f.site, m));
            }
            let term = Term::new(c(t.coeff[0], t.coeff[1]), factors)
                .map_err(|e| Error::Format(e.to_string()))?;
            terms.push(term);
        }
        Ok(Observable { terms })
    }
}

impl From<&Observable> for ObservableJson {
    fn from(o: &Observable) -> Self {
        ObservableJson {
            terms: o
                .terms
                .iter()
                .map(|t| TermJson {
                    coeff: [t.coeff.re, t.coeff.im],
                    factors: t
                        .factors
                        .iter()
                        .map(|(s, m)| FactorJson {
                            site: s.clone(),
                            pauli: None,
                            matrix: Some(
                                (0..2)
                                    .map(|i| (0..2).map(|j| [m.get(i, j).re, m.get(i, j).im]).collect())
                                    .collect(),
                            ),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Parameters plus boundary data, with the vertex operator precomputed.
#[derive(Clone, Debug)]
pub struct EvalContext {
    pub params: ModelParams,
    pub branch: Option<Branch>,
    vertex: ComplexMatrix,
    h: ComplexMatrix,
    omega0: ComplexMatrix,
    fixed_point: bool,
}

impl EvalContext {
    /// Context for a solved boundary; the fixed-point residual is re-checked.
    pub fn new(params: ModelParams, sol: &BoundarySolution) -> Result<Self> {
        let h = sol.h_matrix();
        let residual = fixed_point_residual(&params, &h)?;
        if !(residual < RESIDUAL_TOL) {
            return Err(Error::ModelInconsistency {
                what: "boundary does not solve the fixed-point equation for these parameters".into(),
                residual,
            });
        }
        let mut ctx = EvalContext::unchecked(params, sol.omega0_matrix(), h)?;
        ctx.branch = Some(sol.branch);
        ctx.fixed_point = true;
        Ok(ctx)
    }

    /// Context with arbitrary positive boundary data and no fixed-point check.
    pub fn unchecked(params: ModelParams, omega0: ComplexMatrix, h: ComplexMatrix) -> Result<Self> {
        if omega0.dim() != 2 || h.dim() != 2 {
            return Err(Error::domain("boundary matrices must be 2x2"));
        }
        Ok(EvalContext { vertex: vertex_operator(&params)?, params, branch: None, h, omega0, fixed_point: false })
    }

    pub fn h(&self) -> &ComplexMatrix {
        &self.h
    }

    pub fn omega0(&self) -> &ComplexMatrix {
        &self.omega0
    }

    pub fn vertex(&self) -> &ComplexMatrix {
        &self.vertex
    }
}

/// `Tr_{(u,1),(u,2)} A (a ⊗ b1 ⊗ b2) A*`.
pub fn contract_vertex(ctx: &EvalContext, a: &ComplexMatrix, b1: &ComplexMatrix, b2: &ComplexMatrix) -> ComplexMatrix {
    vertex_map(&ctx.vertex, a, b1, b2)
}

fn check_support(a: &Observable, n: usize) -> Result<()> {
    for s in a.support() {
        if s.level() > n || s.max_digit() > 2 {
            return Err(Error::domain(format!("site {s} lies outside the ball of radius {n}")));
        }
    }
    Ok(())
}

fn guard(sites: usize) -> Result<()> {
    if sites > MAX_DENSE_SITES {
        return Err(Error::Resource(format!(
            "dense volume of {sites} sites exceeds the {MAX_DENSE_SITES}-site guard"
        )));
    }
    Ok(())
}

/// `Π_{m<depth} Π_{x ∈ W_m} A_x` as a dense operator on `Λ_depth`.
fn chain_product(ctx: &EvalContext, depth: usize, sites: &[TreeCoord]) -> Result<ComplexMatrix> {
    let mut acc = ComplexMatrix::identity(1 << sites.len());
    for m in 0..depth {
        for x in level_vertices(m, 2) {
            let op = SiteOperator::new(vec![x.clone(), x.child(1), x.child(2)], ctx.vertex.clone())?;
            acc = &acc * &op.embed(sites)?;
        }
    }
    Ok(acc)
}

/// The dense weight `W_{n+1]}` on `Λ_{n+1}` (only `n ≤ 1` fits the guard).
pub fn weight_matrix(ctx: &EvalContext, n: usize) -> Result<SiteOperator> {
    ctx.params.require_binary()?;
    guard(ball_size(n + 1, 2))?;
    let sites = ball_vertices(n + 1, 2);
    let root = TreeCoord::root();
    let w0 = SiteOperator::new(vec![root], ctx.omega0.psd_sqrt()?)?.embed(&sites)?;
    let hs = ctx.h.psd_sqrt()?;
    let leaves: Vec<(TreeCoord, ComplexMatrix)> =
        level_vertices(n + 1, 2).into_iter().map(|x| (x, hs.clone())).collect();
    let hh = SiteOperator::product(&leaves)?.embed(&sites)?;
    let k = &(&w0 * &chain_product(ctx, n + 1, &sites)?) * &hh;
    SiteOperator::new(sites, &k.adjoint() * &k)
}

/// `φ^{(n)}(a) = Tr(W_{n+1]} (a ⊗ 1))` from the dense weight.
pub fn eval_bruteforce(ctx: &EvalContext, a: &Observable, n: usize) -> Result<C64> {
    check_support(a, n)?;
    let w = weight_matrix(ctx, n)?;
    let dense = a.dense_on(w.sites())?;
    Ok((w.matrix() * &dense).normalized_trace())
}

/// `φ^{(n)}(a)` with the outermost layer traced analytically:
/// `Tr(ω0 G_n Ω_n(a) G_n*)`, where `G_n = K_{[0,1]} ⋯ K_{[n−1,n]}` is dense on
/// `Λ_n` and `Ω_n` applies `b ↦ Tr_{S(x)} A (b ⊗ h ⊗ h) A*` at each `x ∈ W_n`.
/// Dense objects live on `Λ_n`, so `n ≤ 2` fits the guard.
pub fn eval_bruteforce_reduced(ctx: &EvalContext, a: &Observable, n: usize) -> Result<C64> {
    ctx.params.require_binary()?;
    check_support(a, n)?;
    guard(ball_size(n, 2))?;
    let sites = ball_vertices(n, 2);
    let mut op = SiteOperator::new(sites.clone(), a.dense_on(&sites)?)?;
    for x in level_vertices(n, 2) {
        op = op.map_site(&x, |b| vertex_map(&ctx.vertex, b, &ctx.h, &ctx.h))?;
    }
    let g = chain_product(ctx, n, &sites)?;
    let w0 = SiteOperator::new(vec![TreeCoord::root()], ctx.omega0.clone())?.embed(&sites)?;
    let inner = &(&g * op.matrix()) * &g.adjoint();
    Ok((&w0 * &inner).normalized_trace())
}

/// `φ^{(n)}` by whichever dense route fits: the full weight for `n ≤ 1`, the reduced form for `n = 2`.
pub fn eval_finite(ctx: &EvalContext, a: &Observable, n: usize) -> Result<C64> {
    if ball_size(n + 1, 2) <= MAX_DENSE_SITES {
        eval_bruteforce(ctx, a, n)
    } else {
        eval_bruteforce_reduced(ctx, a, n)
    }
}

fn eval_term(ctx: &EvalContext, t: &Term) -> C64 {
    let m = t.max_level();
    // vertices whose subtree meets the support
    let mut active: BTreeSet<TreeCoord> = BTreeSet::new();
    for s in t.factors.keys() {
        let mut x = Some(s.clone());
        while let Some(v) = x {
            if !active.insert(v.clone()) {
                break;
            }
            x = v.parent();
        }
    }
    active.insert(TreeCoord::root());

    // empty[l] is the contraction of a factor-free subtree rooted at level l.
    // For a solved boundary this is h at every level; iterating Φ instead
    // would amplify rounding, since the ordered fixed points are repelling.
    let id = pauli(Pauli::I);
    let mut empty = vec![ctx.h.clone(); m + 2];
    if !ctx.fixed_point {
        for l in (0..=m).rev() {
            empty[l] = contract_vertex(ctx, &id, &empty[l + 1], &empty[l + 1]);
        }
    }

    let mut memo: HashMap<TreeCoord, ComplexMatrix> = HashMap::new();
    let mut by_level: Vec<&TreeCoord> = active.iter().collect();
    by_level.sort_by(|a, b| b.level().cmp(&a.level()).then(a.cmp(b)));
    for x in by_level {
        let child = |i: u8| {
            let y = x.child(i);
            memo.get(&y).cloned().unwrap_or_else(|| empty[x.level() + 1].clone())
        };
        let (b1, b2) = (child(1), child(2));
        let a = t.factor(x).unwrap_or(&id);
        let v = contract_vertex(ctx, a, &b1, &b2);
        memo.insert(x.clone(), v);
    }
    let root = &memo[&TreeCoord::root()];
    t.coeff * (&ctx.omega0 * root).normalized_trace()
}

/// The limit state by level-wise contraction; any finite support.
pub fn eval_recursive(ctx: &EvalContext, a: &Observable) -> C64 {
    let vals: Vec<C64> = if a.terms.len() > PAR_TERMS {
        a.terms.par_iter().map(|t| eval_term(ctx, t)).collect()
    } else {
        a.terms.iter().map(|t| eval_term(ctx, t)).collect()
    };
    vals.into_iter().sum()
}

/// A product observable with independent entries uniform in `[-1, 1] + i[-1, 1]` at each site.
pub fn random_product_observable<R: Rng + ?Sized>(rng: &mut R, sites: &[TreeCoord]) -> Observable {
    let factors = sites
        .iter()
        .map(|s| {
            let m = ComplexMatrix::from_fn(2, |_, _| {
                c(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
            });
            (s.clone(), m)
        })
        .collect();
    Observable::product(factors).expect("distinct sites")
}

/// `max |φ^{(n+1)}(a) − φ^{(n)}(a)|` over random product observables on `Λ_n`.
pub fn compatibility_residual(ctx: &EvalContext, n: usize, trials: usize, seed: u64) -> Result<f64> {
    use rand::SeedableRng;
    if ball_size(n + 1, 2) > MAX_DENSE_SITES {
        return Err(Error::Resource(format!(
            "compatibility at depth {n} needs a dense volume beyond the guard"
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let sites = ball_vertices(n, 2);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let a = random_product_observable(&mut rng, &sites);
        let lo = eval_finite(ctx, &a, n)?;
        let hi = eval_finite(ctx, &a, n + 1)?;
        worst = worst.max((hi - lo).norm());
    }
    Ok(worst)
}

/// `φ(a · τ_g(f))`.
pub fn correlation(ctx: &EvalContext, a: &Observable, f: &Observable, g: &TreeCoord) -> C64 {
    eval_recursive(ctx, &a.mul(&f.translate(g)))
}

/// Values of a translated single-site observable across several translations.
#[derive(Clone, Debug, Serialize)]
pub struct TranslationReport {
    pub values: Vec<(TreeCoord, Complex64)>,
    /// Largest pairwise distance among the values.
    pub spread: f64,
    /// Largest pairwise distance among translations to the same level.
    pub same_level_spread: f64,
}

pub fn translation_report(ctx: &EvalContext, f: &Observable, shifts: &[TreeCoord]) -> TranslationReport {
    let values: Vec<(TreeCoord, C64)> = shifts
        .iter()
        .map(|g| (g.clone(), eval_recursive(ctx, &f.translate(g))))
        .collect();
    let mut spread = 0.0f64;
    let mut same = 0.0f64;
    for (i, (gi, vi)) in values.iter().enumerate() {
        for (gj, vj) in &values[i + 1..] {
            let d = (vi - vj).norm();
            spread = spread.max(d);
            if gi.level() == gj.level() {
                same = same.max(d);
            }
        }
    }
    TranslationReport { values, spread, same_level_spread: same }
}
