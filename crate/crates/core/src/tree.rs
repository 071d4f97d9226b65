//! Coordinates on the semi-infinite Cayley tree.
//!
//! A vertex is the digit string `(i1, ..., in)` with every digit in `1..=k`;
//! the root is the empty string. Concatenation turns the vertex set into a
//! monoid with the root as unit, and translations are left multiplications.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A vertex of the rooted tree, stored as its 1-based digit path.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TreeCoord(Vec<u8>);

impl TreeCoord {
    pub fn root() -> Self {
        TreeCoord(Vec::new())
    }

    /// Builds a coordinate, checking every digit lies in `1..=k`.
    pub fn new(digits: Vec<u8>, k: usize) -> crate::Result<Self> {
        if let Some(&d) = digits.iter().find(|&&d| d == 0 || d as usize > k) {
            return Err(crate::Error::domain(format!(
                "digit {d} outside 1..={k} in {digits:?}"
            )));
        }
        Ok(TreeCoord(digits))
    }

    /// Builds a coordinate without an order bound; only zero digits are rejected.
    pub fn from_digits(digits: &[u8]) -> Self {
        assert!(digits.iter().all(|&d| d >= 1), "digits are 1-based");
        TreeCoord(digits.to_vec())
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn level(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// The parent vertex, or `None` at the root.
    pub fn parent(&self) -> Option<TreeCoord> {
        if self.0.is_empty() {
            None
        } else {
            Some(TreeCoord(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// The `i`-th direct successor, `i` 1-based.
    pub fn child(&self, i: u8) -> TreeCoord {
        debug_assert!(i >= 1);
        let mut d = self.0.clone();
        d.push(i);
        TreeCoord(d)
    }

    /// True when `self` lies in the subtree rooted at `ancestor` (inclusive).
    pub fn descends_from(&self, ancestor: &TreeCoord) -> bool {
        self.0.starts_with(&ancestor.0)
    }

    /// Largest digit used; handy to validate against a tree order.
    pub fn max_digit(&self) -> u8 {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

impl fmt::Debug for TreeCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for TreeCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "(0)");
        }
        write!(f, "(")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

/// The `k^n` vertices of level `n` in lexicographic order.
pub fn level_vertices(n: usize, k: usize) -> Vec<TreeCoord> {
    assert!(k >= 1 && k <= u8::MAX as usize, "tree order must be in 1..=255");
    let mut out = vec![TreeCoord::root()];
    for _ in 0..n {
        out = out
            .iter()
            .flat_map(|x| successors(x, k))
            .collect();
    }
    out
}

/// `((x,1), ..., (x,k))`.
pub fn successors(x: &TreeCoord, k: usize) -> Vec<TreeCoord> {
    (1..=k as u8).map(|i| x.child(i)).collect()
}

/// Digit concatenation `x ∘ y`.
pub fn concat(x: &TreeCoord, y: &TreeCoord) -> TreeCoord {
    let mut d = Vec::with_capacity(x.level() + y.level());
    d.extend_from_slice(&x.0);
    d.extend_from_slice(&y.0);
    TreeCoord(d)
}

/// The translation `τ_g(x) = g ∘ x`.
pub fn translate(g: &TreeCoord, x: &TreeCoord) -> TreeCoord {
    concat(g, x)
}

/// All vertices of the ball `Λ_n`: levels ascending, lexicographic within a level.
///
/// This is the canonical tensor-factor order used by every dense construction.
pub fn ball_vertices(n: usize, k: usize) -> Vec<TreeCoord> {
    (0..=n).flat_map(|m| level_vertices(m, k)).collect()
}

/// `|Λ_n| = Σ_{m ≤ n} k^m`.
pub fn ball_size(n: usize, k: usize) -> usize {
    (0..=n).map(|m| k.pow(m as u32)).sum()
}

/// Canonical order key: shallower first, then lexicographic.
pub fn canonical_cmp(a: &TreeCoord, b: &TreeCoord) -> std::cmp::Ordering {
    a.level().cmp(&b.level()).then_with(|| a.cmp(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(d: &[u8]) -> TreeCoord {
        TreeCoord::from_digits(d)
    }

    #[test]
    fn level_zero_is_root() {
        assert_eq!(level_vertices(0, 2), vec![TreeCoord::root()]);
    }

    #[test]
    fn level_two_binary() {
        assert_eq!(
            level_vertices(2, 2),
            vec![c(&[1, 1]), c(&[1, 2]), c(&[2, 1]), c(&[2, 2])]
        );
    }

    #[test]
    fn level_three_fourth_entry() {
        // Brute-force oracle: enumerate all binary strings over {1,2}, sort.
        let mut all: Vec<Vec<u8>> = (0..8u8)
            .map(|m| (0..3).rev().map(|b| ((m >> b) & 1) + 1).collect())
            .collect();
        all.sort();
        let lv = level_vertices(3, 2);
        assert_eq!(lv.len(), 8);
        assert_eq!(lv[3], c(&[1, 2, 2]));
        assert_eq!(lv.iter().map(|x| x.digits().to_vec()).collect::<Vec<_>>(), all);
    }

    #[test]
    fn successors_examples() {
        assert_eq!(successors(&TreeCoord::root(), 2), vec![c(&[1]), c(&[2])]);
        assert_eq!(successors(&c(&[1, 2]), 2), vec![c(&[1, 2, 1]), c(&[1, 2, 2])]);
        assert_eq!(
            successors(&c(&[2]), 3),
            vec![c(&[2, 1]), c(&[2, 2]), c(&[2, 3])]
        );
    }

    #[test]
    fn concat_and_translate_examples() {
        assert_eq!(concat(&c(&[1]), &c(&[2, 1])), c(&[1, 2, 1]));
        assert_eq!(concat(&TreeCoord::root(), &c(&[2, 2])), c(&[2, 2]));
        assert_eq!(concat(&c(&[1, 2]), &c(&[1])), c(&[1, 2, 1]));
        assert_eq!(translate(&TreeCoord::root(), &c(&[1, 1])), c(&[1, 1]));
        assert_eq!(translate(&c(&[2]), &c(&[1])), c(&[2, 1]));
        assert_eq!(translate(&c(&[1, 1]), &c(&[2, 2])), c(&[1, 1, 2, 2]));
    }

    #[test]
    fn digit_validation() {
        assert!(TreeCoord::new(vec![1, 3], 2).is_err());
        assert!(TreeCoord::new(vec![0], 2).is_err());
        assert!(TreeCoord::new(vec![1, 2], 2).is_ok());
    }

    #[test]
    fn ball_sizes() {
        for n in 0..6 {
            assert_eq!(ball_vertices(n, 2).len(), (1 << (n + 1)) - 1);
            assert_eq!(ball_size(n, 2), (1 << (n + 1)) - 1);
        }
        assert_eq!(ball_size(2, 3), 13);
    }

    #[test]
    fn json_encoding() {
        assert_eq!(serde_json::to_string(&c(&[1, 2, 1])).unwrap(), "[1,2,1]");
        assert_eq!(serde_json::to_string(&TreeCoord::root()).unwrap(), "[]");
        let back: TreeCoord = serde_json::from_str("[2,1]").unwrap();
        assert_eq!(back, c(&[2, 1]));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn coord(k: u8) -> impl Strategy<Value = TreeCoord> {
            prop::collection::vec(1..=k, 0..6).prop_map(TreeCoord)
        }

        proptest! {
            #[test]
            fn concat_is_associative(x in coord(3), y in coord(3), z in coord(3)) {
                prop_assert_eq!(concat(&concat(&x, &y), &z), concat(&x, &concat(&y, &z)));
            }

            #[test]
            fn root_is_two_sided_unit(x in coord(3)) {
                prop_assert_eq!(concat(&x, &TreeCoord::root()), x.clone());
                prop_assert_eq!(concat(&TreeCoord::root(), &x), x);
            }

            #[test]
            fn successors_are_concatenations(x in coord(3), k in 1usize..4) {
                for (i, s) in successors(&x, k).iter().enumerate() {
                    prop_assert_eq!(s, &concat(&x, &TreeCoord(vec![i as u8 + 1])));
                    prop_assert_eq!(s.level(), x.level() + 1);
                }
            }

            #[test]
            fn translate_adds_levels(g in coord(2), x in coord(2)) {
                prop_assert_eq!(translate(&g, &x).level(), g.level() + x.level());
            }

            #[test]
            fn levels_strictly_increasing(n in 0usize..6, k in 1usize..4) {
                let lv = level_vertices(n, k);
                prop_assert_eq!(lv.len(), k.pow(n as u32));
                prop_assert!(lv.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
