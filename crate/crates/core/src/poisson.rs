//! Structure-constant Poisson brackets: gl(n) generators (Σ, Σ̂, p̂) and the
//! so(n) ⊕ so(n) variables of the two-polar reduction (ρ̂, τ̂ and M, N).
//!
//! Brackets are stored as sparse integer tables: an entry (i, j) holds the
//! linear combination of generators equal to {Xᵢ, Xⱼ}.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// Σ, Σ̂ and p̂ together.
    SigmaSigma,
    /// Σ̂ and p̂ only.
    SigmaHat,
    SoNRho,
    SoNTau,
    MN,
}

pub type Combination = Vec<(usize, i64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct BracketTable {
    pub family: Family,
    pub n: usize,
    pub labels: Vec<String>,
    pub entries: BTreeMap<(usize, usize), Combination>,
}

fn normalize(mut c: Combination) -> Combination {
    c.sort_by_key(|&(k, _)| k);
    let mut out: Combination = Vec::with_capacity(c.len());
    for (k, v) in c {
        match out.last_mut() {
            Some((lk, lv)) if *lk == k => *lv += v,
            _ => out.push((k, v)),
        }
    }
    out.retain(|&(_, v)| v != 0);
    out
}

impl BracketTable {
    fn new(family: Family, n: usize, labels: Vec<String>) -> Self {
        Self { family, n, labels, entries: BTreeMap::new() }
    }

    fn insert(&mut self, i: usize, j: usize, c: Combination) {
        let c = normalize(c);
        if !c.is_empty() {
            self.entries.insert((i, j), c);
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn bracket(&self, i: usize, j: usize) -> Combination {
        self.entries.get(&(i, j)).cloned().unwrap_or_default()
    }

    /// Bracket of two linear combinations of generators.
    pub fn bracket_combinations(&self, x: &Combination, y: &Combination) -> Combination {
        let mut out = Vec::new();
        for &(i, a) in x {
            for &(j, b) in y {
                if let Some(c) = self.entries.get(&(i, j)) {
                    out.extend(c.iter().map(|&(k, v)| (k, a * b * v)));
                }
            }
        }
        normalize(out)
    }

    /// Value of {Xᵢ, Xⱼ} at the given generator values.
    pub fn evaluate(&self, i: usize, j: usize, values: &[f64]) -> f64 {
        self.entries
            .get(&(i, j))
            .map(|c| c.iter().map(|&(k, v)| v as f64 * values[k]).sum())
            .unwrap_or(0.0)
    }

    /// dXᵢ/dt = Σⱼ {Xᵢ, Xⱼ} ∂H/∂Xⱼ, the chain rule for a function H of the
    /// generators.
    pub fn hamiltonian_flow(&self, values: &[f64], grad: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (&(i, j), c) in &self.entries {
            if grad[j] != 0.0 {
                let val: f64 = c.iter().map(|&(k, v)| v as f64 * values[k]).sum();
                out[i] += val * grad[j];
            }
        }
        out
    }
}

fn delta(a: usize, b: usize) -> i64 {
    (a == b) as i64
}

/// Σ, Σ̂ and p̂ brackets. Generator order: Σⁱ_j (row-major), Σ̂ᴬ_B
/// (row-major), p̂_A.
pub fn gl_bracket_table(n: usize) -> BracketTable {
    let n2 = n * n;
    let mut labels = Vec::with_capacity(2 * n2 + n);
    for i in 0..n {
        for j in 0..n {
            labels.push(format!("Sigma[{i}][{j}]"));
        }
    }
    for i in 0..n {
        for j in 0..n {
            labels.push(format!("SigmaHat[{i}][{j}]"));
        }
    }
    for i in 0..n {
        labels.push(format!("pHat[{i}]"));
    }
    let mut t = BracketTable::new(Family::SigmaSigma, n, labels);
    let s = |i: usize, j: usize| i * n + j;
    let sh = |i: usize, j: usize| n2 + i * n + j;
    let ph = |a: usize| 2 * n2 + a;
    for (i, j, k, l) in quad(n) {
        t.insert(s(i, j), s(k, l), vec![(s(k, j), delta(i, l)), (s(i, l), -delta(k, j))]);
        t.insert(sh(i, j), sh(k, l), vec![(sh(i, l), delta(k, j)), (sh(k, j), -delta(i, l))]);
    }
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                // {Σ̂ᴬ_B, p̂_C} = −δᴬ_C p̂_B, the sign forced by Jacobi with the Σ̂ brackets above.
                t.insert(sh(a, b), ph(c), vec![(ph(b), -delta(a, c))]);
                t.insert(ph(c), sh(a, b), vec![(ph(b), delta(a, c))]);
            }
        }
    }
    t
}

/// Σ̂ and p̂ brackets alone.
pub fn sigma_hat_table(n: usize) -> BracketTable {
    let full = gl_bracket_table(n);
    let n2 = n * n;
    let mut t = BracketTable::new(Family::SigmaHat, n, full.labels[n2..].to_vec());
    for (&(i, j), c) in &full.entries {
        if i >= n2 && j >= n2 {
            t.insert(i - n2, j - n2, c.iter().map(|&(k, v)| (k - n2, v)).collect());
        }
    }
    t
}

fn quad(n: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..n).flat_map(move |i| (0..n).flat_map(move |j| (0..n).flat_map(move |k| (0..n).map(move |l| (i, j, k, l)))))
}

/// Pairs a < b indexing the independent components of an antisymmetric matrix.
pub fn skew_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            v.push((a, b));
        }
    }
    v
}

pub fn skew_index(n: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b);
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

/// X_xy in terms of the independent generators X_ab (a < b) with offset.
fn skew_component(n: usize, offset: usize, x: usize, y: usize, coef: i64) -> Option<(usize, i64)> {
    use std::cmp::Ordering::*;
    match x.cmp(&y) {
        Less => Some((offset + skew_index(n, x, y), coef)),
        Greater => Some((offset + skew_index(n, y, x), -coef)),
        Equal => None,
    }
}

/// so(n) bracket {X_ab, X_cd} = X_ad δ_cb − X_cb δ_ad + X_db δ_ac − X_ac δ_db.
fn so_n_entry(n: usize, offset: usize, (a, b): (usize, usize), (c, d): (usize, usize)) -> Combination {
    [
        skew_component(n, offset, a, d, delta(c, b)),
        skew_component(n, offset, c, b, -delta(a, d)),
        skew_component(n, offset, d, b, delta(a, c)),
        skew_component(n, offset, a, c, -delta(d, b)),
    ]
    .into_iter()
    .flatten()
    .filter(|&(_, v)| v != 0)
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoNVariable {
    Rho,
    Tau,
}

pub fn so_n_table(n: usize, which: SoNVariable) -> BracketTable {
    let (family, name) = match which {
        SoNVariable::Rho => (Family::SoNRho, "rho"),
        SoNVariable::Tau => (Family::SoNTau, "tau"),
    };
    let pairs = skew_pairs(n);
    let labels = pairs.iter().map(|(a, b)| format!("{name}[{a}][{b}]")).collect();
    let mut t = BracketTable::new(family, n, labels);
    for (i, &x) in pairs.iter().enumerate() {
        for (j, &y) in pairs.iter().enumerate() {
            t.insert(i, j, so_n_entry(n, 0, x, y));
        }
    }
    t
}

/// Brackets of M = −ρ̂ − τ̂ and N = ρ̂ − τ̂, derived by substitution from two
/// commuting copies of the so(n) table. Generator order: M_ab (a < b), then
/// N_ab.
pub fn mn_bracket_table(n: usize) -> BracketTable {
    let pairs = skew_pairs(n);
    let np = pairs.len();
    // Combined (ρ̂, τ̂) table on 2·np generators.
    let mut rt = BracketTable::new(Family::SoNRho, n, vec![String::new(); 2 * np]);
    for (i, &x) in pairs.iter().enumerate() {
        for (j, &y) in pairs.iter().enumerate() {
            rt.insert(i, j, so_n_entry(n, 0, x, y));
            rt.insert(np + i, np + j, so_n_entry(n, np, x, y));
        }
    }
    let m_of = |k: usize| vec![(k, -1), (np + k, -1)];
    let n_of = |k: usize| vec![(k, 1), (np + k, -1)];
    let gen = |g: usize| if g < np { m_of(g) } else { n_of(g - np) };
    let mut labels: Vec<String> = pairs.iter().map(|(a, b)| format!("M[{a}][{b}]")).collect();
    labels.extend(pairs.iter().map(|(a, b)| format!("N[{a}][{b}]")));
    let mut t = BracketTable::new(Family::MN, n, labels);
    for i in 0..2 * np {
        for j in 0..2 * np {
            let rho_tau = rt.bracket_combinations(&gen(i), &gen(j));
            // 2ρ̂ = N − M, 2τ̂ = −N − M.
            let mut doubled = Vec::new();
            for (k, v) in rho_tau {
                if k < np {
                    doubled.push((np + k, v));
                    doubled.push((k, -v));
                } else {
                    doubled.push((k, -v));
                    doubled.push((k - np, -v));
                }
            }
            let doubled = normalize(doubled);
            assert!(doubled.iter().all(|&(_, v)| v % 2 == 0), "M,N brackets must have integer coefficients");
            t.insert(i, j, doubled.into_iter().map(|(k, v)| (k, v / 2)).collect());
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlgebraReport {
    pub antisymmetry_failures: Vec<(usize, usize)>,
    pub jacobi_failures: Vec<(usize, usize, usize)>,
    pub closure_failures: Vec<(usize, usize)>,
}

impl AlgebraReport {
    pub fn passed(&self) -> bool {
        self.antisymmetry_failures.is_empty() && self.jacobi_failures.is_empty() && self.closure_failures.is_empty()
    }
}

/// Exact integer checks of antisymmetry, closure and the Jacobi identity
/// over every generator triple.
pub fn verify_algebra(table: &BracketTable) -> AlgebraReport {
    let g = table.len();
    let mut antisymmetry_failures = Vec::new();
    let mut closure_failures = Vec::new();
    for i in 0..g {
        for j in 0..g {
            let a = table.bracket(i, j);
            let b: Combination = table.bracket(j, i).into_iter().map(|(k, v)| (k, -v)).collect();
            if a != b {
                antisymmetry_failures.push((i, j));
            }
            if a.iter().any(|&(k, _)| k >= g) {
                closure_failures.push((i, j));
            }
        }
    }
    let mut jacobi_failures = Vec::new();
    for i in 0..g {
        for j in i + 1..g {
            let ij = table.bracket(i, j);
            for k in j + 1..g {
                let mut sum = table.bracket_combinations(&vec![(i, 1)], &table.bracket(j, k));
                sum.extend(table.bracket_combinations(&vec![(j, 1)], &table.bracket(k, i)));
                sum.extend(table.bracket_combinations(&vec![(k, 1)], &ij));
                if !normalize(sum).is_empty() {
                    jacobi_failures.push((i, j, k));
                }
            }
        }
    }
    AlgebraReport { antisymmetry_failures, jacobi_failures, closure_failures }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_gl_is_abelian_on_sigma() {
        let t = gl_bracket_table(1);
        assert!(t.bracket(0, 0).is_empty());
        assert!(t.bracket(1, 1).is_empty());
    }

    #[test]
    fn planar_sigma_bracket_expansion() {
        // {Σ¹₂, Σ²₁} = Σ²₂ − Σ¹₁ (zero-based: {Σ01, Σ10} = Σ11 − Σ00).
        let t = gl_bracket_table(2);
        assert_eq!(t.bracket(1, 2), vec![(0, -1), (3, 1)]);
    }

    #[test]
    fn skew_index_is_dense() {
        let n = 5;
        for (k, (a, b)) in skew_pairs(n).into_iter().enumerate() {
            assert_eq!(skew_index(n, a, b), k);
        }
    }

    #[test]
    fn mn_table_is_minus_so_n_of_m() {
        // {M_ab, M_cd} = {N_ab, N_cd} = −f(M), {M_ab, N_cd} = −f(N).
        let n = 4;
        let t = mn_bracket_table(n);
        let np = skew_pairs(n).len();
        let pairs = skew_pairs(n);
        for (i, &x) in pairs.iter().enumerate() {
            for (j, &y) in pairs.iter().enumerate() {
                let f: Combination = so_n_entry(n, 0, x, y).into_iter().map(|(k, v)| (k, -v)).collect();
                let f = normalize(f);
                assert_eq!(t.bracket(i, j), f);
                assert_eq!(t.bracket(np + i, np + j), f);
                let fn_: Combination = normalize(f.iter().map(|&(k, v)| (k + np, v)).collect());
                assert_eq!(t.bracket(i, np + j), fn_);
            }
        }
    }

    #[test]
    fn planar_mn_brackets_vanish() {
        let t = mn_bracket_table(2);
        assert!(t.entries.is_empty());
    }

    #[test]
    fn injected_sign_fault_breaks_jacobi() {
        let mut t = gl_bracket_table(2);
        let key = *t.entries.keys().next().unwrap();
        let (i, j) = key;
        for k in [(i, j), (j, i)] {
            if let Some(c) = t.entries.get_mut(&k) {
                for e in c.iter_mut() {
                    e.1 = -e.1;
                }
            }
        }
        let r = verify_algebra(&t);
        assert!(r.antisymmetry_failures.is_empty());
        assert!(!r.jacobi_failures.is_empty());
    }
}
