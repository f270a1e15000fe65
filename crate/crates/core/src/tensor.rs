//! Symmetric tensor algebra in dimension `n`.
//!
//! Tensors of rank 0 through 3 (rank 4 is tolerated as an internal
//! intermediate) are stored densely, one complex entry per sorted
//! multi-index. The module provides symmetrization, symmetric products,
//! the Kronecker maps `i_delta` / `j_delta`, the trace-free decomposition
//! and the pairing of a tensor with powers of a complex vector.

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Highest rank the storage layer accepts. Public operations cap at 3;
/// rank 4 only ever appears as an intermediate inside symmetric products.
pub const MAX_RANK: usize = 4;

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Number of independent entries of a symmetric rank-`rank` tensor in
/// dimension `n`: C(n + rank - 1, rank).
pub fn sym_len(n: usize, rank: usize) -> usize {
    binomial(n + rank - 1, rank)
}

/// Lexicographic position of a sorted multi-index among all sorted
/// multi-indices of the same length over `{0, .., n-1}`.
fn position(n: usize, sorted: &[usize]) -> usize {
    let r = sorted.len();
    let mut pos = 0;
    let mut prev = 0;
    for (k, &ik) in sorted.iter().enumerate() {
        for v in prev..ik {
            pos += sym_len(n - v, r - k - 1);
        }
        prev = ik;
    }
    pos
}

/// All sorted multi-indices of length `rank` over `{0, .., n-1}` in
/// lexicographic order.
pub fn sorted_multi_indices(n: usize, rank: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(sym_len(n, rank));
    let mut idx = vec![0usize; rank];
    loop {
        out.push(idx.clone());
        // advance to the next sorted sequence
        let mut k = rank;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if idx[k] + 1 < n {
                let v = idx[k] + 1;
                for slot in idx.iter_mut().skip(k) {
                    *slot = v;
                }
                break;
            }
        }
        if rank == 0 {
            return out;
        }
    }
}

/// Number of distinct permutations of a sorted multi-index.
pub fn multiplicity(sorted: &[usize]) -> usize {
    let factorial = |m: usize| (2..=m).product::<usize>().max(1);
    let mut denom = 1usize;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        denom *= factorial(j - i);
        i = j;
    }
    factorial(sorted.len()) / denom
}

fn permutations(len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..len).collect();
    heap_permute(&mut items, len, &mut out);
    out
}

fn heap_permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_permute(items, k - 1, out);
        if k.is_multiple_of(2) {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

/// Dense symmetric tensor of rank 0..=3 (internally up to 4) in dimension `n`.
///
/// Entries are stored per sorted multi-index in lexicographic order; the
/// full-tensor view is recovered through permutation invariance.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor {
    n: usize,
    rank: usize,
    entries: Vec<Complex64>,
}

impl SymTensor {
    pub fn zeros(n: usize, rank: usize) -> Self {
        assert!(n >= 1, "dimension must be at least 1");
        assert!(rank <= MAX_RANK, "rank above internal maximum");
        SymTensor {
            n,
            rank,
            entries: vec![Complex64::new(0.0, 0.0); sym_len(n, rank)],
        }
    }

    /// Rank-0 tensor holding a single scalar.
    pub fn scalar(n: usize, value: Complex64) -> Self {
        let mut t = SymTensor::zeros(n, 0);
        t.entries[0] = value;
        t
    }

    /// The `i`-th coordinate vector as a rank-1 tensor.
    pub fn basis_vector(n: usize, i: usize) -> Self {
        assert!(i < n);
        let mut t = SymTensor::zeros(n, 1);
        t.entries[i] = Complex64::new(1.0, 0.0);
        t
    }

    /// Kronecker delta as a rank-2 tensor.
    pub fn kron_delta(n: usize) -> Self {
        let mut t = SymTensor::zeros(n, 2);
        for i in 0..n {
            t.set(&[i, i], Complex64::new(1.0, 0.0));
        }
        t
    }

    /// Unit tensor with a single 1 at the given (sorted) multi-index.
    pub fn unit(n: usize, rank: usize, idx: &[usize]) -> Self {
        let mut t = SymTensor::zeros(n, rank);
        t.set(idx, Complex64::new(1.0, 0.0));
        t
    }

    pub fn from_entries(n: usize, rank: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rank > MAX_RANK {
            return Err(Error::UnsupportedRank {
                rank,
                supported: "0..=4",
            });
        }
        if entries.len() != sym_len(n, rank) {
            return Err(Error::DimensionMismatch(format!(
                "expected {} symmetric entries for n={n}, rank={rank}, got {}",
                sym_len(n, rank),
                entries.len()
            )));
        }
        Ok(SymTensor { n, rank, entries })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Entry at an arbitrary (not necessarily sorted) multi-index.
    pub fn get(&self, idx: &[usize]) -> Complex64 {
        debug_assert_eq!(idx.len(), self.rank);
        let mut s = idx.to_vec();
        s.sort_unstable();
        self.entries[position(self.n, &s)]
    }

    pub fn set(&mut self, idx: &[usize], value: Complex64) {
        debug_assert_eq!(idx.len(), self.rank);
        let mut s = idx.to_vec();
        s.sort_unstable();
        let p = position(self.n, &s);
        self.entries[p] = value;
    }

    /// Iterate over (sorted multi-index, entry) pairs.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, Complex64)> + '_ {
        sorted_multi_indices(self.n, self.rank)
            .into_iter()
            .zip(self.entries.iter().copied())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        SymTensor {
            n: self.n,
            rank: self.rank,
            entries: self.entries.iter().map(|e| e * c).collect(),
        }
    }

    pub fn add(&self, other: &SymTensor) -> SymTensor {
        assert_eq!(self.n, other.n);
        assert_eq!(self.rank, other.rank);
        SymTensor {
            n: self.n,
            rank: self.rank,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &SymTensor) -> SymTensor {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Max-norm over stored entries.
    pub fn norm_inf(&self) -> f64 {
        self.entries.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    /// Inner product with multiplicity weights, i.e. the full-tensor
    /// Frobenius pairing sum over all index tuples.
    pub fn dot(&self, other: &SymTensor) -> Complex64 {
        assert_eq!(self.n, other.n);
        assert_eq!(self.rank, other.rank);
        sorted_multi_indices(self.n, self.rank)
            .iter()
            .zip(self.entries.iter().zip(&other.entries))
            .map(|(idx, (a, b))| a * b.conj() * multiplicity(idx) as f64)
            .sum()
    }

    /// Weighted Frobenius norm (square root of the full-tensor sum of
    /// squared moduli).
    pub fn norm(&self) -> f64 {
        self.dot(self).re.sqrt()
    }

    /// Expand to the full dense view with n^rank entries (row-major in the
    /// index tuple).
    pub fn full_view(&self) -> Vec<Complex64> {
        let total = self.n.pow(self.rank as u32);
        let mut out = vec![Complex64::new(0.0, 0.0); total];
        let mut idx = vec![0usize; self.rank];
        for (flat, slot) in out.iter_mut().enumerate() {
            let mut rem = flat;
            for k in (0..self.rank).rev() {
                idx[k] = rem % self.n;
                rem /= self.n;
            }
            *slot = self.get(&idx);
        }
        out
    }

    /// True when every entry is real to within `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.entries.iter().all(|e| e.im.abs() <= tol)
    }

    /// Pair the tensor with the `rank`-th symmetric power of `xi`:
    /// the full sum over all index tuples of `F_{i1..il} xi_{i1} .. xi_{il}`.
    pub fn eval_pairing(&self, xi: &[Complex64]) -> Complex64 {
        assert_eq!(
            xi.len(),
            self.n,
            "vector dimension must match tensor dimension"
        );
        assert!(self.rank <= 3, "pairing is defined for rank <= 3");
        let mut acc = Complex64::new(0.0, 0.0);
        for (idx, value) in self.iter() {
            let mut prod = Complex64::new(multiplicity(&idx) as f64, 0.0);
            for &i in &idx {
                prod *= xi[i];
            }
            acc += value * prod;
        }
        acc
    }

    /// Serialize to the interchange JSON form
    /// `{n, rank, entries: [[one-based multi-index], value | [re, im]]}`.
    pub fn to_json_value(&self) -> serde_json::Value {
        let entries: Vec<serde_json::Value> = self
            .iter()
            .map(|(idx, v)| {
                let midx: Vec<serde_json::Value> = idx
                    .iter()
                    .map(|&i| serde_json::Value::from(i as u64 + 1))
                    .collect();
                let value = if v.im == 0.0 {
                    serde_json::Value::from(v.re)
                } else {
                    serde_json::Value::from(vec![v.re, v.im])
                };
                serde_json::Value::Array(vec![serde_json::Value::Array(midx), value])
            })
            .collect();
        serde_json::json!({
            "n": self.n,
            "rank": self.rank,
            "entries": entries,
        })
    }

    pub fn from_json_value(v: &serde_json::Value) -> Result<Self> {
        let n = v
            .get("n")
            .and_then(|x| x.as_u64())
            .ok_or_else(|| Error::Format("tensor JSON missing integer field 'n'".into()))?
            as usize;
        let rank = v
            .get("rank")
            .and_then(|x| x.as_u64())
            .ok_or_else(|| Error::Format("tensor JSON missing integer field 'rank'".into()))?
            as usize;
        if rank > MAX_RANK {
            return Err(Error::UnsupportedRank {
                rank,
                supported: "0..=4",
            });
        }
        let mut t = SymTensor::zeros(n, rank);
        let entries = v
            .get("entries")
            .and_then(|x| x.as_array())
            .ok_or_else(|| Error::Format("tensor JSON missing array field 'entries'".into()))?;
        for e in entries {
            let pair = e
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| Error::Format("tensor entry must be [multi-index, value]".into()))?;
            let idx: Vec<usize> = pair[0]
                .as_array()
                .ok_or_else(|| Error::Format("tensor entry index must be an array".into()))?
                .iter()
                .map(|i| {
                    i.as_u64()
                        .filter(|&i| i >= 1 && i <= n as u64)
                        .map(|i| i as usize - 1)
                        .ok_or_else(|| Error::Format("multi-index out of range".into()))
                })
                .collect::<Result<_>>()?;
            if idx.len() != rank {
                return Err(Error::Format("multi-index length does not match rank".into()));
            }
            let value = match &pair[1] {
                serde_json::Value::Number(x) => Complex64::new(
                    x.as_f64()
                        .ok_or_else(|| Error::Format("non-finite tensor entry".into()))?,
                    0.0,
                ),
                serde_json::Value::Array(a) if a.len() == 2 => {
                    let re = a[0].as_f64();
                    let im = a[1].as_f64();
                    match (re, im) {
                        (Some(re), Some(im)) => Complex64::new(re, im),
                        _ => return Err(Error::Format("complex entry must be [re, im]".into())),
                    }
                }
                _ => return Err(Error::Format("tensor value must be number or [re, im]".into())),
            };
            t.set(&idx, value);
        }
        Ok(t)
    }
}

impl Serialize for SymTensor {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_value().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymTensor {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(deserializer)?;
        SymTensor::from_json_value(&v).map_err(D::Error::custom)
    }
}

/// Symmetrize a full tensor given by its `n^rank` row-major entries:
/// the average over all index permutations, stored symmetrically.
pub fn symmetrize(full: &[Complex64], n: usize, rank: usize) -> Result<SymTensor> {
    if rank > 3 {
        return Err(Error::UnsupportedRank {
            rank,
            supported: "0..=3",
        });
    }
    if full.len() != n.pow(rank as u32) {
        return Err(Error::DimensionMismatch(format!(
            "full tensor needs {} entries, got {}",
            n.pow(rank as u32),
            full.len()
        )));
    }
    let perms = permutations(rank);
    let mut out = SymTensor::zeros(n, rank);
    for (slot, idx) in sorted_multi_indices(n, rank).iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for perm in &perms {
            let mut flat = 0usize;
            for &p in perm {
                flat = flat * n + idx[p];
            }
            acc += full[flat];
        }
        out.entries[slot] = acc / perms.len() as f64;
    }
    Ok(out)
}

/// Symmetric product: the symmetrization of the tensor product `S (x) T`.
/// The combined rank may reach 4 only to support internal intermediates.
pub fn sym_product(s: &SymTensor, t: &SymTensor) -> Result<SymTensor> {
    if s.dim() != t.dim() {
        return Err(Error::DimensionMismatch(format!(
            "tensor dimensions differ: {} vs {}",
            s.dim(),
            t.dim()
        )));
    }
    let (j, k) = (s.rank(), t.rank());
    if j + k > MAX_RANK {
        return Err(Error::UnsupportedRank {
            rank: j + k,
            supported: "0..=4",
        });
    }
    let n = s.dim();
    let rank = j + k;
    let perms = permutations(rank);
    let mut out = SymTensor::zeros(n, rank);
    for (slot, idx) in sorted_multi_indices(n, rank).iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for perm in &perms {
            let left: Vec<usize> = perm[..j].iter().map(|&p| idx[p]).collect();
            let right: Vec<usize> = perm[j..].iter().map(|&p| idx[p]).collect();
            acc += s.get(&left) * t.get(&right);
        }
        out.entries[slot] = acc / perms.len() as f64;
    }
    Ok(out)
}

/// Symmetrized multiplication with the Kronecker tensor, raising the rank
/// by two. Only ranks 0 and 1 are needed (and allowed).
pub fn i_delta(f: &SymTensor) -> Result<SymTensor> {
    if f.rank() > 1 {
        return Err(Error::UnsupportedRank {
            rank: f.rank(),
            supported: "0..=1",
        });
    }
    sym_product(f, &SymTensor::kron_delta(f.dim()))
}

/// Contraction with the Kronecker tensor over the last two indices,
/// lowering the rank by two. By convention the result is zero for
/// rank 0 and 1.
pub fn j_delta(f: &SymTensor) -> SymTensor {
    let n = f.dim();
    if f.rank() < 2 {
        return SymTensor::zeros(n, 0);
    }
    let rank = f.rank() - 2;
    let mut out = SymTensor::zeros(n, rank);
    for (slot, idx) in sorted_multi_indices(n, rank).iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut full = idx.clone();
        full.push(0);
        full.push(0);
        for d in 0..n {
            full[rank] = d;
            full[rank + 1] = d;
            acc += f.get(&full);
        }
        out.entries[slot] = acc;
    }
    out
}

/// Split a rank-2 or rank-3 symmetric tensor into its trace-free and
/// isotropic parts: `A = A_tf + i_delta(a)` with `j_delta(A_tf) = 0`.
///
/// Closed forms: rank 2 uses `a = j_delta(A) / n`, rank 3 uses
/// `a = 3 j_delta(A) / (n + 2)`; both follow from contracting the
/// decomposition with the Kronecker tensor.
pub fn trace_free_decompose(a: &SymTensor) -> Result<(SymTensor, SymTensor)> {
    let n = a.dim();
    match a.rank() {
        2 => {
            let iso = j_delta(a).scale(Complex64::new(1.0 / n as f64, 0.0));
            let tf = a.sub(&i_delta(&iso)?);
            Ok((tf, iso))
        }
        3 => {
            let iso = j_delta(a).scale(Complex64::new(3.0 / (n as f64 + 2.0), 0.0));
            let tf = a.sub(&i_delta(&iso)?);
            Ok((tf, iso))
        }
        rank => Err(Error::UnsupportedRank {
            rank,
            supported: "2..=3",
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_tensor(rng: &mut ChaCha8Rng, n: usize, rank: usize, complex: bool) -> SymTensor {
        let entries = (0..sym_len(n, rank))
            .map(|_| {
                Complex64::new(
                    rng.gen_range(-1.0..1.0),
                    if complex { rng.gen_range(-1.0..1.0) } else { 0.0 },
                )
            })
            .collect();
        SymTensor::from_entries(n, rank, entries).unwrap()
    }

    #[test]
    fn storage_size_matches_combinatorics() {
        for n in 2..=6 {
            for rank in 0..=4 {
                assert_eq!(
                    SymTensor::zeros(n, rank).entries().len(),
                    binomial(n + rank - 1, rank)
                );
                assert_eq!(sorted_multi_indices(n, rank).len(), sym_len(n, rank));
            }
        }
    }

    #[test]
    fn position_is_lexicographic_enumeration_order() {
        for n in 2..=5 {
            for rank in 1..=4 {
                for (k, idx) in sorted_multi_indices(n, rank).iter().enumerate() {
                    assert_eq!(position(n, idx), k);
                }
            }
        }
    }

    #[test]
    fn symmetrize_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_tensor(&mut rng, 3, 3, true);
        let again = symmetrize(&t.full_view(), 3, 3).unwrap();
        for (a, b) in t.entries().iter().zip(again.entries()) {
            assert_relative_eq!(a.re, b.re, max_relative = 1e-14, epsilon = 1e-14);
            assert_relative_eq!(a.im, b.im, max_relative = 1e-14, epsilon = 1e-14);
        }
    }

    #[test]
    fn symmetrize_e1_tensor_e2() {
        // n=2, l=2, T = e1 (x) e2 -> single symmetric entry 1/2 at (1,2)
        let mut full = vec![c(0.0); 4];
        full[1] = c(1.0); // T_{12} in row-major
        let s = symmetrize(&full, 2, 2).unwrap();
        assert_eq!(s.get(&[0, 1]), c(0.5));
        assert_eq!(s.get(&[0, 0]), c(0.0));
        assert_eq!(s.get(&[1, 1]), c(0.0));
    }

    #[test]
    fn symmetrize_matches_brute_force_average() {
        // random n=3, l=3 tensor against the explicit 6-permutation oracle
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 3;
        let full: Vec<Complex64> = (0..27)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let s = symmetrize(&full, n, 3).unwrap();
        let flat = |i: usize, j: usize, k: usize| full[(i * n + j) * n + k];
        for (idx, v) in s.iter() {
            let (a, b, cc) = (idx[0], idx[1], idx[2]);
            let oracle = (flat(a, b, cc)
                + flat(a, cc, b)
                + flat(b, a, cc)
                + flat(b, cc, a)
                + flat(cc, a, b)
                + flat(cc, b, a))
                / 6.0;
            assert!((v - oracle).norm() < 1e-14);
        }
    }

    #[test]
    fn symmetrize_rejects_rank_four() {
        let full = vec![c(0.0); 16];
        assert!(matches!(
            symmetrize(&full, 2, 4),
            Err(Error::UnsupportedRank { .. })
        ));
    }

    #[test]
    fn sym_product_scalar_acts_as_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_tensor(&mut rng, 4, 2, true);
        let s = SymTensor::scalar(4, Complex64::new(2.0, -1.0));
        let p = sym_product(&s, &t).unwrap();
        let expect = t.scale(Complex64::new(2.0, -1.0));
        assert!(p.sub(&expect).norm_inf() < 1e-14);
    }

    #[test]
    fn sym_product_basis_vectors() {
        let e1 = SymTensor::basis_vector(2, 0);
        let e2 = SymTensor::basis_vector(2, 1);
        let p = sym_product(&e1, &e2).unwrap();
        assert_eq!(p.get(&[0, 0]), c(0.0));
        assert_eq!(p.get(&[0, 1]), c(0.5));
        assert_eq!(p.get(&[1, 1]), c(0.0));
    }

    #[test]
    fn sym_product_matches_full_index_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 3;
        let s = random_tensor(&mut rng, n, 1, true);
        let t = random_tensor(&mut rng, n, 2, true);
        let p = sym_product(&s, &t).unwrap();
        // brute-force sigma(S (x) T) through the full view
        let full_s = s.full_view();
        let full_t = t.full_view();
        let mut full = vec![Complex64::new(0.0, 0.0); 27];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    full[(i * n + j) * n + k] = full_s[i] * full_t[j * n + k];
                }
            }
        }
        let oracle = symmetrize(&full, n, 3).unwrap();
        assert!(p.sub(&oracle).norm_inf() < 1e-14);
    }

    #[test]
    fn sym_product_dimension_mismatch() {
        let a = SymTensor::basis_vector(2, 0);
        let b = SymTensor::basis_vector(3, 0);
        assert!(matches!(
            sym_product(&a, &b),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn i_delta_of_one_is_delta() {
        let one = SymTensor::scalar(2, c(1.0));
        let d = i_delta(&one).unwrap();
        assert!(d.sub(&SymTensor::kron_delta(2)).norm_inf() < 1e-15);
    }

    #[test]
    fn i_delta_of_e1_in_2d() {
        let d = i_delta(&SymTensor::basis_vector(2, 0)).unwrap();
        assert_relative_eq!(d.get(&[0, 0, 0]).re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(d.get(&[0, 1, 1]).re, 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(d.get(&[0, 0, 1]).re, 0.0, epsilon = 1e-15);
        assert_relative_eq!(d.get(&[1, 1, 1]).re, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn i_delta_matches_index_sum_oracle() {
        // (i_delta f)_{ijk} = (f_i d_jk + f_j d_ik + f_k d_ij) / 3
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4;
        let f = random_tensor(&mut rng, n, 1, true);
        let d = i_delta(&f).unwrap();
        let del = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for (idx, v) in d.iter() {
            let (i, j, k) = (idx[0], idx[1], idx[2]);
            let oracle = (f.get(&[i]) * del(j, k)
                + f.get(&[j]) * del(i, k)
                + f.get(&[k]) * del(i, j))
                / 3.0;
            assert!((v - oracle).norm() < 1e-14);
        }
    }

    #[test]
    fn i_delta_rejects_rank_two() {
        let t = SymTensor::kron_delta(3);
        assert!(matches!(i_delta(&t), Err(Error::UnsupportedRank { .. })));
    }

    #[test]
    fn j_delta_of_delta_is_dimension() {
        for n in 2..=6 {
            let tr = j_delta(&SymTensor::kron_delta(n));
            assert_relative_eq!(tr.get(&[]).re, n as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn j_delta_i_delta_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in 2..=6 {
            // rank-1: j_delta(i_delta a) = (n + 2)/3 a
            let a = random_tensor(&mut rng, n, 1, true);
            let back = j_delta(&i_delta(&a).unwrap());
            let scaled = a.scale(c((n as f64 + 2.0) / 3.0));
            assert!(back.sub(&scaled).norm_inf() < 1e-13);
            // rank-0: j_delta(c delta) = c n
            let s = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let back0 = j_delta(&i_delta(&SymTensor::scalar(n, s)).unwrap());
            assert!((back0.get(&[]) - s * n as f64).norm() < 1e-14);
        }
    }

    #[test]
    fn j_delta_vanishes_below_rank_two() {
        let v = SymTensor::basis_vector(3, 1);
        assert_eq!(j_delta(&v).norm_inf(), 0.0);
        assert_eq!(j_delta(&SymTensor::scalar(3, c(5.0))).norm_inf(), 0.0);
    }

    #[test]
    fn decompose_pure_isotropic_rank2() {
        let (tf, iso) = trace_free_decompose(&SymTensor::kron_delta(3)).unwrap();
        assert!(tf.norm_inf() < 1e-15);
        assert_relative_eq!(iso.get(&[]).re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn decompose_pure_isotropic_rank3() {
        let src = i_delta(&SymTensor::basis_vector(2, 0)).unwrap();
        let (tf, iso) = trace_free_decompose(&src).unwrap();
        assert!(tf.norm_inf() < 1e-14);
        assert!(iso.sub(&SymTensor::basis_vector(2, 0)).norm_inf() < 1e-14);
    }

    #[test]
    fn decompose_round_trip_and_trace_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..=6 {
            for rank in [2usize, 3] {
                for _ in 0..20 {
                    let a = random_tensor(&mut rng, n, rank, true);
                    let (tf, iso) = trace_free_decompose(&a).unwrap();
                    let rebuilt = tf.add(&i_delta(&iso).unwrap());
                    assert!(rebuilt.sub(&a).norm_inf() < 1e-12);
                    assert!(j_delta(&tf).norm_inf() < 1e-12);
                    // uniqueness: re-decomposing the trace-free part is trivial
                    let (_, iso2) = trace_free_decompose(&tf).unwrap();
                    assert!(iso2.norm_inf() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn decompose_projection_matches_least_squares_oracle() {
        // Independent oracle for the isotropic part: minimize
        // |A - i_delta(a)| over a by projecting onto the i_delta image in
        // the multiplicity-weighted inner product.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 4;
        let a = random_tensor(&mut rng, n, 3, false);
        let (_, iso) = trace_free_decompose(&a).unwrap();

        let gens: Vec<SymTensor> = (0..n)
            .map(|i| i_delta(&SymTensor::basis_vector(n, i)).unwrap())
            .collect();
        let mut gram = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut rhs = nalgebra::DVector::<f64>::zeros(n);
        for i in 0..n {
            for j in 0..n {
                gram[(i, j)] = gens[i].dot(&gens[j]).re;
            }
            rhs[i] = a.dot(&gens[i]).re;
        }
        let coeff = gram.lu().solve(&rhs).unwrap();
        for i in 0..n {
            assert_relative_eq!(iso.get(&[i]).re, coeff[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn decompose_rejects_rank_one() {
        let v = SymTensor::basis_vector(2, 0);
        assert!(matches!(
            trace_free_decompose(&v),
            Err(Error::UnsupportedRank { .. })
        ));
    }

    #[test]
    fn pairing_of_delta_with_null_vector_vanishes() {
        let xi = [Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)];
        let p = SymTensor::kron_delta(2).eval_pairing(&xi);
        assert!(p.norm() < 1e-15);
    }

    #[test]
    fn pairing_rank1_reads_components() {
        let xi = [Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)];
        let p = SymTensor::basis_vector(2, 0).eval_pairing(&xi);
        assert!((p - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn pairing_matches_triple_sum_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 3;
        let f = random_tensor(&mut rng, n, 3, true);
        let xi: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut oracle = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    oracle += f.get(&[i, j, k]) * xi[i] * xi[j] * xi[k];
                }
            }
        }
        assert!((f.eval_pairing(&xi) - oracle).norm() < 1e-13);
    }

    #[test]
    fn pairing_is_homogeneous_in_xi() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for rank in 0..=3usize {
            let n = 3;
            let f = random_tensor(&mut rng, n, rank, true);
            let xi: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let cc = Complex64::new(rng.gen_range(0.2..1.5), rng.gen_range(-1.0..1.0));
            let scaled: Vec<Complex64> = xi.iter().map(|x| x * cc).collect();
            let lhs = f.eval_pairing(&scaled);
            let rhs = f.eval_pairing(&xi) * cc.powu(rank as u32);
            assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for rank in 0..=3usize {
            let t = random_tensor(&mut rng, 3, rank, rank % 2 == 1);
            let text = serde_json::to_string(&t.to_json_value()).unwrap();
            let back = SymTensor::from_json_value(&serde_json::from_str(&text).unwrap()).unwrap();
            assert_eq!(t, back);
        }
    }
}
