//! Batch multidimensional scaling and evaluation geometry.
//!
//! Given the matrix S of squared pairwise distances, double centering with
//! J⊥ = I − 11ᵀ/N produces the Gram matrix of barycentric coordinates:
//!
//! ```text
//! M = -1/2 J⊥ S J⊥ = Z Zᵀ        (Z = positions minus their centroid)
//! ```
//!
//! so the top-p eigenpairs of M recover the configuration up to a rigid
//! transform: Ẑ = (√λ₁ u₁, …, √λ_p u_p). The same module holds the per-entry
//! decomposition of M used by the distributed protocol, orthogonal Procrustes
//! alignment (reflections included, no scaling) and RMSE evaluation.

use crate::error::{Error, Result};
use crate::{DMat, DVec};

/// A deployment: true node coordinates, anchor set, bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    positions: DMat,
    anchors: Vec<usize>,
    /// Per-dimension (low, high) bounds of the deployment area, meters.
    area: Vec<(f64, f64)>,
}

impl Scenario {
    /// Build a scenario with an explicit bounding box.
    pub fn new(positions: DMat, anchors: Vec<usize>, area: Vec<(f64, f64)>) -> Result<Self> {
        let (n, p) = positions.shape();
        if !(p == 2 || p == 3) {
            return Err(Error::invalid("scenario", format!("embedding dimension must be 2 or 3, got {p}")));
        }
        if n < p + 1 {
            return Err(Error::invalid(
                "scenario",
                format!("need at least p+1 = {} nodes for a {p}-dimensional embedding, got {n}", p + 1),
            ));
        }
        if area.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "area has {} dimensions but positions have {p}",
                area.len()
            )));
        }
        for (k, &(lo, hi)) in area.iter().enumerate() {
            if hi.is_nan() || lo.is_nan() || hi <= lo {
                return Err(Error::invalid("area", format!("dimension {k}: empty range [{lo}, {hi}]")));
            }
        }
        const TOL: f64 = 1e-9;
        for i in 0..n {
            for k in 0..p {
                let v = positions[(i, k)];
                if !v.is_finite() || v < area[k].0 - TOL || v > area[k].1 + TOL {
                    return Err(Error::invalid(
                        "scenario",
                        format!("node {i} coordinate {k} = {v} outside area [{}, {}]", area[k].0, area[k].1),
                    ));
                }
            }
        }
        let mut anchors = anchors;
        anchors.sort_unstable();
        anchors.dedup();
        if let Some(&a) = anchors.iter().find(|&&a| a >= n) {
            return Err(Error::invalid("anchors", format!("anchor index {a} out of range (N = {n})")));
        }
        Ok(Scenario { positions, anchors, area })
    }

    /// Build a scenario whose area is the tight bounding box of the positions.
    pub fn from_positions(positions: DMat, anchors: Vec<usize>) -> Result<Self> {
        let (n, p) = positions.shape();
        if n == 0 {
            return Err(Error::invalid("scenario", "no nodes"));
        }
        let mut area = Vec::with_capacity(p);
        for k in 0..p {
            let col = positions.column(k);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            // Degenerate extents (all nodes on a hyperplane) still need a
            // nonempty box.
            let pad = if hi > lo { 0.0 } else { 0.5 };
            area.push((lo - pad, hi + pad));
        }
        Scenario::new(positions, anchors, area)
    }

    pub fn n(&self) -> usize {
        self.positions.nrows()
    }

    /// Embedding dimension p.
    pub fn dim(&self) -> usize {
        self.positions.ncols()
    }

    pub fn positions(&self) -> &DMat {
        &self.positions
    }

    pub fn anchors(&self) -> &[usize] {
        &self.anchors
    }

    pub fn is_anchor(&self, i: usize) -> bool {
        self.anchors.binary_search(&i).is_ok()
    }

    pub fn area(&self) -> &[(f64, f64)] {
        &self.area
    }

    pub fn sq_distance(&self, i: usize, j: usize) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.dim() {
            let t = self.positions[(i, k)] - self.positions[(j, k)];
            acc += t * t;
        }
        acc
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.sq_distance(i, j).sqrt()
    }
}

/// N×N matrix of squared pairwise distances: symmetric, zero diagonal,
/// nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    s: DMat,
}

impl SimilarityMatrix {
    /// Exact squared distances of a scenario.
    pub fn from_scenario(scenario: &Scenario) -> Self {
        Self::from_coordinates(scenario.positions())
    }

    /// Exact squared distances of an arbitrary N×p coordinate matrix.
    pub fn from_coordinates(coords: &DMat) -> Self {
        let n = coords.nrows();
        let mut s = DMat::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let mut acc = 0.0;
                for k in 0..coords.ncols() {
                    let t = coords[(i, k)] - coords[(j, k)];
                    acc += t * t;
                }
                s[(i, j)] = acc;
                s[(j, i)] = acc;
            }
        }
        SimilarityMatrix { s }
    }

    /// Wrap a noisy estimate matrix: averaged with its transpose (forward and
    /// reverse measurements are independent draws) and diagonal forced to
    /// zero. Evaluation-only preprocessing for the batch path.
    pub fn from_estimates(est: &DMat) -> Result<Self> {
        if est.nrows() != est.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "similarity estimate must be square, got {}x{}",
                est.nrows(),
                est.ncols()
            )));
        }
        let n = est.nrows();
        let mut s = DMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let v = 0.5 * (est[(i, j)] + est[(j, i)]);
                    if v < 0.0 {
                        return Err(Error::invalid(
                            "similarity",
                            format!("negative squared distance {v} at ({i},{j})"),
                        ));
                    }
                    s[(i, j)] = v;
                }
            }
        }
        Ok(SimilarityMatrix { s })
    }

    /// Wrap an already-valid squared-distance matrix (symmetric to 1e-9,
    /// zero diagonal, nonnegative).
    pub fn from_matrix(s: DMat) -> Result<Self> {
        if s.nrows() != s.ncols() {
            return Err(Error::DimensionMismatch("similarity must be square".into()));
        }
        let scale = s.amax().max(1.0);
        for i in 0..s.nrows() {
            if s[(i, i)] != 0.0 {
                return Err(Error::invalid("similarity", format!("nonzero diagonal at {i}")));
            }
            for j in 0..s.ncols() {
                if (s[(i, j)] - s[(j, i)]).abs() > 1e-9 * scale {
                    return Err(Error::invalid("similarity", format!("asymmetric at ({i},{j})")));
                }
                if s[(i, j)] < 0.0 {
                    return Err(Error::invalid("similarity", format!("negative entry at ({i},{j})")));
                }
            }
        }
        Ok(SimilarityMatrix { s })
    }

    pub fn n(&self) -> usize {
        self.s.nrows()
    }

    pub fn matrix(&self) -> &DMat {
        &self.s
    }
}

/// Double-centered similarity: M = -1/2 J⊥ S J⊥.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    m: DMat,
}

impl GramMatrix {
    pub fn matrix(&self) -> &DMat {
        &self.m
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }
}

/// -1/2 J⊥ A J⊥ for an arbitrary square matrix (row and column means handled
/// separately, so asymmetric per-tick estimates are centered correctly).
pub fn center_matrix(a: &DMat) -> DMat {
    let n = a.nrows();
    let nf = n as f64;
    let mut row_mean = vec![0.0; n];
    let mut col_mean = vec![0.0; n];
    let mut grand = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = a[(i, j)];
            row_mean[i] += v;
            col_mean[j] += v;
            grand += v;
        }
    }
    for v in row_mean.iter_mut().chain(col_mean.iter_mut()) {
        *v /= nf;
    }
    grand /= nf * nf;
    DMat::from_fn(n, n, |i, j| -0.5 * (a[(i, j)] - row_mean[i] - col_mean[j] + grand))
}

/// Double centering of a similarity matrix.
pub fn double_center(s: &SimilarityMatrix) -> GramMatrix {
    GramMatrix { m: center_matrix(&s.s) }
}

/// Single Gram entry via the row-average decomposition
/// M(i,j) = (d̄²(i) + d̄²(j))/2 − (s(i,j) + δ)/2, with d̄²(i) the mean of row
/// i and δ the grand mean. Identical to [`double_center`] entrywise; this is
/// the form each node of the distributed protocol can evaluate locally.
pub fn gram_entry_decomposed(i: usize, j: usize, s: &SimilarityMatrix) -> f64 {
    let n = s.n() as f64;
    let ri = s.s.row(i).sum() / n;
    let rj = s.s.row(j).sum() / n;
    let delta = s.s.sum() / (n * n);
    0.5 * (ri + rj) - 0.5 * (s.s[(i, j)] + delta)
}

/// Top-p eigenpairs of a symmetric matrix, eigenvalues descending,
/// eigenvectors unit-norm with the largest-magnitude entry of each made
/// positive (deterministic sign for reproducible output).
pub fn top_eigs(gram: &GramMatrix, p: usize) -> Result<(DVec, DMat)> {
    let m = &gram.m;
    let n = m.nrows();
    if p == 0 || p > n {
        return Err(Error::invalid("p", format!("must be in 1..=N = {n}, got {p}")));
    }
    let scale = m.amax().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * scale {
                return Err(Error::invalid(
                    "gram",
                    format!("asymmetric beyond tolerance at ({i},{j}); symmetrize estimates first"),
                ));
            }
        }
    }
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let mut vals = DVec::zeros(p);
    let mut vecs = DMat::zeros(n, p);
    for (k, &idx) in order.iter().take(p).enumerate() {
        vals[k] = eig.eigenvalues[idx];
        let mut col = eig.eigenvectors.column(idx).clone_owned();
        // Deterministic sign: largest-magnitude entry positive.
        let mut dominant = 0;
        for r in 1..n {
            if col[r].abs() > col[dominant].abs() {
                dominant = r;
            }
        }
        if col[dominant] < 0.0 {
            col.neg_mut();
        }
        vecs.set_column(k, &col);
    }

    // Solver contract: residual per pair bounded relative to ‖m‖.
    let m_norm = m.norm().max(f64::MIN_POSITIVE);
    for k in 0..p {
        let u = vecs.column(k);
        let residual = (m * u - vals[k] * u).norm();
        if residual > 1e-10 * m_norm {
            return Err(Error::Numerical(format!(
                "eigen residual {residual:.3e} exceeds 1e-10 * ||m|| for eigenpair {k}"
            )));
        }
    }
    Ok((vals, vecs))
}

/// Batch MDS-MAP: double-center, take the top-p eigenpairs, scale
/// eigenvectors by √λ. Errors if the geometry does not span p dimensions
/// (λ_p ≤ 0 up to a relative rank tolerance of 1e-12·λ₁, since exactly-zero
/// eigenvalues surface as rounding noise).
pub fn batch_mds(s_hat: &SimilarityMatrix, p: usize) -> Result<DMat> {
    let gram = double_center(s_hat);
    let (vals, vecs) = top_eigs(&gram, p)?;
    let rank_tol = 1e-12 * vals[0].abs().max(f64::MIN_POSITIVE);
    if vals[p - 1] <= rank_tol {
        return Err(Error::DegenerateGeometry {
            index: p - 1,
            value: vals[p - 1],
            dim: p,
        });
    }
    let n = vecs.nrows();
    let mut coords = DMat::zeros(n, p);
    for k in 0..p {
        let scale = vals[k].sqrt();
        for i in 0..n {
            coords[(i, k)] = vecs[(i, k)] * scale;
        }
    }
    Ok(coords)
}

/// Result of a Procrustes fit.
#[derive(Debug, Clone)]
pub struct ProcrustesFit {
    /// est rows mapped through the fit: R·est_i + t.
    pub aligned: DMat,
    /// Orthogonal matrix (may include a reflection).
    pub rotation: DMat,
    pub translation: DVec,
    /// True when the cross-covariance was rank deficient and only the
    /// translation was fitted.
    pub degenerate: bool,
}

/// Least-squares rigid alignment of `est` onto `truth`: minimizes
/// Σ‖R·est_i + t − truth_i‖² over orthogonal R (reflections allowed) and
/// translation t; no scaling. With `anchors = Some(idx)` the fit uses only
/// those rows but is applied to all.
pub fn procrustes_align(est: &DMat, truth: &DMat, anchors: Option<&[usize]>) -> Result<ProcrustesFit> {
    if est.shape() != truth.shape() {
        return Err(Error::DimensionMismatch(format!(
            "est is {:?}, truth is {:?}",
            est.shape(),
            truth.shape()
        )));
    }
    let (n, p) = est.shape();
    let fit: Vec<usize> = match anchors {
        Some(idx) => {
            if idx.is_empty() {
                return Err(Error::invalid("anchors", "anchor alignment needs at least one anchor"));
            }
            if let Some(&a) = idx.iter().find(|&&a| a >= n) {
                return Err(Error::invalid("anchors", format!("index {a} out of range")));
            }
            idx.to_vec()
        }
        None => (0..n).collect(),
    };
    if fit.len() < p {
        return Err(Error::invalid(
            "alignment",
            format!("need at least p = {p} fit points, got {}", fit.len()),
        ));
    }
    let k = fit.len() as f64;
    let mut x_bar = DVec::zeros(p);
    let mut y_bar = DVec::zeros(p);
    for &i in &fit {
        for c in 0..p {
            x_bar[c] += est[(i, c)];
            y_bar[c] += truth[(i, c)];
        }
    }
    x_bar /= k;
    y_bar /= k;

    // Cross-covariance H = Σ (est_i − x̄)(truth_i − ȳ)ᵀ, column convention.
    let mut h = DMat::zeros(p, p);
    for &i in &fit {
        for a in 0..p {
            for b in 0..p {
                h[(a, b)] += (est[(i, a)] - x_bar[a]) * (truth[(i, b)] - y_bar[b]);
            }
        }
    }

    let svd = h.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let degenerate = smin <= 1e-12 * smax.max(1e-300) || smax == 0.0;
    let rotation = if degenerate {
        DMat::identity(p, p)
    } else {
        let u = svd.u.as_ref().expect("svd u");
        let v_t = svd.v_t.as_ref().expect("svd v_t");
        v_t.transpose() * u.transpose()
    };
    let translation = &y_bar - &rotation * &x_bar;

    let mut aligned = DMat::zeros(n, p);
    for i in 0..n {
        for a in 0..p {
            let mut v = translation[a];
            for b in 0..p {
                v += rotation[(a, b)] * est[(i, b)];
            }
            aligned[(i, a)] = v;
        }
    }
    Ok(ProcrustesFit { aligned, rotation, translation, degenerate })
}

/// Alignment applied before an RMSE evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alignment<'a> {
    /// Compare absolute coordinates.
    None,
    /// Best rigid fit over all nodes.
    Procrustes,
    /// Rigid fit on the given anchor rows, applied to all nodes.
    Anchors(&'a [usize]),
}

/// Root-mean-square position error √((1/N) Σ‖ẑ_i − z_i‖²) after the
/// requested alignment.
pub fn rmse(est: &DMat, truth: &DMat, align: Alignment<'_>) -> Result<f64> {
    if est.shape() != truth.shape() {
        return Err(Error::DimensionMismatch(format!(
            "est is {:?}, truth is {:?}",
            est.shape(),
            truth.shape()
        )));
    }
    let aligned;
    let est_eff: &DMat = match align {
        Alignment::None => est,
        Alignment::Procrustes => {
            aligned = procrustes_align(est, truth, None)?.aligned;
            &aligned
        }
        Alignment::Anchors(idx) => {
            aligned = procrustes_align(est, truth, Some(idx))?.aligned;
            &aligned
        }
    };
    let n = est.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..est.ncols() {
            let d = est_eff[(i, k)] - truth[(i, k)];
            acc += d * d;
        }
    }
    Ok((acc / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;
    use rand_chacha::rand_core::SeedableRng;

    fn random_coords(n: usize, p: usize, seed: u64, extent: f64) -> DMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMat::from_fn(n, p, |_, _| rng.random::<f64>() * extent)
    }

    fn equilateral() -> SimilarityMatrix {
        // Side 1: all off-diagonal squared distances are 1.
        SimilarityMatrix::from_matrix(DMat::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 }))
            .unwrap()
    }

    #[test]
    fn similarity_two_points() {
        let s = SimilarityMatrix::from_coordinates(&DMat::from_row_slice(2, 2, &[0.0, 0.0, 3.0, 0.0]));
        assert_eq!(s.matrix(), &DMat::from_row_slice(2, 2, &[0.0, 9.0, 9.0, 0.0]));
    }

    #[test]
    fn similarity_satisfies_gram_identity() {
        // s = c 1ᵀ + 1 cᵀ − 2 Z Zᵀ with Z barycentric and c_i = ‖z_i‖².
        let coords = random_coords(10, 2, 11, 4.0);
        let s = SimilarityMatrix::from_coordinates(&coords);
        let mean = coords.row_mean();
        let z = DMat::from_fn(10, 2, |i, k| coords[(i, k)] - mean[k]);
        let c: Vec<f64> = (0..10).map(|i| z.row(i).norm_squared()).collect();
        for i in 0..10 {
            for j in 0..10 {
                let zz = z.row(i).dot(&z.row(j));
                let rhs = c[i] + c[j] - 2.0 * zz;
                assert_relative_eq!(s.matrix()[(i, j)], rhs, epsilon = 1e-12, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn double_center_triangle_hand_values() {
        let g = double_center(&equilateral());
        let expect = DMat::from_fn(3, 3, |i, j| if i == j { 1.0 / 3.0 } else { -1.0 / 6.0 });
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(g.matrix()[(i, j)], expect[(i, j)], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn double_center_zero_matrix() {
        let s = SimilarityMatrix::from_matrix(DMat::zeros(4, 4)).unwrap();
        assert_eq!(double_center(&s).matrix(), &DMat::zeros(4, 4));
    }

    #[test]
    fn double_center_equals_barycentric_gram() {
        for seed in 0..100u64 {
            let n = 4 + (seed % 7) as usize;
            let coords = random_coords(n, 2, seed, 6.0);
            let g = double_center(&SimilarityMatrix::from_coordinates(&coords));
            let mean = coords.row_mean();
            let z = DMat::from_fn(n, 2, |i, k| coords[(i, k)] - mean[k]);
            let zzt = &z * z.transpose();
            let diff = (g.matrix() - &zzt).amax();
            assert!(diff < 1e-10, "seed {seed}: max deviation {diff}");
            // Row and column sums vanish under the centering projector.
            for i in 0..n {
                assert!(g.matrix().row(i).sum().abs() < 1e-10);
                assert!(g.matrix().column(i).sum().abs() < 1e-10);
            }
        }
    }

    #[test]
    fn centering_projector_identities() {
        let n = 7;
        let j_perp = DMat::from_fn(n, n, |i, j| {
            (if i == j { 1.0 } else { 0.0 }) - 1.0 / n as f64
        });
        let ones = DVec::from_element(n, 1.0);
        assert!((&j_perp * &ones).amax() < 1e-12);
        assert!(((&j_perp * &j_perp) - &j_perp).amax() < 1e-12);
    }

    #[test]
    fn gram_entry_decomposition_matches() {
        // Hand arithmetic on the triangle: row means 2/3, grand mean 2/3.
        let tri = equilateral();
        assert_relative_eq!(
            gram_entry_decomposed(0, 1, &tri),
            2.0 / 3.0 - (1.0 + 2.0 / 3.0) / 2.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(gram_entry_decomposed(0, 1, &tri), -1.0 / 6.0, epsilon = 1e-14);
        assert_relative_eq!(gram_entry_decomposed(2, 2, &tri), 1.0 / 3.0, epsilon = 1e-14);

        let zero = SimilarityMatrix::from_matrix(DMat::zeros(3, 3)).unwrap();
        assert_eq!(gram_entry_decomposed(1, 2, &zero), 0.0);

        // Entrywise agreement with double centering on random geometry.
        for seed in [1u64, 2, 3] {
            let coords = random_coords(8, 2, seed, 5.0);
            let s = SimilarityMatrix::from_coordinates(&coords);
            let g = double_center(&s);
            for i in 0..8 {
                for j in 0..8 {
                    assert_relative_eq!(
                        gram_entry_decomposed(i, j, &s),
                        g.matrix()[(i, j)],
                        epsilon = 1e-12,
                        max_relative = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn top_eigs_diagonal_case() {
        let g = GramMatrix { m: DMat::from_diagonal(&DVec::from_row_slice(&[3.0, 1.0, 0.0])) };
        let (vals, vecs) = top_eigs(&g, 2).unwrap();
        assert_relative_eq!(vals[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 1.0, epsilon = 1e-12);
        // Sign fix makes the dominant entries positive.
        assert_relative_eq!(vecs[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(vecs[(1, 1)], 1.0, epsilon = 1e-12);
        assert!(vecs[(1, 0)].abs() < 1e-12 && vecs[(2, 0)].abs() < 1e-12);
    }

    #[test]
    fn top_eigs_triangle_spectrum() {
        let (vals, _) = top_eigs(&double_center(&equilateral()), 3).unwrap();
        assert_relative_eq!(vals[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 0.5, epsilon = 1e-12);
        assert!(vals[2].abs() < 1e-12);
    }

    #[test]
    fn top_eigs_full_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let a = DMat::from_fn(20, 20, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let sym = GramMatrix { m: 0.5 * (&a + a.transpose()) };
        let (vals, vecs) = top_eigs(&sym, 20).unwrap();
        let mut recon = DMat::zeros(20, 20);
        for k in 0..20 {
            let u = vecs.column(k);
            recon += vals[k] * u * u.transpose();
        }
        assert!((&recon - &sym.m).norm() < 1e-9, "reconstruction error {}", (&recon - &sym.m).norm());
        // Descending order.
        for k in 1..20 {
            assert!(vals[k - 1] >= vals[k]);
        }
    }

    #[test]
    fn top_eigs_rejects_asymmetric() {
        let g = GramMatrix { m: DMat::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]) };
        assert!(top_eigs(&g, 1).is_err());
    }

    #[test]
    fn batch_mds_triangle_distances() {
        let coords = batch_mds(&equilateral(), 2).unwrap();
        for i in 0..3 {
            for j in (i + 1)..3 {
                let d = (coords.row(i) - coords.row(j)).norm();
                assert_relative_eq!(d, 1.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn batch_mds_exact_recovery() {
        let coords = random_coords(20, 2, 7, 5.0);
        let s = SimilarityMatrix::from_coordinates(&coords);
        let est = batch_mds(&s, 2).unwrap();
        let err = rmse(&est, &coords, Alignment::Procrustes).unwrap();
        assert!(err <= 1e-9, "procrustes rmse {err}");
        // Isometry: pairwise distances preserved.
        for i in 0..20 {
            for j in (i + 1)..20 {
                let d_est = (est.row(i) - est.row(j)).norm_squared();
                assert_relative_eq!(d_est, s.matrix()[(i, j)], epsilon = 1e-8, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn batch_mds_degenerate_collinear() {
        let coords = DMat::from_fn(5, 2, |i, k| if k == 0 { i as f64 } else { 0.0 });
        let s = SimilarityMatrix::from_coordinates(&coords);
        match batch_mds(&s, 2) {
            Err(Error::DegenerateGeometry { index, value, dim }) => {
                assert_eq!(index, 1);
                assert_eq!(dim, 2);
                assert!(value.abs() < 1e-9, "λ₂ = {value}");
            }
            other => panic!("expected degenerate geometry, got {other:?}"),
        }
    }

    fn rigid(est: &DMat, theta: f64, reflect: bool, shift: (f64, f64)) -> DMat {
        let (s, c) = theta.sin_cos();
        let refl = if reflect { -1.0 } else { 1.0 };
        DMat::from_fn(est.nrows(), 2, |i, k| {
            let x = est[(i, 0)];
            let y = est[(i, 1)] * refl;
            match k {
                0 => c * x - s * y + shift.0,
                _ => s * x + c * y + shift.1,
            }
        })
    }

    #[test]
    fn procrustes_identity() {
        let truth = random_coords(8, 2, 21, 3.0);
        let fit = procrustes_align(&truth, &truth, None).unwrap();
        assert!((&fit.rotation - DMat::identity(2, 2)).amax() < 1e-10);
        assert!(fit.translation.amax() < 1e-10);
        assert!(!fit.degenerate);
        assert!(rmse(&fit.aligned, &truth, Alignment::None).unwrap() < 1e-12);
    }

    #[test]
    fn procrustes_recovers_rotation_and_reflection() {
        let truth = random_coords(8, 2, 22, 3.0);
        let rotated = rigid(&truth, std::f64::consts::FRAC_PI_2, false, (5.0, 3.0));
        let fit = procrustes_align(&rotated, &truth, None).unwrap();
        assert!(rmse(&fit.aligned, &truth, Alignment::None).unwrap() <= 1e-12);

        let reflected = rigid(&truth, 0.0, true, (0.0, 0.0));
        let fit = procrustes_align(&reflected, &truth, None).unwrap();
        assert!(rmse(&fit.aligned, &truth, Alignment::None).unwrap() <= 1e-12);
        // That fit must be a reflection: det = -1.
        let det = fit.rotation[(0, 0)] * fit.rotation[(1, 1)] - fit.rotation[(0, 1)] * fit.rotation[(1, 0)];
        assert_relative_eq!(det, -1.0, epsilon = 1e-10);
    }

    #[test]
    fn procrustes_anchor_mode_uses_subset() {
        let truth = random_coords(10, 2, 23, 4.0);
        let moved = rigid(&truth, 0.7, false, (-2.0, 1.5));
        let fit = procrustes_align(&moved, &truth, Some(&[0, 3, 7])).unwrap();
        // A rigid transform is recovered exactly from any 3 non-collinear points.
        assert!(rmse(&fit.aligned, &truth, Alignment::None).unwrap() <= 1e-10);
    }

    #[test]
    fn procrustes_degenerate_falls_back_to_translation() {
        let truth = random_coords(5, 2, 24, 4.0);
        let est = DMat::from_element(5, 2, 1.0); // all points identical
        let fit = procrustes_align(&est, &truth, None).unwrap();
        assert!(fit.degenerate);
        assert!((&fit.rotation - DMat::identity(2, 2)).amax() == 0.0);
    }

    #[test]
    fn rmse_reference_cases() {
        let truth = random_coords(6, 2, 31, 4.0);
        assert_eq!(rmse(&truth, &truth, Alignment::None).unwrap(), 0.0);
        let shifted = DMat::from_fn(6, 2, |i, k| truth[(i, k)] + if k == 0 { 1.0 } else { 0.0 });
        assert_relative_eq!(rmse(&shifted, &truth, Alignment::None).unwrap(), 1.0, epsilon = 1e-12);
        assert!(rmse(&shifted, &truth, Alignment::Procrustes).unwrap() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn prop_procrustes_rmse_rigid_invariant(
            seed in 0u64..1000,
            theta in 0.0f64..std::f64::consts::TAU,
            reflect in proptest::bool::ANY,
            dx in -10.0f64..10.0,
            dy in -10.0f64..10.0,
        ) {
            let truth = random_coords(7, 2, seed, 5.0);
            let est = random_coords(7, 2, seed.wrapping_add(1), 5.0);
            let base = rmse(&est, &truth, Alignment::Procrustes).unwrap();
            let moved = rigid(&est, theta, reflect, (dx, dy));
            let transformed = rmse(&moved, &truth, Alignment::Procrustes).unwrap();
            prop_assert!((base - transformed).abs() < 1e-9,
                "rigid transform changed procrustes rmse: {base} vs {transformed}");
        }
    }

    #[test]
    fn scenario_validation() {
        let pos = DMat::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        assert!(Scenario::from_positions(pos.clone(), vec![0, 2]).is_ok());
        assert!(Scenario::from_positions(pos.clone(), vec![3]).is_err());
        // Too few nodes for the dimension.
        assert!(Scenario::from_positions(DMat::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]), vec![]).is_err());
        // Position outside the declared area.
        assert!(Scenario::new(pos, vec![], vec![(0.0, 0.5), (0.0, 1.0)]).is_err());
    }
}
